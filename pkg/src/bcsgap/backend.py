"""Selects the compiled kernels when available, the numpy ones otherwise.

Set ``BCSGAP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pycore

_FORCE_PYTHON = os.environ.get("BCSGAP_PURE_PYTHON", "").strip() not in ("", "0")

try:
    if _FORCE_PYTHON:
        raise ImportError("pure Python backend requested")
    from . import _ccore
except ImportError:
    _ccore = None

_impl = _ccore if _ccore is not None else _pycore
NAME = _impl.NAME


def available():
    """Names of the backends importable in this process."""
    names = ["python"]
    if _ccore is not None:
        names.insert(0, "cython")
    return names


def get(name=None):
    """Module implementing the kernels for ``name`` (default: the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _pycore
    if name == "cython":
        if _ccore is None:
            raise ImportError("compiled backend is not available")
        return _ccore
    raise ValueError(f"unknown backend {name!r}")


gap_phi = _impl.gap_phi
gap_phi_derivs = _impl.gap_phi_derivs
nystrom_apply = _impl.nystrom_apply
nystrom_system = _impl.nystrom_system
gap_integral = _impl.gap_integral
g_function = _impl.g_function
