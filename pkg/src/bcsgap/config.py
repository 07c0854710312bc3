"""Run configuration: a TOML file mapped onto parameters, kernel and tolerances.

Top-level keys ``epsilon``, ``hbar_omega_d``, ``mu`` and ``n0`` set the
physical stage.  Tables: ``[kernel]`` (``form`` plus ``value`` | ``base`` and
``coefficients`` | ``table_path``, optional ``u1``/``u2``), ``[dos]``,
``[grid]``, ``[tolerances]``, ``[solver]``, ``[critical]`` and ``[output]``.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import BCSGapError, ConfigError
from .model import (ConstantDOS, ConstantKernel, DensityOfStates, FreeElectronDOS, Kernel,
                    PhysicalParams, SeparableKernel, TabulatedDOS, TabulatedKernel, ZeroDOS)
from .solver import GapProblem, SolverOptions

DEFAULTS: Dict[str, Any] = {
    "epsilon": 0.01,
    "hbar_omega_d": 1.0,
    "mu": 10.0,
    "n0": 1.0,
    "kernel": {"form": "separable", "base": 0.4, "coefficients": [0.1]},
    "dos": {"form": "zero"},
    "grid": {"n_nodes": 64, "mapping": "log", "n_T": 20, "T_min_rel": 1e-3, "T_max_rel": 1.2},
    "tolerances": {"solver": 1e-12, "bisection_rel": 1e-12,
                   "h_rel": 1e-4, "consistency": 0.05},
    "solver": {"method": "newton", "max_iter": 200, "damping": 1.0, "anderson_depth": 3},
    "critical": {"offsets": [1e-2, 5e-3, 2.5e-3, 1.25e-3]},
    "output": {"dir": "out", "format": "both"},
}

FORMATS = ("csv", "json", "both")
PHYSICAL_KEYS = ("epsilon", "hbar_omega_d", "mu", "n0")


def _merge(base, update):
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _coerce(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    return text


def apply_overrides(raw: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``key=value`` strings.

    A bare key names a top-level physical parameter if there is one of that
    name, and ``tolerances.<key>`` otherwise.
    """
    out = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) == 1 and parts[0] not in PHYSICAL_KEYS:
            parts = ["tolerances"] + parts
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-table")
        node[parts[-1]] = _coerce(value.strip())
    return out


def digest(raw: Dict[str, Any]) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class RunConfig:
    params: PhysicalParams
    kernel: Kernel
    dos: DensityOfStates
    n_nodes: int
    mapping: str
    n_T: int
    T_min_rel: float
    T_max_rel: float
    solver: SolverOptions
    bisection_rel: float
    h_rel: float
    consistency: float
    offsets: tuple
    out_dir: Path
    out_format: str
    raw: dict
    digest: str
    source: Optional[Path] = None

    def problem(self, n_nodes: Optional[int] = None) -> GapProblem:
        return GapProblem(self.kernel, self.params, n_nodes=n_nodes or self.n_nodes, mapping=self.mapping)

    def ensure_output_dir(self) -> Path:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {self.out_dir}: {exc}") from exc
        if not os.access(self.out_dir, os.W_OK):
            raise ConfigError(f"output directory {self.out_dir} is not writable")
        return self.out_dir


def _kernel(section, params, base_dir):
    form = section.get("form")
    domain = params.domain
    bounds = {k: float(section[k]) for k in ("u1", "u2") if k in section}
    if form == "constant":
        value = float(section.get("value", section.get("u1", 0.0)))
        k = ConstantKernel(value, domain)
        if bounds and (bounds.get("u1", value) != value or bounds.get("u2", value) != value):
            raise ConfigError("constant kernel bounds must equal its value")
        return k
    if form == "separable":
        return SeparableKernel(float(section["base"]), tuple(section.get("coefficients", ())), domain, **bounds)
    if form == "tabulated":
        if "table_path" in section:
            path = Path(section["table_path"])
            if not path.is_absolute():
                path = base_dir / path
            return TabulatedKernel.from_csv(path, **bounds)
        if "sample" in section:
            sample = section["sample"]
            coeffs = tuple(sample.get("coefficients", ()))
            src = SeparableKernel(float(sample["base"]), coeffs, domain)
            return TabulatedKernel.sample(src._evaluate, domain, int(sample.get("n", 33)), **bounds)
        raise ConfigError("tabulated kernel needs table_path or a sample table")
    raise ConfigError(f"unknown kernel form {form!r}")


def _dos(section, params, base_dir):
    form = section.get("form", "zero")
    if form == "zero":
        return ZeroDOS()
    if form == "constant":
        return ConstantDOS(float(section.get("n0", params.n0)))
    if form == "free_electron":
        return FreeElectronDOS(float(section["c"]), float(section.get("mu", params.mu)))
    if form == "tabulated":
        path = Path(section["table_path"])
        if not path.is_absolute():
            path = base_dir / path
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        return TabulatedDOS(data[:, 0], data[:, 1])
    raise ConfigError(f"unknown density-of-states form {form!r}")


def build(raw: Dict[str, Any], source: Optional[Path] = None) -> RunConfig:
    """Validate the merged dictionary and construct every object it describes."""
    raw = _merge(DEFAULTS, raw)
    base_dir = source.parent if source is not None else Path.cwd()
    try:
        params = PhysicalParams(float(raw["epsilon"]), float(raw["hbar_omega_d"]),
                                float(raw["mu"]), float(raw["n0"]))
        kernel = _kernel(raw["kernel"], params, base_dir)
        dos = _dos(raw["dos"], params, base_dir)
        grid, tol, sol, out = raw["grid"], raw["tolerances"], raw["solver"], raw["output"]
        n_nodes = int(grid["n_nodes"])
        if n_nodes < 16:
            raise ConfigError("grid.n_nodes must be at least 16")
        unknown = sorted(set(tol) - set(DEFAULTS["tolerances"]))
        if unknown:
            raise ConfigError(f"unknown tolerance keys {unknown}")
        for key in ("solver", "bisection_rel", "h_rel", "consistency"):
            if not float(tol[key]) > 0:
                raise ConfigError(f"tolerances.{key} must be positive")
        if out["format"] not in FORMATS:
            raise ConfigError(f"output.format must be one of {FORMATS}")
        offsets = tuple(float(o) for o in raw["critical"]["offsets"])
        opts = SolverOptions(tol=float(tol["solver"]), max_iter=int(sol["max_iter"]),
                             damping=float(sol["damping"]), method=str(sol["method"]),
                             anderson_depth=int(sol["anderson_depth"]))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, BCSGapError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    out_dir = Path(out["dir"])
    if not out_dir.is_absolute() and source is not None:
        out_dir = Path.cwd() / out_dir
    return RunConfig(params, kernel, dos, n_nodes, str(grid["mapping"]), int(grid["n_T"]),
                     float(grid["T_min_rel"]), float(grid["T_max_rel"]), opts,
                     float(tol["bisection_rel"]), float(tol["h_rel"]),
                     float(tol["consistency"]), offsets, out_dir, str(out["format"]), raw,
                     digest(raw), source)


def load(path=None, overrides: Sequence[str] = ()) -> RunConfig:
    raw: Dict[str, Any] = {}
    source = None
    if path is not None:
        source = Path(path)
        try:
            with open(source, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {source}: {exc}") from exc
    if overrides:
        raw = apply_overrides(raw, overrides)
    return build(raw, source)
