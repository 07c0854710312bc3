"""Constant-coupling gap equation: closed-form zero-temperature gap, Delta(T) and tau.

For a constant coupling ``U`` the gap does not depend on energy and solves the
scalar equation ``1 = U int tanh(E/2T)/E dxi`` with ``E = sqrt(xi^2 + Delta^2)``.
The solutions for ``U = u1`` and ``U = u2`` bound the solution of the full
problem from below and above.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from . import backend
from .errors import ConvergenceError, DomainError, ParameterError
from .model import PhysicalParams

# absolute tolerance for the scalar gap integrals
QUAD_TOL = 1e-14
# 2 e^gamma / pi
_WEAK_COUPLING_TC = 2.0 * math.exp(0.5772156649015329) / math.pi


def delta0_closed_form(U: float, params: PhysicalParams) -> float:
    """Zero-temperature gap of the constant-coupling equation."""
    if not U > 0:
        raise DomainError("coupling must be positive")
    inv = 1.0 / U
    if inv > 700.0:
        raise ParameterError(f"cutoff epsilon too large for coupling U={U}")
    first = params.hbar_omega_d - params.epsilon * math.exp(inv)
    second = params.hbar_omega_d - params.epsilon * math.exp(-inv)
    if first <= 0.0:
        raise ParameterError(f"cutoff epsilon too large for coupling U={U}")
    return math.sqrt(first * second) / math.sinh(inv)


def gap_integral(T: float, delta: float, params: PhysicalParams, tol: float = QUAD_TOL) -> float:
    if T < 0:
        raise DomainError(f"temperature must be non-negative, got T={T}")
    value, _, _ = backend.gap_integral(float(T), float(delta), params.epsilon, params.hbar_omega_d, tol)
    return value


def simplified_rhs(U: float, T: float, delta: float, params: PhysicalParams) -> float:
    """``U int_eps^hw tanh(E/2T)/E dxi``; equals 1 at the gap ``delta = Delta(T)``."""
    if delta < 0:
        raise DomainError("delta must be non-negative")
    return U * gap_integral(T, delta, params)


def _check_superconducting(U, params):
    if not U > 0:
        raise DomainError("coupling must be positive")
    if U * params.log_ratio <= 1.0:
        raise ParameterError(
            f"U={U} gives U*log(hbar_omega_d/epsilon) <= 1: no superconducting phase")


def transition_temperature(U: float, params: PhysicalParams, tol: float = 1e-13) -> float:
    """Temperature ``tau`` at which the gap of constant coupling ``U`` closes.

    ``tol`` bounds ``|simplified_rhs(U, tau, 0) - 1|``.
    """
    _check_superconducting(U, params)
    return _tau_cached(float(U), params, float(tol))


@lru_cache(maxsize=1024)
def _tau_cached(U, params, tol):
    def f(T):
        return U * gap_integral(T, 0.0, params) - 1.0

    guess = _WEAK_COUPLING_TC * params.hbar_omega_d * math.exp(-1.0 / U)
    lo, hi = 0.5 * guess, 2.0 * guess
    while f(lo) <= 0.0:
        lo *= 0.5
    while f(hi) >= 0.0:
        lo, hi = hi, 2.0 * hi
    tau = brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(tau)) > tol:
        # brentq already sits at the float resolution of tau; report honestly
        raise ParameterError(f"cannot reach |rhs - 1| <= {tol} for U={U}")
    return float(tau)


def coupling_for_tc(tc: float, params: PhysicalParams, tol: float = QUAD_TOL) -> float:
    """Constant coupling whose transition temperature is ``tc``.

    ``tol`` is the absolute quadrature tolerance of the defining integral.
    """
    if not tc > 0:
        raise DomainError(f"tc must be positive, got {tc}")
    return 1.0 / gap_integral(tc, 0.0, params, tol)


def solve_simplified(U: float, T: float, params: PhysicalParams, tol: float = 1e-12) -> float:
    """Unique non-negative gap ``Delta(T)``; zero at and above ``tau``.

    The root is refined to float resolution; ``tol`` bounds the accepted
    residual ``|simplified_rhs - 1|``.
    """
    if T < 0:
        raise DomainError(f"temperature must be non-negative, got T={T}")
    _check_superconducting(U, params)
    delta = _delta_cached(float(U), float(T), params)
    if delta > 0.0:
        residual = abs(simplified_rhs(U, T, delta, params) - 1.0)
        if residual > tol:
            raise ConvergenceError(f"residual {residual:.3g} above tol {tol:.3g} at T={T}",
                                   history=[residual])
    return delta


@lru_cache(maxsize=8192)
def _delta_cached(U, T, params):
    tau = _tau_cached(U, params, 1e-13)
    if T >= tau:
        return 0.0

    def f(d):
        return U * gap_integral(T, d, params) - 1.0

    try:
        hi = delta0_closed_form(U, params) * (1.0 + 1e-6)
    except ParameterError:
        hi = params.hbar_omega_d
    while f(hi) > 0.0:
        hi *= 2.0
    if f(0.0) <= 0.0:
        return 0.0
    return float(brentq(f, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))


@dataclass(frozen=True, eq=False)
class SimplifiedSolution:
    """``T -> Delta(T)`` for one constant coupling.

    ``delta`` solves the scalar equation at the requested temperature;
    ``delta_of_T`` interpolates ``Delta^2`` monotonically on a Chebyshev grid
    built at construction, which is cheap for dense curve sampling.
    """

    coupling: float
    params: PhysicalParams
    table_size: int = 33
    tau: float = field(init=False)
    delta0: float = field(init=False)
    table_T: np.ndarray = field(init=False, repr=False)
    table_delta2: np.ndarray = field(init=False, repr=False)
    _interp: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        tau = transition_temperature(self.coupling, self.params)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "delta0", solve_simplified(self.coupling, 0.0, self.params))
        k = np.arange(self.table_size)
        Ts = np.sort(0.5 * tau * (1.0 - np.cos(np.pi * k / (self.table_size - 1))))
        Ts[0], Ts[-1] = 0.0, tau
        d2 = np.array([self.delta(t) ** 2 for t in Ts])
        object.__setattr__(self, "table_T", Ts)
        object.__setattr__(self, "table_delta2", d2)
        object.__setattr__(self, "_interp", PchipInterpolator(Ts, d2))

    def delta(self, T: float) -> float:
        return solve_simplified(self.coupling, T, self.params)

    def __call__(self, T):
        return self.delta(T)

    def delta_of_T(self, T):
        """Vectorised interpolated ``Delta(T)``, zero for ``T >= tau``."""
        T = np.asarray(T, float)
        inside = np.clip(T, 0.0, self.tau)
        vals = np.sqrt(np.maximum(self._interp(inside), 0.0))
        return np.where(T >= self.tau, 0.0, vals)


def envelopes(u1: float, u2: float, params: PhysicalParams):
    """Lower and upper constant-coupling solutions for the bounds ``u1 <= U <= u2``."""
    low = SimplifiedSolution(u1, params)
    high = low if u2 == u1 else SimplifiedSolution(u2, params)
    return low, high
