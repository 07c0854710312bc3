"""Thermodynamic potential, entropy and specific heat across the transition.

``Omega(T) = Omega_N(T) + Psi(T)`` below ``tc`` and ``Omega_N(T)`` above it.
Temperature derivatives are finite differences whose stencils never
straddle ``tc``; at ``tc`` itself one-sided stencils give the two limits.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import DomainError, StencilError
from .model import DensityOfStates, PhysicalParams, ZeroDOS
from .quadrature import integrate, integrate_fermi_tail, panel_gauss
from .solver import GapProblem, GapSolution, SolverOptions, solve_fixed_point

# Fermi factors below exp(-FERMI_CUTOFF) are dropped from finite-range integrals
FERMI_CUTOFF = 45.0
# Gauss-Legendre order per panel; panels are at most T wide
PANEL_ORDER = 20
TAIL_TOL = 1e-15


def _check_T(T):
    if not (T > 0 and math.isfinite(T)):
        raise DomainError(f"temperature must be positive, got T={T}")


def _log1p_exp_neg(x, T):
    """``log(1 + exp(-x/T))`` for ``x >= 0``."""
    return np.log1p(np.exp(-np.asarray(x, float) / T))


def band_fermi_integral(T: float, params: PhysicalParams) -> float:
    """``int_eps^hw log(1 + exp(-x/T)) dx``, smooth in ``T``."""
    _check_T(T)
    a = params.epsilon
    b = min(params.hbar_omega_d, a + FERMI_CUTOFF * T)
    return panel_gauss(lambda x: _log1p_exp_neg(x, T), a, b, T, PANEL_ORDER)


def phi(T: float, params: PhysicalParams, n: DensityOfStates) -> float:
    """Contribution of the states outside the interaction band."""
    _check_T(T)
    if isinstance(n, ZeroDOS):
        return 0.0
    mu, hw = params.mu, params.hbar_omega_d
    first = 2.0 * integrate(lambda x: x * n(x), -mu, -hw, tol=1e-14, rtol=1e-15).value
    lo = max(-mu, -hw - FERMI_CUTOFF * T)
    second = -2.0 * T * panel_gauss(lambda x: n(x) * np.log1p(np.exp(x / T)), lo, -hw, T, PANEL_ORDER)
    third = -2.0 * T * integrate_fermi_tail(n, hw, T, tol=TAIL_TOL).value
    return first + second + third


def omega_n(T: float, params: PhysicalParams, n: DensityOfStates) -> float:
    """Normal-state potential."""
    _check_T(T)
    eps, hw, n0 = params.epsilon, params.hbar_omega_d, params.n0
    kinetic = -n0 * (hw * hw - eps * eps)
    return kinetic - 4.0 * n0 * T * band_fermi_integral(T, params) + phi(T, params, n)


def psi_integrands(T: float, x, u):
    """The three condensation integrands at energies ``x`` for gap values ``u``.

    Written with ``E - x = u^2 / (E + x)`` so that small gaps do not cancel.
    """
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    E = np.hypot(x, u)
    d = u * u / (E + x)
    first = -2.0 * d
    second = u * u / E * np.tanh(E / (2.0 * T))
    q = np.exp(-x / T)
    third = -4.0 * T * np.log1p(q * np.expm1(-d / T) / (1.0 + q))
    return first, second, third


def psi(T: float, params: PhysicalParams, sol: GapSolution, method: str = "grid") -> float:
    """Condensation term for the gap slice ``sol`` (which must be at ``T``).

    ``method="grid"`` uses the slice's quadrature weights; ``"adaptive"``
    integrates the grid interpolant of the gap with adaptive quadrature.
    """
    _check_T(T)
    if not math.isclose(T, sol.T, rel_tol=1e-14, abs_tol=0.0):
        raise DomainError(f"slice is at T={sol.T}, not T={T}")
    if sol.max_value == 0.0:
        return 0.0
    grid = sol.grid
    if method == "grid":
        total = sum(grid.integrate(term) for term in psi_integrands(T, grid.nodes, sol.values))
    elif method == "adaptive":
        gap = grid.interpolant(sol.values)

        def f(x):
            return np.sum(psi_integrands(T, x, np.maximum(gap(x), 0.0)), axis=0)

        total = integrate(f, grid.lo, grid.hi, tol=1e-15, rtol=1e-14).value
    else:
        raise DomainError(f"unknown psi method {method!r}")
    return params.n0 * total


class ThermoContext:
    """Evaluates ``Omega`` for one gap problem, re-solving the gap at every ``T``."""

    def __init__(self, problem: GapProblem, dos: Optional[DensityOfStates] = None,
                 tc: Optional[float] = None, opts: SolverOptions = SolverOptions()):
        from .solver import critical_temperature

        self.problem = problem
        self.params = problem.params
        self.dos = dos if dos is not None else ZeroDOS()
        self.opts = opts
        self.tc = float(tc) if tc is not None else critical_temperature(problem, opts=opts)
        self._cache: Dict[float, float] = {}

    def gap(self, T: float) -> GapSolution:
        return solve_fixed_point(self.problem, T, self.opts)

    def omega_n(self, T: float) -> float:
        return omega_n(T, self.params, self.dos)

    def psi(self, T: float) -> float:
        _check_T(T)
        if T >= self.tc:
            return 0.0
        return psi(T, self.params, self.gap(T))

    def omega(self, T: float) -> float:
        T = float(T)
        if T not in self._cache:
            self._cache[T] = self.omega_n(T) + (self.psi(T) if T <= self.tc else 0.0)
        return self._cache[T]

    __call__ = omega


def omega(T: float, ctx: ThermoContext) -> float:
    """``Omega_N + Psi`` at or below ``ctx.tc``, ``Omega_N`` above."""
    return ctx.omega(T)


@dataclass(frozen=True)
class OneSidedLimit:
    side: str
    omega: float
    entropy: float
    cv: float


@dataclass(frozen=True, eq=False)
class ThermoCurve:
    T_grid: np.ndarray
    omega: np.ndarray
    entropy: np.ndarray
    cv: np.ndarray
    side: List[str]
    tc: float
    h: float
    tc_minus: OneSidedLimit
    tc_plus: OneSidedLimit
    notes: dict = field(default_factory=dict)

    @property
    def cv_jump(self) -> float:
        """``C_V(tc-) - C_V(tc+)``."""
        return self.tc_minus.cv - self.tc_plus.cv

    def rows(self):
        lim = [self.tc_minus, self.tc_plus]
        below = [(T, o, s, c, sd) for T, o, s, c, sd in
                 zip(self.T_grid, self.omega, self.entropy, self.cv, self.side) if T < self.tc]
        above = [(T, o, s, c, sd) for T, o, s, c, sd in
                 zip(self.T_grid, self.omega, self.entropy, self.cv, self.side) if T >= self.tc]
        yield from below
        for l in lim:
            yield (self.tc, l.omega, l.entropy, l.cv, l.side)
        yield from above

    def to_csv(self, path, header_comment: Optional[str] = None, fmt: str = "%.12g"):
        with open(path, "w", newline="\n") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("T,omega,entropy,cv,side\n")
            for T, o, s, c, sd in self.rows():
                fh.write(",".join(fmt % v for v in (T, o, s, c)) + f",{sd}\n")


def _central(f, T, h):
    fp, f0, fm = f(T + h), f(T), f(T - h)
    return (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)


def _one_sided(f, T, h):
    """Second-order one-sided first and second derivatives; ``h < 0`` looks backwards."""
    f0, f1, f2, f3 = f(T), f(T + h), f(T + 2 * h), f(T + 3 * h)
    d1 = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
    d2 = (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h)
    return f0, d1, d2


def one_sided_limit(f: Callable[[float], float], tc: float, h: float, side: str) -> OneSidedLimit:
    """Limits of ``Omega``, ``S`` and ``C_V`` as ``T -> tc`` from one side.

    ``Omega`` is the quadratic extrapolation of the three nearest off-``tc``
    samples, so it does not use the value at ``tc`` itself.
    """
    step = -h if side == "tc_minus" else h
    if tc + 3 * step <= 0:
        raise StencilError(f"one-sided stencil at tc={tc} with h={h} reaches T <= 0")
    f1, f2, f3 = f(tc + step), f(tc + 2 * step), f(tc + 3 * step)
    omega_lim = 3.0 * f1 - 3.0 * f2 + f3
    _, d1, d2 = _one_sided(f, tc, step)
    return OneSidedLimit(side, omega_lim, -d1, -tc * d2)


def entropy_and_cv(f: Callable[[float], float], T_grid: Sequence[float], tc: float,
                   h: Optional[float] = None, richardson: bool = True,
                   threads: int = 1) -> ThermoCurve:
    """Entropy ``-dOmega/dT`` and specific heat ``-T d^2Omega/dT^2`` from ``f = Omega``.

    Points farther than ``2h`` from ``tc`` use central differences (Richardson
    combined over ``h`` and ``2h``); closer points use one-sided stencils on
    their own side.  Samples strictly inside ``(tc - h, tc + h)`` other than
    ``tc`` are rejected.
    """
    T_grid = np.asarray(T_grid, float)
    if h is None:
        h = 1e-4 * tc
    if not h > 0:
        raise StencilError("differencing step must be positive")
    if T_grid.size == 0 or np.any(T_grid <= 0):
        raise StencilError("temperature samples must be positive")
    bad = [T for T in T_grid if 0 < abs(T - tc) < h]
    if bad:
        raise StencilError(f"samples {bad} lie within h={h} of tc={tc}; stencils would straddle tc")

    if threads > 1:
        _prefetch(f, T_grid, tc, h, richardson, threads)

    omega_v, ent, cv, sides = [], [], [], []
    for T in T_grid:
        side = "below" if T < tc else "above"
        reach = 2 * h if richardson else h
        if T == tc:
            lim = one_sided_limit(f, tc, h, "tc_minus")
            o, s, c = f(T), lim.entropy, lim.cv
        elif abs(T - tc) <= reach or T - reach <= 0:
            step = -h if T < tc else h
            if T + 3 * step <= 0:
                raise StencilError(f"no room for a one-sided stencil at T={T}")
            o, d1, d2 = _one_sided(f, T, step)
            s, c = -d1, -T * d2
        else:
            s1, c1 = _central(f, T, h)
            if richardson:
                s2, c2 = _central(f, T, 2 * h)
                s1 = (4.0 * s1 - s2) / 3.0
                c1 = (4.0 * c1 - c2) / 3.0
            o, s, c = f(T), -s1, -T * c1
        omega_v.append(o)
        ent.append(s)
        cv.append(c)
        sides.append(side)
    lo = one_sided_limit(f, tc, h, "tc_minus")
    hi = one_sided_limit(f, tc, h, "tc_plus")
    return ThermoCurve(T_grid, np.array(omega_v), np.array(ent), np.array(cv), sides, float(tc),
                       float(h), lo, hi, {"richardson": richardson})


def _prefetch(f, T_grid, tc, h, richardson, threads):
    """Evaluate every stencil point concurrently so later calls hit ``f``'s cache."""
    pts = set()
    offsets = (-2, -1, 0, 1, 2) if richardson else (-1, 0, 1)
    for T in T_grid:
        pts.update(T + k * h for k in offsets)
        pts.update(T + k * h for k in (-3, -2, -1, 1, 2, 3))
    pts.update(tc + k * h for k in range(-3, 4))
    pts = sorted(p for p in pts if p > 0)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(f, pts))


def thermo_curve(ctx: ThermoContext, T_grid: Sequence[float], h: Optional[float] = None,
                 threads: int = 1) -> ThermoCurve:
    return entropy_and_cv(ctx.omega, T_grid, ctx.tc, h=h, threads=threads)


def default_temperatures(tc: float, n_below: int = 12, n_above: int = 6, t_min_rel: float = 1e-3,
                         t_max_rel: float = 1.5, h_rel: float = 1e-4) -> np.ndarray:
    """Sampling of ``(0, t_max_rel * tc]`` that keeps stencils clear of ``tc``."""
    below = np.linspace(t_min_rel * tc, tc * (1 - 3 * h_rel), n_below)
    above = np.linspace(tc * (1 + 3 * h_rel), t_max_rel * tc, n_above)
    return np.concatenate([below, [tc], above])
