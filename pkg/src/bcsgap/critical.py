"""Near-T_c limits of the gap and the specific-heat jump.

Close below ``tc`` the squared gap behaves like ``u^2 = v s + w s^2 / 2`` with
``s = tc - T``.  The limit functions ``v`` and ``w`` are fitted per node from
solves at a few offsets.  They feed the functionals ``F`` and ``G``, which
reproduce ``v`` and ``w`` at a fixed point, and the jump formula

    dC_V = -N0 / (8 tc) int_{eps/2tc}^{hw/2tc} v(2 tc eta)^2 g(eta) d eta.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import backend
from .errors import DomainError, InvariantViolation, ParameterError
from .model import EnergyGrid, Kernel, PhysicalParams
from .quadrature import integrate
from .solver import (GapProblem, GapSolution, GapSurface, SolverOptions, critical_temperature,
                     solve_fixed_point, temperature_derivative)

DEFAULT_OFFSETS = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
CONSISTENCY_TOL = 0.05


def g_function(eta):
    """``(sech^2 eta - tanh(eta)/eta) / eta^2``, equal to ``-2/3`` at 0."""
    arr = np.asarray(eta, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("g is defined for eta >= 0 only")
    out = backend.g_function(np.atleast_1d(arr))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


@dataclass(frozen=True, eq=False)
class CriticalLimits:
    """Per-node limit functions with fit diagnostics.

    ``residuals`` is the per-node RMS misfit of the fit;
    ``v_confirm``/``w_confirm`` repeat it without the largest offset.
    """

    x_grid: EnergyGrid
    v: np.ndarray
    w: np.ndarray
    tc: float
    offsets: np.ndarray
    residuals: np.ndarray
    v_confirm: np.ndarray
    w_confirm: np.ndarray
    c3_combination: Optional[np.ndarray] = None

    @property
    def v_confirm_change(self) -> float:
        scale = np.max(np.abs(self.v))
        return float(np.max(np.abs(self.v - self.v_confirm)) / scale) if scale else 0.0

    @property
    def w_confirm_change(self) -> float:
        scale = np.max(np.abs(self.w))
        return float(np.max(np.abs(self.w - self.w_confirm)) / scale) if scale else 0.0


def _fit(s, f2, cubic=True):
    """Least squares ``f2 = v s + w s^2 / 2 (+ k s^3)`` for each column of ``f2``.

    The cubic term absorbs the next order so that ``w`` is not biased by
    ``O(s)``; it is dropped when only three offsets are available.
    """
    cols = [s, 0.5 * s * s]
    if cubic and s.size > 3:
        cols.append(s ** 3)
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, f2, rcond=None)
    resid = f2 - design @ coef
    return coef[0], coef[1], np.sqrt(np.mean(resid ** 2, axis=0))


def critical_surface(problem: GapProblem, tc: float, offsets: Sequence[float] = DEFAULT_OFFSETS,
                     opts: SolverOptions = SolverOptions()) -> GapSurface:
    """Gap slices at ``tc (1 - o)`` for each relative offset ``o``."""
    offsets = sorted(set(float(o) for o in offsets), reverse=True)
    if len(offsets) < 3 or min(offsets) <= 0 or max(offsets) >= 1:
        raise ParameterError("need at least three relative offsets in (0, 1)")
    T_grid = np.array([tc * (1.0 - o) for o in offsets])
    sols = [solve_fixed_point(problem, T, opts) for T in T_grid]
    values = np.array([s.values for s in sols])
    return GapSurface(T_grid, problem.grid, values, float(tc), sols,
                      {"offsets": offsets, "purpose": "critical limits"})


def _limits(surface: GapSurface, tc: float, steps=None):
    T = np.asarray(surface.T_grid, float)
    mask = T < tc
    if steps is not None:
        wanted = np.array([tc - h for h in steps])
        idx = [int(np.argmin(np.abs(T - t))) for t in wanted]
        mask = np.zeros(T.size, bool)
        mask[idx] = True
    s = tc - T[mask]
    if s.size < 3:
        raise ParameterError("need at least three slices below tc")
    f2 = np.asarray(surface.values, float)[mask] ** 2
    order = np.argsort(-s)
    s, f2 = s[order], f2[order]
    v, w, res = _fit(s, f2)
    v2, w2, _ = _fit(s[1:], f2[1:])
    return s, v, w, res, v2, w2


def estimate_limits(surface: GapSurface, tc: float, steps=None, problem: Optional[GapProblem] = None,
                    superconducting: bool = True) -> CriticalLimits:
    """Fit ``v`` and ``w`` at every node from slices below ``tc``.

    ``steps`` are absolute offsets ``tc - T`` to pick from the surface (all
    slices below ``tc`` by default).  With ``problem`` given, the combination
    ``|w/2 + (f + s df/dT) / s^2|`` is evaluated at every offset using the
    implicit temperature derivative of the solved gap.
    """
    s, v, w, res, v2, w2 = _limits(surface, tc, steps)
    if superconducting and np.any(v <= 0):
        bad = np.flatnonzero(v <= 0)
        raise InvariantViolation(f"fitted v is not positive at nodes {bad.tolist()}")
    combo = None
    if problem is not None:
        rows = []
        for off in s:
            sol = _slice_for(surface, tc - off)
            f = sol.values ** 2
            fT = 2.0 * sol.values * temperature_derivative(problem, sol)
            rows.append(np.max(np.abs(0.5 * w + (f + off * fT) / off ** 2)))
        combo = np.array(rows)
    return CriticalLimits(surface.x_grid, v, w, float(tc), s, res, v2, w2, combo)


def _slice_for(surface, T):
    idx = int(np.argmin(np.abs(np.asarray(surface.T_grid) - T)))
    return surface.solutions[idx]


def estimate_v(surface: GapSurface, tc: float, steps=None, **kwargs) -> CriticalLimits:
    return estimate_limits(surface, tc, steps, **kwargs)


def estimate_w(surface: GapSurface, tc: float, steps=None, **kwargs) -> CriticalLimits:
    return estimate_limits(surface, tc, steps, **kwargs)


def _tanh_factor(nodes, tc):
    return np.tanh(nodes / (2.0 * tc))


def _first_factor(kmat, grid, v, tc):
    nodes = grid.nodes
    return kmat @ (grid.weights * np.sqrt(v) / nodes * _tanh_factor(nodes, tc))


def F_of_x(kernel: Kernel, limits: CriticalLimits, tc: Optional[float] = None) -> np.ndarray:
    """``(int U(x, xi) sqrt(v(xi)) tanh(xi / 2tc) / xi dxi)^2`` at every node."""
    tc = limits.tc if tc is None else tc
    if np.any(limits.v < 0):
        raise DomainError("v must be non-negative")
    grid = limits.x_grid
    return _first_factor(kernel.matrix(grid.nodes), grid, limits.v, tc) ** 2


def G_of_x(kernel: Kernel, limits: CriticalLimits, tc: Optional[float] = None) -> np.ndarray:
    """Limit functional matching ``w`` at a fixed point (needs ``v > 0``)."""
    tc = limits.tc if tc is None else tc
    v, w = limits.v, limits.w
    if np.any(v <= 0):
        raise DomainError("G needs v > 0 at every node")
    grid = limits.x_grid
    eta = grid.nodes
    kmat = kernel.matrix(eta)
    sv = np.sqrt(v)
    t = _tanh_factor(eta, tc)
    sech2 = 1.0 - t * t
    inner = ((w / (eta * sv) - 2.0 * sv ** 3 / eta ** 3) * t
             + sv * sech2 * (v / (tc * eta ** 2) + 2.0 / tc ** 2))
    return _first_factor(kmat, grid, v, tc) * (kmat @ (grid.weights * inner))


def relative_mismatch(a, b) -> float:
    """``|a - b|_inf / |b|_inf``."""
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(b)))


def jump_integral(limits: CriticalLimits, tc: float, params: PhysicalParams, method: str = "grid") -> float:
    """``int_{eps/2tc}^{hw/2tc} v(2 tc eta)^2 g(eta) d eta``.

    Evaluated in ``x = 2 tc eta`` on the nodes of ``limits`` (``"grid"``) or
    adaptively on the grid interpolant of ``v`` (``"adaptive"``).
    """
    grid = limits.x_grid
    if method == "grid":
        vals = limits.v ** 2 * g_function(grid.nodes / (2.0 * tc))
        return grid.integrate(vals) / (2.0 * tc)
    if method == "adaptive":
        interp = grid.interpolant(limits.v)
        res = integrate(lambda eta: interp(2.0 * tc * eta) ** 2 * g_function(eta),
                        params.epsilon / (2.0 * tc), params.hbar_omega_d / (2.0 * tc),
                        tol=1e-13, rtol=1e-13)
        return res.value
    raise DomainError(f"unknown method {method!r}")


def psi_second_derivative(limits: CriticalLimits, tc: float, params: PhysicalParams) -> float:
    """Left second temperature derivative of the condensation term at ``tc`` (negative)."""
    return params.n0 / (8.0 * tc * tc) * jump_integral(limits, tc, params)


def delta_cv_formula(limits: CriticalLimits, tc: float, params: PhysicalParams) -> float:
    return -params.n0 / (8.0 * tc) * jump_integral(limits, tc, params)


def delta_cv_constant_kernel(fprime_tc: float, tc: float, params: PhysicalParams) -> float:
    """Jump for a constant coupling from ``f'(tc)``, the slope of ``Delta_1^2`` at ``tc``."""
    if not fprime_tc < 0:
        raise DomainError("f'(tc) must be negative: Delta_1 decreases strictly up to tc")
    if not tc > 0:
        raise DomainError("tc must be positive")
    return -params.n0 * fprime_tc * math.tanh(params.hbar_omega_d / (2.0 * tc))


def simplified_fprime(U: float, params: PhysicalParams, offsets: Sequence[float] = DEFAULT_OFFSETS) -> float:
    """``f'(tau)`` for ``f = Delta^2`` of the constant coupling ``U``.

    Fitted from scalar solves at ``tau (1 - o)``, independent of any grid.
    """
    from .simplified import solve_simplified, transition_temperature

    tau = transition_temperature(U, params)
    s = np.array(sorted((tau * o for o in offsets), reverse=True))
    f2 = np.array([solve_simplified(U, tau - si, params) ** 2 for si in s])
    v, _, _ = _fit(s, f2[:, None])
    return -float(v[0])


@dataclass
class JumpReport:
    delta_cv: float
    tc: float
    formula_value: float
    psi_second_derivative: float
    numeric_value: Optional[float] = None
    simplified_value: Optional[float] = None
    fprime_tc: Optional[float] = None
    f_mismatch: Optional[float] = None
    g_mismatch: Optional[float] = None
    v_confirm_change: Optional[float] = None
    consistency_tol: float = CONSISTENCY_TOL
    notes: dict = field(default_factory=dict)

    @property
    def numeric_mismatch(self) -> Optional[float]:
        if self.numeric_value is None:
            return None
        return abs(self.formula_value - self.numeric_value) / abs(self.formula_value)

    @property
    def simplified_mismatch(self) -> Optional[float]:
        if self.simplified_value is None:
            return None
        return abs(self.formula_value - self.simplified_value) / abs(self.formula_value)

    def to_dict(self, fmt: str = "%.12g"):
        doc = {}
        for key, value in asdict(self).items():
            doc[key] = float(fmt % value) if isinstance(value, float) else value
        for key in ("numeric_mismatch", "simplified_mismatch"):
            value = getattr(self, key)
            doc[key] = None if value is None else float(fmt % value)
        return doc

    def to_json(self, path, extra: Optional[dict] = None):
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        with open(path, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def delta_cv(limits: CriticalLimits, tc: float, params: PhysicalParams,
             numeric_value: Optional[float] = None, kernel: Optional[Kernel] = None) -> JumpReport:
    """Jump from the limit function ``v``; with a constant ``kernel`` also the
    ``f'(tc)`` form from the scalar gap equation."""
    formula = delta_cv_formula(limits, tc, params)
    report = JumpReport(formula, float(tc), formula, psi_second_derivative(limits, tc, params),
                        numeric_value=numeric_value, v_confirm_change=limits.v_confirm_change)
    if kernel is not None and kernel.is_constant:
        fprime = simplified_fprime(float(kernel.u1), params)
        report.fprime_tc = fprime
        report.simplified_value = delta_cv_constant_kernel(fprime, tc, params)
    return report


@dataclass(frozen=True, eq=False)
class JumpAnalysis:
    report: JumpReport
    limits: CriticalLimits
    F: np.ndarray
    G: np.ndarray
    surface: GapSurface

    def csv_rows(self):
        for row in zip(self.limits.x_grid.nodes, self.limits.v, self.limits.w, self.F, self.G):
            yield row

    def to_csv(self, path, header_comment: Optional[str] = None, fmt: str = "%.12g"):
        with open(path, "w", newline="\n") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("x,v,w,F,G\n")
            for row in self.csv_rows():
                fh.write(",".join(fmt % v for v in row) + "\n")


def analyze_jump(problem: GapProblem, tc: Optional[float] = None,
                 offsets: Sequence[float] = DEFAULT_OFFSETS, opts: SolverOptions = SolverOptions(),
                 h_rel: float = 1e-4, numeric: bool = True) -> JumpAnalysis:
    """Critical limits, ``F``/``G`` consistency and the jump by every available route."""
    from .thermo import ThermoContext, one_sided_limit

    if tc is None:
        tc = critical_temperature(problem, opts=opts)
    surface = critical_surface(problem, tc, offsets, opts)
    limits = estimate_limits(surface, tc, problem=problem)
    F = F_of_x(problem.kernel, limits)
    G = G_of_x(problem.kernel, limits)
    numeric_value = None
    if numeric:
        ctx = ThermoContext(problem, tc=tc, opts=opts)
        h = h_rel * tc
        lo = one_sided_limit(ctx.omega, tc, h, "tc_minus")
        hi = one_sided_limit(ctx.omega, tc, h, "tc_plus")
        numeric_value = lo.cv - hi.cv
    report = delta_cv(limits, tc, problem.params, numeric_value, problem.kernel)
    report.f_mismatch = relative_mismatch(F, limits.v)
    report.g_mismatch = relative_mismatch(G, limits.w)
    report.notes["offsets"] = [float(o) for o in sorted(offsets, reverse=True)]
    report.notes["n_nodes"] = problem.grid.size
    return JumpAnalysis(report, limits, F, G, surface)
