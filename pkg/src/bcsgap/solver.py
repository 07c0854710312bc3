"""Nystrom discretisation of the gap operator, fixed-point solves and T_c location.

At fixed ``T`` the operator

    (Bu)(x) = int U(x, xi) u(xi) tanh(E/2T) / E dxi,   E = sqrt(xi^2 + u(xi)^2)

is discretised on an :class:`~bcsgap.model.EnergyGrid`.  ``B`` is monotone
in ``u`` and maps the band between the constant-coupling gaps ``Delta_1(T)``
and ``Delta_2(T)`` into itself, so iterations started from ``Delta_2(T)`` pick
out the largest fixed point, the physical one.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from . import backend
from .errors import ConvergenceError, DomainError, InvariantViolation, ParameterError
from .model import EnergyGrid, Kernel, PhysicalParams
from .simplified import SimplifiedSolution

log = logging.getLogger(__name__)

SUPERCONDUCTING = "superconducting"
NORMAL = "normal"
METHODS = ("newton", "picard", "anderson")

# relative widening of the [tau1, tau2] bracket before bisection
BRACKET_PAD = 1e-3
# iterates are kept above this fraction of Delta_1(T)
FLOOR_FRACTION = 0.5


@dataclass(frozen=True)
class SolverOptions:
    """Fixed-point iteration settings.

    ``method`` is ``"newton"`` (default), ``"picard"`` (damped plain iteration,
    step halved whenever the residual grows) or ``"anderson"`` (Anderson
    mixing of depth ``anderson_depth`` on top of the damped iteration).
    Convergence needs both ``|u - Bu|_inf <= tol`` and a last update below
    ``tol``.
    """

    tol: float = 1e-12
    max_iter: int = 200
    damping: float = 1.0
    method: str = "newton"
    anderson_depth: int = 3
    zero_threshold_rel: float = 1e-10

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError("tol must be positive")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be at least 1")
        if not 0 < self.damping <= 1:
            raise ParameterError("damping must lie in (0, 1]")
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.anderson_depth < 1:
            raise ParameterError("anderson_depth must be at least 1")
        if self.method == "picard" and self.max_iter == 200:
            # plain iteration converges linearly; give it a realistic budget
            object.__setattr__(self, "max_iter", 20000)
        if self.method == "anderson" and self.max_iter == 200:
            object.__setattr__(self, "max_iter", 2000)


class GapProblem:
    """A kernel, its physical parameters and a grid, with cached discretisation.

    The kernel matrix and the two constant-coupling envelopes (couplings
    ``u1`` and ``u2``) are built once and shared by every solve.
    """

    def __init__(self, kernel: Kernel, params: PhysicalParams, grid: Optional[EnergyGrid] = None,
                 n_nodes: int = 64, mapping: str = "log"):
        lo, hi = kernel.domain
        pad = 1e-12 * params.hbar_omega_d
        if lo > params.epsilon + pad or hi < params.hbar_omega_d - pad:
            raise ParameterError("kernel domain does not cover [epsilon, hbar_omega_d]")
        self.kernel = kernel
        self.params = params
        self.grid = grid if grid is not None else EnergyGrid.gauss_legendre(params, n_nodes, mapping)
        self.kmat = kernel.matrix(self.grid.nodes)
        self.low = SimplifiedSolution(float(kernel.u1), params)
        self.high = self.low if kernel.u2 == kernel.u1 else SimplifiedSolution(float(kernel.u2), params)

    @property
    def tau1(self) -> float:
        return self.low.tau

    @property
    def tau2(self) -> float:
        return self.high.tau

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def delta1(self, T: float) -> float:
        return self.low.delta(T)

    def delta2(self, T: float) -> float:
        return self.high.delta(T)

    def zero_threshold(self, opts: SolverOptions) -> float:
        return opts.zero_threshold_rel * self.high.delta0

    def refined(self, factor: int = 2) -> "GapProblem":
        return GapProblem(self.kernel, self.params, self.grid.refined(factor))

    def linearised(self, T: float) -> np.ndarray:
        """Matrix of the operator linearised at ``u = 0``."""
        _, jac, _ = backend.nystrom_system(self.kmat, self.grid.weights, self.nodes,
                                           np.zeros(self.grid.size), float(T))
        return jac


@dataclass(frozen=True, eq=False)
class GapSolution:
    T: float
    grid: EnergyGrid
    values: np.ndarray
    iterations: int
    residual: float
    classification: str
    method: str
    step: float
    delta1: float
    delta2: float
    history: List[float] = field(default_factory=list, repr=False)
    notes: str = ""

    @property
    def is_normal(self) -> bool:
        return self.classification == NORMAL

    @property
    def max_value(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0

    @property
    def min_value(self) -> float:
        return float(np.min(self.values)) if self.values.size else 0.0


def _check_temperature(T):
    if not (T >= 0 and math.isfinite(T)):
        raise DomainError(f"temperature must be finite and non-negative, got T={T}")


def apply_B(problem: GapProblem, T: float, u) -> np.ndarray:
    """Nystrom image of the node values ``u`` under the gap operator."""
    _check_temperature(T)
    u = np.ascontiguousarray(u, dtype=float)
    if u.shape != (problem.grid.size,):
        raise ParameterError(f"expected {problem.grid.size} node values, got shape {u.shape}")
    if np.any(u < 0):
        raise DomainError("gap values must be non-negative")
    return backend.nystrom_apply(problem.kmat, problem.grid.weights, problem.nodes, u, float(T))


def lipschitz_ratio(problem: GapProblem, T: float, u, v) -> float:
    """``|Bu - Bv|_inf / |u - v|_inf`` for two node vectors."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    denom = float(np.max(np.abs(u - v)))
    if denom == 0.0:
        raise ParameterError("u and v coincide; the ratio is undefined")
    return float(np.max(np.abs(apply_B(problem, T, u) - apply_B(problem, T, v)))) / denom


def lipschitz_bound(problem: GapProblem) -> float:
    """Analytic bound ``3 u2 log(hbar_omega_d / epsilon)`` on the ratio."""
    return 3.0 * float(problem.kernel.u2) * problem.params.log_ratio


def _residual(problem, T, u):
    return u - backend.nystrom_apply(problem.kmat, problem.grid.weights, problem.nodes, u, T)


def _newton(problem, T, u, opts, floor=0.0):
    n = u.size
    eye = np.eye(n)
    history = []
    step = math.inf
    for it in range(1, opts.max_iter + 1):
        Bu, jac, _ = backend.nystrom_system(problem.kmat, problem.grid.weights, problem.nodes, u, T)
        r = u - Bu
        rn = float(np.max(np.abs(r)))
        history.append(rn)
        if rn <= opts.tol and step <= opts.tol:
            return u, it - 1, rn, step, history
        try:
            delta = np.linalg.solve(eye - jac, -r)
        except np.linalg.LinAlgError:
            delta = -r
        if not np.all(np.isfinite(delta)):
            delta = -r
        lam = 1.0
        if floor > 0.0 and np.any(u + delta < floor):
            # Newton is heading for the trivial solution; a plain step from a
            # subsolution is monotone and moves up towards the positive one
            trial = np.maximum(Bu, floor)
        else:
            while True:
                trial = np.maximum(u + lam * delta, floor)
                tn = float(np.max(np.abs(_residual(problem, T, trial))))
                if tn <= (1.0 - 1e-4 * lam) * rn or lam < 2.0 ** -10 or rn <= opts.tol:
                    break
                lam *= 0.5
        step = float(np.max(np.abs(trial - u)))
        u = trial
    raise ConvergenceError(f"Newton did not converge at T={T} in {opts.max_iter} iterations",
                           history=history)


def _picard(problem, T, u, opts, depth=0, floor=0.0):
    """Damped fixed-point iteration, optionally with Anderson mixing."""
    history = []
    lam = opts.damping
    u_hist, f_hist = [], []
    step = math.inf
    prev_rn = math.inf
    for it in range(1, opts.max_iter + 1):
        f = backend.nystrom_apply(problem.kmat, problem.grid.weights, problem.nodes, u, T) - u
        rn = float(np.max(np.abs(f)))
        history.append(rn)
        if rn <= opts.tol and step <= opts.tol:
            return u, it - 1, rn, step, history
        if rn > prev_rn and lam > 1e-3:
            lam *= 0.5
            u_hist.clear()
            f_hist.clear()
        prev_rn = rn
        new = u + lam * f
        if depth:
            u_hist.append(u)
            f_hist.append(f)
            if len(f_hist) > depth + 1:
                u_hist.pop(0)
                f_hist.pop(0)
            if len(f_hist) > 1:
                dU = np.diff(np.array(u_hist), axis=0).T
                dF = np.diff(np.array(f_hist), axis=0).T
                gamma, *_ = np.linalg.lstsq(dF, f, rcond=None)
                new = u - dU @ gamma + lam * (f - dF @ gamma)
        new = np.maximum(new, floor)
        step = float(np.max(np.abs(new - u)))
        u = new
    raise ConvergenceError(f"{opts.method} iteration did not converge at T={T} in {opts.max_iter} iterations",
                           history=history)


def _iterate(problem, T, u0, opts, floor=0.0):
    if opts.method == "newton":
        return _newton(problem, T, u0, opts, floor)
    depth = opts.anderson_depth if opts.method == "anderson" else 0
    return _picard(problem, T, u0, opts, depth, floor)


def solve_fixed_point(problem: GapProblem, T: float, opts: SolverOptions = SolverOptions(),
                      initial=None) -> GapSolution:
    """Positive fixed point of the discretised gap operator at temperature ``T``.

    The iteration starts from ``u = Delta_2(T)`` unless ``initial`` is given.
    Iterates are projected onto ``u >= FLOOR_FRACTION * Delta_1(T)``.  Any
    such constant is a subsolution lying below the positive solution, and
    without the floor a full Newton step from a low start can overshoot onto
    the trivial solution.  At and above
    ``tau2`` the zero solution is returned without iterating.
    """
    _check_temperature(T)
    T = float(T)
    d1, d2 = problem.delta1(T), problem.delta2(T)
    n = problem.grid.size
    if d2 == 0.0:
        return GapSolution(T, problem.grid, np.zeros(n), 0, 0.0, NORMAL, opts.method, 0.0, d1, d2,
                           notes="T >= tau2")
    floor = FLOOR_FRACTION * d1
    u0 = np.full(n, d2) if initial is None else np.maximum(np.asarray(initial, float), floor)
    u, iterations, rn, step, history = _iterate(problem, T, u0.copy(), opts, floor)
    threshold = problem.zero_threshold(opts)
    notes = ""
    if float(np.max(u)) < threshold and initial is None:
        # the zero solution is repelling when the linearisation has spectral
        # radius above one; landing there means the positive branch was missed
        radius = float(np.max(np.abs(np.linalg.eigvals(problem.linearised(T)))))
        if radius > 1.0 + 1e-9 and opts.method == "newton":
            log.info("Newton reached u=0 at T=%g with spectral radius %.6g; retrying with Anderson", T, radius)
            fallback = replace(opts, method="anderson", max_iter=20000)
            u, extra, rn, step, more = _iterate(problem, T, u0.copy(), fallback, floor)
            iterations += extra
            history += more
            notes = "newton fell back to anderson"
        elif radius > 1.0 + 1e-9:
            notes = f"zero solution is unstable here (spectral radius {radius:.12g}); positive branch missed"
            log.warning("T=%g: %s", T, notes)
    cls = NORMAL if float(np.max(u)) < threshold else SUPERCONDUCTING
    if cls == NORMAL:
        u = np.zeros(n)
    return GapSolution(T, problem.grid, u, iterations, rn, cls, opts.method, step, d1, d2,
                       history, notes)


def temperature_derivative(problem: GapProblem, sol: GapSolution) -> np.ndarray:
    """``du/dT`` at the nodes by implicit differentiation of ``u = B(u, T)``."""
    if sol.is_normal or sol.T == 0.0:
        return np.zeros(problem.grid.size)
    _, jac, dBdT = backend.nystrom_system(problem.kmat, problem.grid.weights, problem.nodes,
                                          sol.values, sol.T)
    return np.linalg.solve(np.eye(problem.grid.size) - jac, dBdT)


def check_zero_propagation(sol: GapSolution, zero_threshold: float) -> None:
    """A slice is either zero everywhere or positive everywhere."""
    lo, hi = sol.min_value, sol.max_value
    if lo < zero_threshold and hi > 10.0 * zero_threshold:
        raise InvariantViolation(
            f"mixed zero/positive gap profile at T={sol.T}: min={lo:.3g}, max={hi:.3g}")


def sandwich_violation(sol: GapSolution) -> float:
    """Largest excursion of the slice outside ``[Delta_1(T), Delta_2(T)]`` (0 if inside)."""
    below = sol.delta1 - sol.min_value
    above = sol.max_value - sol.delta2
    return max(0.0, below, above)


@dataclass(frozen=True)
class ProbeResult:
    agree: bool
    gap: float
    upper: GapSolution
    lower: GapSolution


def uniqueness_probe(problem: GapProblem, T: float, opts: SolverOptions = SolverOptions(),
                     floor_rel: float = 1e-3) -> ProbeResult:
    """Solve from the upper and the lower envelope and compare the results.

    The lower start is ``max(Delta_1(T), floor_rel * Delta_2(T))`` so it stays
    positive where ``Delta_1`` has already closed.
    """
    if T >= problem.tau2:
        raise DomainError("uniqueness probe needs T < tau2")
    upper = solve_fixed_point(problem, T, opts)
    start = max(problem.delta1(T), floor_rel * problem.delta2(T))
    lower = solve_fixed_point(problem, T, opts, initial=np.full(problem.grid.size, start))
    gap = float(np.max(np.abs(upper.values - lower.values)))
    return ProbeResult(gap <= 10.0 * opts.tol, gap, upper, lower)


@dataclass(frozen=True)
class TcSearch:
    tc: float
    bracket: tuple
    tau1: float
    tau2: float
    history: list = field(repr=False)


def locate_tc(problem: GapProblem, tol: Optional[float] = None,
              opts: SolverOptions = SolverOptions()) -> TcSearch:
    """Bisection for the lowest temperature at which the solve classifies normal.

    The bracket is ``[tau1, tau2]`` widened by ``BRACKET_PAD`` on each side so
    the endpoint classifications are tested rather than assumed.
    """
    tau1, tau2 = problem.tau1, problem.tau2
    if tol is None:
        tol = 1e-12 * tau2
    lo, hi = tau1 * (1.0 - BRACKET_PAD), tau2 * (1.0 + BRACKET_PAD)
    history = []

    def normal(T):
        sol = solve_fixed_point(problem, T, opts)
        history.append((T, sol.classification, sol.max_value))
        return sol.is_normal

    if normal(lo) or not normal(hi):
        raise InvariantViolation(
            f"critical-temperature predicate not monotone on [{lo:.12g}, {hi:.12g}]: {history}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if normal(mid):
            hi = mid
        else:
            lo = mid
    return TcSearch(0.5 * (lo + hi), (lo, hi), tau1, tau2, history)


def critical_temperature(problem: GapProblem, tol: Optional[float] = None,
                         opts: SolverOptions = SolverOptions()) -> float:
    return locate_tc(problem, tol, opts).tc


@dataclass(frozen=True, eq=False)
class GapSurface:
    T_grid: np.ndarray
    x_grid: EnergyGrid
    values: np.ndarray
    tc: float
    solutions: List[GapSolution] = field(repr=False)
    metadata: dict = field(default_factory=dict)

    def closeness(self) -> float:
        """``sup_T |Delta_2(T) - Delta_1(T)|`` over the sweep temperatures."""
        return max((s.delta2 - s.delta1 for s in self.solutions), default=0.0)

    def slice_at(self, T: float) -> GapSolution:
        idx = int(np.argmin(np.abs(self.T_grid - T)))
        return self.solutions[idx]

    def csv_rows(self):
        for i, T in enumerate(self.T_grid):
            for x, u in zip(self.x_grid.nodes, self.values[i]):
                yield (T, x, u)

    def to_csv(self, path, header_comment: Optional[str] = None, fmt: str = "%.12g"):
        with open(path, "w", newline="\n") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("T,x,u\n")
            for row in self.csv_rows():
                fh.write(",".join(fmt % v for v in row) + "\n")

    def to_dict(self, fmt: str = "%.12g"):
        num = lambda v: float(fmt % v)
        return {
            "T_grid": [num(t) for t in self.T_grid],
            "x_grid": [num(x) for x in self.x_grid.nodes],
            "weights": [num(w) for w in self.x_grid.weights],
            "values": [[num(v) for v in row] for row in self.values],
            "tc": num(self.tc),
            "closeness": num(self.closeness()),
            "slices": [
                {"T": num(s.T), "classification": s.classification, "iterations": s.iterations,
                 "residual": num(s.residual), "delta1": num(s.delta1), "delta2": num(s.delta2)}
                for s in self.solutions],
            "metadata": self.metadata,
        }

    def to_json(self, path, extra: Optional[dict] = None):
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        with open(path, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def sweep_temperature(problem: GapProblem, T_grid: Sequence[float],
                      opts: SolverOptions = SolverOptions(), tc: Optional[float] = None,
                      warm_start: bool = True, threads: int = 1) -> GapSurface:
    """Solve every temperature in ``T_grid`` and assemble a :class:`GapSurface`.

    With ``warm_start`` each slice starts from the previous solution clamped
    into ``[Delta_1(T), Delta_2(T)]``; otherwise slices are independent and
    may run on ``threads`` workers.  Slices at or above ``tc`` are zeroed.
    """
    T_grid = np.asarray(T_grid, float)
    if T_grid.ndim != 1 or T_grid.size == 0:
        raise ParameterError("temperature grid must be a non-empty 1-d sequence")
    if np.any(np.diff(T_grid) <= 0) or T_grid[0] < 0:
        raise ParameterError("temperature grid must be increasing and non-negative")
    if tc is None:
        tc = critical_temperature(problem, opts=opts)
    threshold = problem.zero_threshold(opts)

    def solve_one(T, initial=None):
        try:
            return solve_fixed_point(problem, T, opts, initial=initial)
        except ConvergenceError as exc:
            raise ConvergenceError(f"slice T={T:.12g}: {exc}", history=exc.history) from exc

    solutions = []
    if warm_start:
        prev = None
        for T in T_grid:
            initial = None
            if prev is not None and not prev.is_normal:
                d1, d2 = problem.delta1(T), problem.delta2(T)
                initial = np.clip(prev.values, d1, d2)
                if d2 == 0.0:
                    initial = None
            sol = solve_one(T, initial)
            solutions.append(sol)
            prev = sol
    else:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            solutions = list(pool.map(solve_one, T_grid))

    values = np.zeros((T_grid.size, problem.grid.size))
    final = []
    for i, sol in enumerate(solutions):
        if sol.T >= tc:
            sol = replace(sol, values=np.zeros(problem.grid.size), classification=NORMAL)
        check_zero_propagation(sol, threshold)
        values[i] = sol.values
        final.append(sol)
    meta = {"method": opts.method, "tol": opts.tol, "n_nodes": problem.grid.size,
            "mapping": problem.grid.mapping, "backend": backend.NAME,
            "tau1": problem.tau1, "tau2": problem.tau2}
    return GapSurface(T_grid, problem.grid, values, float(tc), final, meta)
