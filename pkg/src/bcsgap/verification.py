"""Acceptance checks shared by the ``verify`` subcommand and the test suite.

Each check builds its own problems on fixed reference parameters, measures
the relevant quantities and compares them with fixed limits.  The returned
:class:`CheckResult` carries the measured numbers so callers can report or
re-assert them.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import simplified
from .critical import DEFAULT_OFFSETS, analyze_jump, g_function
from .errors import BCSGapError, InvariantViolation
from .model import (ConstantDOS, ConstantKernel, PhysicalParams, SeparableKernel, TabulatedKernel)
from .solver import (GapProblem, SolverOptions, check_zero_propagation, critical_temperature,
                     lipschitz_bound, lipschitz_ratio, locate_tc, solve_fixed_point,
                     sweep_temperature, uniqueness_probe)
from .thermo import ThermoContext, one_sided_limit

REFERENCE = PhysicalParams(epsilon=0.01, hbar_omega_d=1.0, mu=10.0, n0=1.0)
WEAK = PhysicalParams(epsilon=1e-6, hbar_omega_d=1.0, mu=10.0, n0=1.0)
WEAK_COUPLING = 0.25
SEED = 20240611

# literature constants
GAP_RATIO = math.pi / math.exp(0.5772156649015329)
SLOPE_RATIO = 8.0 * math.pi ** 2 / (7.0 * 1.2020569031595942)


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    metrics: Dict[str, float] = field(default_factory=dict)
    detail: str = ""
    elapsed: float = 0.0
    budget: Optional[float] = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        timing = f"{self.elapsed:.2f}s" + (f" (limit {self.budget:g}s)" if self.budget else "")
        return f"[{status}] {self.key} {self.title}: {self.detail} [{timing}]"


def _separable(params):
    return SeparableKernel(0.4, (0.1,), params.domain)


def reference_kernels(params: PhysicalParams = REFERENCE) -> Dict[str, object]:
    """Constant, separable and tabulated kernels on ``params``' domain."""
    sep = _separable(params)
    return {
        "constant": ConstantKernel(0.4, params.domain),
        "separable": sep,
        "tabulated": TabulatedKernel.sample(sep._evaluate, params.domain, 33),
    }


def extra_kernels(params: PhysicalParams = REFERENCE) -> Dict[str, object]:
    """Kernels with a wider coupling range, one of them not symmetric."""
    return {
        "separable_quadratic": SeparableKernel(0.3, (0.1, 0.1), params.domain),
        "tabulated_asymmetric": TabulatedKernel.sample(
            lambda x, xi: 0.35 + 0.1 * x + 0.05 * xi * xi, params.domain, 33),
    }


def _problems(kernels, params=REFERENCE):
    return {name: GapProblem(k, params) for name, k in kernels.items()}


def _timed(fn):
    def run(*args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        result.elapsed = time.perf_counter() - start
        if result.budget is not None and result.elapsed > result.budget:
            result.passed = False
            result.detail += f"; exceeded time budget {result.budget:g}s"
        return result

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


@_timed
def check_closed_form() -> CheckResult:
    """Zero-temperature gap formula and its consistency with the scalar equation."""
    d0 = simplified.delta0_closed_form(0.5, REFERENCE)
    rhs = simplified.simplified_rhs(0.5, 0.0, d0, REFERENCE)
    err_d, err_r = abs(d0 - 0.265159), abs(rhs - 1.0)
    ok = err_d <= 1e-6 and err_r <= 1e-8
    return CheckResult("C1", "closed-form zero-temperature gap", ok,
                       {"delta0": d0, "rhs": rhs, "delta0_error": err_d, "rhs_error": err_r},
                       f"delta0={d0:.9f} (|err|={err_d:.2e}), rhs-1={rhs - 1:.2e}", budget=1.0)


@_timed
def check_sandwich(n_temps: int = 20, tol: float = 1e-7) -> CheckResult:
    """Every solved node lies between the two constant-coupling gaps."""
    worst = {}
    for name, pr in _problems(reference_kernels()).items():
        w = 0.0
        for T in np.linspace(0.0, pr.tau2, n_temps):
            sol = solve_fixed_point(pr, T)
            w = max(w, float(np.max(pr.delta1(T) - sol.values)), float(np.max(sol.values - pr.delta2(T))))
        worst[name] = w
    ok = all(v <= tol for v in worst.values())
    detail = ", ".join(f"{k}: max excursion {v:.2e}" for k, v in worst.items())
    return CheckResult("C2", "sandwich between Delta_1 and Delta_2", ok, worst, detail, budget=30.0)


@_timed
def check_constant_collapse(n_temps: int = 10) -> CheckResult:
    """Constant coupling: the gap equals Delta_1 and T_c equals tau_1."""
    kernel = ConstantKernel(0.5, REFERENCE.domain)
    pr = GapProblem(kernel, REFERENCE)
    dev = 0.0
    for T in np.linspace(0.0, pr.tau1 * (1 - 1e-3), n_temps):
        sol = solve_fixed_point(pr, T)
        dev = max(dev, float(np.max(np.abs(sol.values - pr.delta1(T)))))
    tc = critical_temperature(pr)
    rel = abs(tc - pr.tau1) / pr.tau1
    ok = dev <= 1e-8 and rel <= 1e-8
    return CheckResult("C3", "constant-kernel collapse", ok,
                       {"sup_deviation": dev, "tc_rel_error": rel, "tc": tc, "tau1": pr.tau1},
                       f"sup|u-Delta_1|={dev:.2e}, |Tc-tau1|/tau1={rel:.2e}", budget=10.0)


@_timed
def check_tc_bracket() -> CheckResult:
    """T_c lies in [tau_1, tau_2] for every kernel."""
    kernels = {**reference_kernels(), **extra_kernels()}
    kernels["weak_constant"] = ConstantKernel(WEAK_COUPLING, WEAK.domain)
    metrics, ok, parts = {}, True, []
    for name, k in kernels.items():
        params = WEAK if name == "weak_constant" else REFERENCE
        pr = GapProblem(k, params)
        res = locate_tc(pr)
        width = res.bracket[1] - res.bracket[0]
        inside = pr.tau1 - width <= res.tc <= pr.tau2 + width
        ok &= inside
        metrics.update({f"{name}_tc": res.tc, f"{name}_tau1": pr.tau1, f"{name}_tau2": pr.tau2,
                        f"{name}_width": width})
        parts.append(f"{name}: Tc={res.tc:.10g} in [{pr.tau1:.10g}, {pr.tau2:.10g}]")
    return CheckResult("C4", "T_c between tau_1 and tau_2", ok, metrics, "; ".join(parts))


def _admissible_pair(rng, pr, n):
    T = rng.uniform(0.0, pr.tau2)
    lo, hi = pr.delta1(T), pr.delta2(T)
    if hi - lo <= 1e-12 * max(hi, 1.0):
        # the band is a single function; draw from [0, Delta_2(0)] instead
        lo, hi = 0.0, pr.high.delta0
    u = rng.uniform(lo, hi, n)
    v = rng.uniform(lo, hi, n)
    return T, u, v


@_timed
def check_lipschitz(draws: int = 100) -> CheckResult:
    """Empirical Lipschitz ratio of the gap operator stays below 3 u2 log(hw/eps)."""
    rng = np.random.default_rng(SEED)
    kernels = {**reference_kernels(), **extra_kernels()}
    kernels["u2_half"] = ConstantKernel(0.5, REFERENCE.domain)
    metrics, ok, parts = {}, True, []
    for name, pr in _problems(kernels).items():
        bound = lipschitz_bound(pr)
        worst = max(lipschitz_ratio(pr, *_admissible_pair(rng, pr, pr.grid.size)) for _ in range(draws))
        ok &= worst <= bound
        metrics[name] = worst
        metrics[name + "_bound"] = bound
        parts.append(f"{name}: {worst:.4f} <= {bound:.4f}")
    return CheckResult("C5", "Lipschitz bound", ok, metrics, "; ".join(parts))


@_timed
def check_weak_coupling() -> CheckResult:
    """Universal ratios of the constant kernel at weak coupling."""
    kernel = ConstantKernel(WEAK_COUPLING, WEAK.domain)
    pr = GapProblem(kernel, WEAK)
    ratio = simplified.delta0_closed_form(WEAK_COUPLING, WEAK) / pr.tau1
    analysis = analyze_jump(pr, numeric=False)
    tc = analysis.report.tc
    slope = float(np.mean(analysis.limits.v)) / tc
    jump = analysis.report.formula_value / (WEAK.n0 * tc)
    e1 = abs(ratio - 1.764) / 1.764
    e2 = abs(slope - 9.384) / 9.384
    e3 = abs(jump - 9.384) / 9.384
    ok = e1 <= 0.01 and e2 <= 0.01 and e3 <= 0.02
    return CheckResult("C6", "weak-coupling universal constants", ok,
                       {"gap_ratio": ratio, "slope_ratio": slope, "jump_ratio": jump,
                        "gap_ratio_literature": GAP_RATIO, "slope_ratio_literature": SLOPE_RATIO},
                       f"Delta/tau={ratio:.5f}, v/Tc={slope:.4f}, dCv/(N0 Tc)={jump:.4f}", budget=60.0)


def jump_cases():
    cases = {name: (k, REFERENCE) for name, k in reference_kernels().items()}
    cases["weak_constant"] = (ConstantKernel(WEAK_COUPLING, WEAK.domain), WEAK)
    return cases


@_timed
def check_jump_consistency() -> CheckResult:
    """Jump formula against the numerical specific-heat jump and the f'(T_c) form."""
    metrics, ok, parts = {}, True, []
    for name, (k, params) in jump_cases().items():
        rep = analyze_jump(GapProblem(k, params)).report
        good = rep.delta_cv > 0 and rep.numeric_mismatch <= 0.03
        metrics[name + "_numeric_mismatch"] = rep.numeric_mismatch
        metrics[name + "_delta_cv"] = rep.delta_cv
        parts.append(f"{name}: dCv={rep.delta_cv:.6g}, numeric mismatch {rep.numeric_mismatch:.2e}")
        if name == "weak_constant":
            good &= rep.simplified_mismatch <= 0.02
            metrics[name + "_simplified_mismatch"] = rep.simplified_mismatch
            parts[-1] += f", f'(Tc) form mismatch {rep.simplified_mismatch:.2e}"
        ok &= good
    return CheckResult("C7", "specific-heat jump consistency", ok, metrics, "; ".join(parts))


@_timed
def check_smoothness() -> CheckResult:
    """Omega and S continuous at T_c; Psi(T)/(T_c - T) tends to 0."""
    metrics, ok, parts = {}, True, []
    for name in ("constant", "separable"):
        pr = GapProblem(reference_kernels()[name], REFERENCE)
        ctx = ThermoContext(pr, ConstantDOS(REFERENCE.n0))
        tc = ctx.tc
        h = 1e-4 * tc
        lo = one_sided_limit(ctx.omega, tc, h, "tc_minus")
        hi = one_sided_limit(ctx.omega, tc, h, "tc_plus")
        d_omega = abs(lo.omega - hi.omega) / abs(ctx.omega(tc))
        d_s = abs(lo.entropy - hi.entropy) / abs(hi.entropy)
        q = [abs(ctx.psi(tc * (1 - o)) / (tc * o)) for o in (1e-2, 1e-3, 1e-4)]
        decreasing = q[0] > q[1] > q[2] and q[2] <= 0.05 * q[0]
        good = d_omega <= 1e-8 and d_s <= 1e-5 and decreasing
        ok &= good
        metrics.update({f"{name}_omega_gap": d_omega, f"{name}_entropy_gap": d_s,
                        **{f"{name}_psi_quotient_{i}": v for i, v in enumerate(q)}})
        parts.append(f"{name}: dOmega={d_omega:.1e}, dS={d_s:.1e}, Psi/(Tc-T)="
                     + "/".join(f"{v:.2e}" for v in q))
    return CheckResult("C8", "smoothness at T_c", ok, metrics, "; ".join(parts))


@_timed
def check_g_function() -> CheckResult:
    """Values, sign and branch continuity of g."""
    g0 = g_function(0.0)
    g1 = g_function(1.0)
    sample = g_function(np.logspace(-6, 3, 400))
    eta = 1e-2
    q = math.exp(-2 * eta)
    direct = (4 * q / (1 + q) ** 2 - math.tanh(eta) / eta) / eta ** 2
    taylor = g_function(np.nextafter(eta, 0.0))
    ok = (g0 == -2.0 / 3.0 and abs(g1 + 0.341620) <= 1e-6 and bool(np.all(sample < 0))
          and abs(direct - taylor) <= 1e-10)
    return CheckResult("C9", "g function", ok,
                       {"g0": g0, "g1": g1, "branch_gap": abs(direct - taylor), "max_sample": float(sample.max())},
                       f"g(0)={g0!r}, g(1)={g1:.7f}, max g on sample={sample.max():.2e}, "
                       f"branch gap={abs(direct - taylor):.1e}")


@_timed
def check_zero_and_uniqueness(n_temps: int = 25) -> CheckResult:
    """Sweeps never mix zero and positive nodes; upper and lower starts agree."""
    kernels = {**reference_kernels(), **extra_kernels()}
    opts = SolverOptions()
    metrics, ok, parts = {}, True, []
    for name, pr in _problems(kernels).items():
        try:
            surf = sweep_temperature(pr, np.linspace(0.0, pr.tau2, n_temps), opts)
            for sol in surf.solutions:
                check_zero_propagation(sol, pr.zero_threshold(opts))
            mixed = False
        except InvariantViolation:
            mixed = True
        gaps = [uniqueness_probe(pr, f * pr.tau1, opts).gap for f in (0.0, 0.3, 0.6, 0.9)]
        good = not mixed and max(gaps) <= 10 * opts.tol
        ok &= good
        metrics[name + "_probe_gap"] = max(gaps)
        metrics[name + "_mixed"] = float(mixed)
        parts.append(f"{name}: mixed={mixed}, probe gap {max(gaps):.1e}")
    return CheckResult("C10", "zero propagation and uniqueness", ok, metrics, "; ".join(parts))


@_timed
def check_fg_consistency() -> CheckResult:
    """F reproduces v and G reproduces w; refinement does not make either worse."""
    metrics, ok, parts = {}, True, []
    for name in ("separable", "tabulated"):
        k = reference_kernels()[name]
        pr = GapProblem(k, REFERENCE)
        tc = critical_temperature(pr)
        base = analyze_jump(pr, tc=tc, numeric=False).report
        finer = [analyze_jump(pr, tc=tc, offsets=[o * s for o in DEFAULT_OFFSETS], numeric=False).report
                 for s in (0.5, 0.25)]
        f_seq = [base.f_mismatch] + [r.f_mismatch for r in finer]
        g_seq = [base.g_mismatch] + [r.g_mismatch for r in finer]
        pr2 = pr.refined(2)
        grid = analyze_jump(pr2, tc=critical_temperature(pr2), numeric=False).report
        offsets_down = all(a > b for a, b in zip(f_seq, f_seq[1:])) and all(a > b for a, b in zip(g_seq, g_seq[1:]))
        grid_ok = (grid.f_mismatch <= base.f_mismatch * 1.01 + 1e-14
                   and grid.g_mismatch <= base.g_mismatch * 1.01 + 1e-14)
        good = base.f_mismatch <= 0.05 and base.g_mismatch <= 0.10 and offsets_down and grid_ok
        ok &= good
        metrics.update({f"{name}_F": base.f_mismatch, f"{name}_G": base.g_mismatch,
                        f"{name}_F_grid2": grid.f_mismatch, f"{name}_G_grid2": grid.g_mismatch})
        for i, (f, g) in enumerate(zip(f_seq[1:], g_seq[1:]), 1):
            metrics.update({f"{name}_F_offsets{i}": f, f"{name}_G_offsets{i}": g})
        parts.append(f"{name}: |F-v|/|v|=" + "/".join(f"{v:.1e}" for v in f_seq)
                     + ", |G-w|/|w|=" + "/".join(f"{v:.1e}" for v in g_seq)
                     + f", 2x grid {grid.f_mismatch:.1e}/{grid.g_mismatch:.1e}")
    return CheckResult("C11", "F/G self-consistency", ok, metrics, "; ".join(parts))


ACCEPTANCE: Dict[str, Callable[[], CheckResult]] = {
    "C1": check_closed_form, "C2": check_sandwich, "C3": check_constant_collapse,
    "C4": check_tc_bracket, "C5": check_lipschitz, "C6": check_weak_coupling,
    "C7": check_jump_consistency, "C8": check_smoothness, "C9": check_g_function,
    "C10": check_zero_and_uniqueness, "C11": check_fg_consistency,
}


def config_invariants(cfg) -> List[CheckResult]:
    """Invariants evaluated on the kernel and parameters of a run configuration."""
    results = []
    start = time.perf_counter()
    pr = cfg.problem()
    opts = cfg.solver

    def record(key, title, ok, detail, metrics=None):
        results.append(CheckResult(key, title, bool(ok), metrics or {}, detail,
                                   time.perf_counter() - start))

    from .model import validate_kernel

    rep = validate_kernel(cfg.kernel, pr.grid)
    record("K1", "kernel bounds", rep.passed, f"U in [{rep.minimum:.6g}, {rep.maximum:.6g}], {rep.message}")
    res = locate_tc(pr, cfg.bisection_rel * pr.tau2, opts)
    width = res.bracket[1] - res.bracket[0]
    record("K2", "T_c bracket", pr.tau1 - width <= res.tc <= pr.tau2 + width,
           f"{pr.tau1:.10g} <= {res.tc:.10g} <= {pr.tau2:.10g}")
    temps = np.linspace(0.0, pr.tau2, cfg.n_T)
    try:
        surf = sweep_temperature(pr, temps, opts, tc=res.tc)
        worst = max(max(s.delta1 - s.min_value, s.max_value - s.delta2) for s in surf.solutions)
        worst_res = max(s.residual for s in surf.solutions)
        record("K3", "sandwich", worst <= 1e-7, f"max excursion {worst:.2e}")
        record("K4", "fixed-point residual", worst_res <= opts.tol, f"max residual {worst_res:.2e}")
        record("K5", "zero propagation", True, "no mixed profiles")
    except InvariantViolation as exc:
        record("K5", "zero propagation", False, str(exc))
    rng = np.random.default_rng(SEED)
    bound = lipschitz_bound(pr)
    worst = max(lipschitz_ratio(pr, *_admissible_pair(rng, pr, pr.grid.size)) for _ in range(100))
    record("K6", "Lipschitz bound", worst <= bound, f"{worst:.4f} <= {bound:.4f}")
    gaps = [uniqueness_probe(pr, f * pr.tau1, opts).gap for f in (0.0, 0.5, 0.9)]
    record("K7", "uniqueness probe", max(gaps) <= 10 * opts.tol, f"max gap {max(gaps):.1e}")
    analysis = analyze_jump(pr, tc=res.tc, offsets=cfg.offsets, opts=opts, h_rel=cfg.h_rel)
    r = analysis.report
    record("K8", "positive jump", r.delta_cv > 0, f"dCv={r.delta_cv:.6g}")
    record("K9", "jump cross-check", r.numeric_mismatch <= 0.03, f"numeric mismatch {r.numeric_mismatch:.2e}")
    record("K10", "F/G consistency", r.f_mismatch <= cfg.consistency and r.g_mismatch <= 2 * cfg.consistency,
           f"F {r.f_mismatch:.1e}, G {r.g_mismatch:.1e}")
    return results


def run_acceptance(selected: Optional[List[str]] = None) -> List[CheckResult]:
    out = []
    for key, check in ACCEPTANCE.items():
        if selected is not None and key not in selected:
            continue
        try:
            result = check()
        except BCSGapError as exc:
            result = CheckResult(key, check.__doc__ or check.__name__, False, {}, f"error: {exc}")
        out.append(result)
    return out
