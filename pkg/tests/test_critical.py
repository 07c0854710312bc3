import json
import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad

from bcsgap.critical import (CriticalLimits, F_of_x, G_of_x, analyze_jump, critical_surface,
                             delta_cv, delta_cv_constant_kernel, estimate_limits, g_function,
                             jump_integral, relative_mismatch)
from bcsgap.errors import DomainError, InvariantViolation, ParameterError
from bcsgap.model import ConstantKernel, EnergyGrid
from bcsgap.solver import GapProblem, GapSurface, critical_temperature

from conftest import REF, WEAK

mp.mp.dps = 30


def _limits(grid, v, w, tc):
    v = np.broadcast_to(np.asarray(v, float), (grid.size,)).copy()
    w = np.broadcast_to(np.asarray(w, float), (grid.size,)).copy()
    z = np.zeros(grid.size)
    return CriticalLimits(grid, v, w, tc, np.array([1e-3]), z, v, w)


def test_g_special_values():
    assert g_function(0.0) == pytest.approx(-2.0 / 3.0, abs=1e-15)
    assert g_function(1.0) == pytest.approx(float((mp.sech(1) ** 2 - mp.tanh(1)) / 1), rel=1e-13)
    assert -1e-4 < g_function(50.0) < 0
    assert g_function(np.zeros((2, 2))).shape == (2, 2)


def test_g_domain():
    with pytest.raises(DomainError):
        g_function(-1e-3)
    with pytest.raises(DomainError):
        g_function(np.array([0.1, np.nan]))


def test_g_integral():
    # int_0^inf g = -7 zeta(3) / pi^2
    val, _ = quad(g_function, 0, np.inf, epsabs=1e-13, limit=200)
    assert val == pytest.approx(-7 * 1.2020569031595942 / math.pi ** 2, rel=1e-9)
    assert val == pytest.approx(-0.852557, abs=1e-6)


def _synthetic_surface(grid, c, d, tc, offsets):
    T = np.array([tc * (1 - o) for o in offsets])
    s = tc - T
    vals = np.sqrt(np.outer(c * s + d * s ** 2, np.ones(grid.size)))
    return GapSurface(T, grid, vals, tc, [], {})


def test_fit_recovers_quadratic():
    grid = EnergyGrid.gauss_legendre(REF, 16)
    tc = 0.1
    surf = _synthetic_surface(grid, 9.0, 40.0, tc, [1e-2, 5e-3, 2.5e-3, 1.25e-3])
    lim = estimate_limits(surf, tc)
    np.testing.assert_allclose(lim.v, 9.0, rtol=1e-10)
    np.testing.assert_allclose(lim.w, 80.0, rtol=1e-6)
    assert lim.residuals.max() < 1e-12
    assert lim.v_confirm_change < 1e-10


def test_fit_needs_three_slices():
    grid = EnergyGrid.gauss_legendre(REF, 16)
    surf = _synthetic_surface(grid, 1.0, 0.0, 0.1, [1e-2, 5e-3])
    with pytest.raises(ParameterError):
        estimate_limits(surf, 0.1)


def test_fit_rejects_normal_slices():
    grid = EnergyGrid.gauss_legendre(REF, 16)
    surf = _synthetic_surface(grid, 0.0, 0.0, 0.1, [1e-2, 5e-3, 2e-3])
    with pytest.raises(InvariantViolation):
        estimate_limits(surf, 0.1)


def test_surface_offsets_validated(constant_problem):
    with pytest.raises(ParameterError):
        critical_surface(constant_problem, 0.1, [0.01, 0.02])
    with pytest.raises(ParameterError):
        critical_surface(constant_problem, 0.1, [0.01, 0.02, 1.5])


def test_F_constant_kernel_fixed_point(constant_problem):
    # with U constant and tc = tau_1 the gap equation at tc gives F = c
    pr = constant_problem
    lim = _limits(pr.grid, 2.5, 0.0, pr.tau1)
    np.testing.assert_allclose(F_of_x(pr.kernel, lim), 2.5, rtol=1e-12)


def test_G_linear_in_w(separable_problem):
    pr = separable_problem
    tc = critical_temperature(pr)
    v = 1.0 + pr.nodes
    w1, w2 = np.cos(pr.nodes), pr.nodes ** 2
    G = lambda w: G_of_x(pr.kernel, _limits(pr.grid, v, w, tc))
    np.testing.assert_allclose(G(2 * w1 + 3 * w2) - G(0 * w1),
                               2 * (G(w1) - G(0 * w1)) + 3 * (G(w2) - G(0 * w1)), rtol=1e-10, atol=1e-12)


def test_G_constant_against_scalar_oracle(constant_problem):
    pr = constant_problem
    c, tc, U = 2.0, pr.tau1, 0.5
    sv = math.sqrt(c)

    def inner(x):
        t = mp.tanh(x / (2 * tc))
        return -2 * sv ** 3 / x ** 3 * t + sv * (1 - t * t) * (c / (tc * x ** 2) + 2 / tc ** 2)

    first = U * sv * mp.quad(lambda x: mp.tanh(x / (2 * tc)) / x, [0.01, 0.1, 1])
    oracle = float(first * U * mp.quad(inner, [0.01, 0.05, 0.2, 1]))
    got = G_of_x(pr.kernel, _limits(pr.grid, c, 0.0, tc))
    np.testing.assert_allclose(got, oracle, rtol=1e-9)


def test_F_G_domain(constant_problem):
    pr = constant_problem
    with pytest.raises(DomainError):
        F_of_x(pr.kernel, _limits(pr.grid, -1.0, 0.0, 0.1))
    with pytest.raises(DomainError):
        G_of_x(pr.kernel, _limits(pr.grid, 0.0, 0.0, 0.1))


def test_zero_v_gives_zero_jump(constant_problem):
    lim = _limits(constant_problem.grid, 0.0, 0.0, 0.1)
    assert jump_integral(lim, 0.1, REF) == 0.0
    assert delta_cv(lim, 0.1, REF).delta_cv == 0.0


def test_jump_integral_methods_agree(constant_problem):
    lim = _limits(constant_problem.grid, 3.0, 0.0, 0.09)
    assert jump_integral(lim, 0.09, REF, "adaptive") == pytest.approx(jump_integral(lim, 0.09, REF), rel=1e-10)
    with pytest.raises(DomainError):
        jump_integral(lim, 0.09, REF, "simpson")


def test_delta_cv_constant_kernel_form():
    tc = 0.05
    val = delta_cv_constant_kernel(-9.3836 * tc, tc, WEAK)
    assert val == pytest.approx(9.3836 * tc * math.tanh(1.0 / (2 * tc)), rel=1e-14)
    with pytest.raises(DomainError):
        delta_cv_constant_kernel(0.0, tc, WEAK)
    with pytest.raises(DomainError):
        delta_cv_constant_kernel(-1.0, 0.0, WEAK)


def test_relative_mismatch():
    assert relative_mismatch([1.0, 2.1], [1.0, 2.0]) == pytest.approx(0.05)


def test_weak_coupling_constants():
    pr = GapProblem(ConstantKernel(0.25, WEAK.domain), WEAK)
    res = analyze_jump(pr, numeric=False)
    tc = res.report.tc
    v_over_tc = float(np.median(res.limits.v)) / tc
    # v/Tc -> 8 pi^2 / (7 zeta(3)) and dCv/(N0 Tc) to the same constant
    universal = 8 * math.pi ** 2 / (7 * 1.2020569031595942)
    assert v_over_tc == pytest.approx(universal, rel=0.01)
    assert res.report.delta_cv / tc == pytest.approx(universal, rel=0.01)
    assert res.report.simplified_mismatch < 0.01


@pytest.fixture(scope="module")
def separable_jump(separable_problem):
    return analyze_jump(separable_problem)


def test_analyze_jump_consistency(separable_jump):
    rep = separable_jump.report
    assert rep.delta_cv > 0
    assert rep.numeric_mismatch < 1e-4
    assert rep.f_mismatch < 1e-8 and rep.g_mismatch < 1e-5
    assert rep.simplified_value is None
    assert np.all(separable_jump.limits.c3_combination < 1e3)


def test_jump_serialisation(separable_jump, tmp_path):
    path = tmp_path / "j.json"
    separable_jump.report.to_json(path, extra={"tag": "x"})
    doc = json.loads(path.read_text())
    assert doc["tag"] == "x" and doc["delta_cv"] == pytest.approx(separable_jump.report.delta_cv, rel=1e-11)
    assert doc["numeric_mismatch"] is not None
    csv = tmp_path / "j.csv"
    separable_jump.to_csv(csv)
    lines = csv.read_text().splitlines()
    assert lines[0] == "x,v,w,F,G" and len(lines) == 1 + separable_jump.limits.x_grid.size
