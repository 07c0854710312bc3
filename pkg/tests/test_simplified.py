import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import simpson
from scipy.optimize import brentq

from bcsgap.errors import ParameterError
from bcsgap.model import PhysicalParams
from bcsgap.simplified import (SimplifiedSolution, coupling_for_tc, delta0_closed_form, envelopes,
                               gap_integral, simplified_rhs, solve_simplified, transition_temperature)

from conftest import REF, WEAK

mp.mp.dps = 30


def rhs_oracle(U, T, d, p, n=400_001):
    """Composite Simpson in log(xi) on a fine grid."""
    s = np.linspace(math.log(p.epsilon), math.log(p.hbar_omega_d), n)
    xi = np.exp(s)
    E = np.hypot(xi, d)
    t = np.ones_like(E) if T == 0 else np.tanh(E / (2 * T))
    return U * simpson(t / E * xi, x=s)


def test_closed_form_value():
    assert delta0_closed_form(0.5, REF) == pytest.approx(0.265159, abs=1e-6)


def test_closed_form_against_asinh_root():
    # 1/U = asinh(hw/D) - asinh(eps/D) at T = 0
    U = 0.5
    root = brentq(lambda d: math.asinh(1.0 / d) - math.asinh(0.01 / d) - 1.0 / U, 1e-3, 1.0, xtol=1e-16)
    assert delta0_closed_form(U, REF) == pytest.approx(root, rel=1e-13)


def test_closed_form_epsilon_to_zero():
    p = PhysicalParams(1e-12, 1.0, 10.0)
    assert delta0_closed_form(0.5, p) == pytest.approx(1.0 / math.sinh(2.0), rel=1e-9)


def test_closed_form_negative_radicand():
    with pytest.raises(ParameterError):
        delta0_closed_form(0.1, REF)


def test_rhs_against_simpson():
    for T, d in [(0.0, 0.2), (0.05, 0.1), (0.12, 0.01)]:
        assert simplified_rhs(0.45, T, d, REF) == pytest.approx(rhs_oracle(0.45, T, d, REF), rel=1e-11)


def test_rhs_at_tau_and_zero():
    tau = transition_temperature(0.4, REF)
    assert simplified_rhs(0.4, tau, 0.0, REF) == pytest.approx(1.0, abs=1e-12)
    d0 = delta0_closed_form(0.4, REF)
    assert simplified_rhs(0.4, 0.0, d0, REF) == pytest.approx(1.0, abs=1e-9)


def test_rhs_large_gap_small():
    v = simplified_rhs(0.5, 0.05, 1e3, REF)
    assert 0 < v < 1e-2
    assert v <= 0.5 * (1.0 - 0.01) / 1e3


@settings(max_examples=40, deadline=None)
@given(T=st.floats(0.0, 0.3), d1=st.floats(1e-6, 2.0), d2=st.floats(1e-6, 2.0))
def test_rhs_decreasing_in_gap(T, d1, d2):
    lo, hi = sorted((d1, d2))
    if hi - lo < 1e-9 * hi:
        return
    assert simplified_rhs(0.5, T, lo, REF) > simplified_rhs(0.5, T, hi, REF)


def test_gap_integral_zero_T_closed_form():
    d = 0.2
    assert gap_integral(0.0, d, REF) == pytest.approx(math.asinh(1 / d) - math.asinh(0.01 / d), rel=1e-13)


def test_solve_endpoints():
    U = 0.5
    tau = transition_temperature(U, REF)
    assert solve_simplified(U, 0.0, REF) == pytest.approx(delta0_closed_form(U, REF), rel=1e-12)
    assert solve_simplified(U, tau, REF) == 0.0
    assert solve_simplified(U, 2 * tau, REF) == 0.0


def test_solve_decreasing_and_matches_bisection():
    U = 0.5
    tau = transition_temperature(U, REF)
    d0 = delta0_closed_form(U, REF)
    Ts = np.linspace(0.05, 0.95, 10) * tau
    vals = np.array([solve_simplified(U, T, REF) for T in Ts])
    assert np.all(np.diff(vals) < 0)
    assert 0 < solve_simplified(U, 0.5 * tau, REF) < d0
    for T, v in zip(Ts[::3], vals[::3]):
        oracle = brentq(lambda d: rhs_oracle(U, T, d, REF, 100_001) - 1.0, 1e-9, d0, xtol=1e-15)
        assert v == pytest.approx(oracle, rel=1e-8)


def test_solve_near_tau_is_positive():
    # the square-root onset stays resolved just below tau
    U = 0.4
    tau = transition_temperature(U, REF)
    d = solve_simplified(U, tau * (1 - 1e-12), REF)
    assert d > 0
    d_far = solve_simplified(U, tau * (1 - 1e-8), REF)
    assert d / d_far == pytest.approx(1e-2, rel=1e-2)


def test_weak_coupling_tau():
    p = PhysicalParams(1e-6, 1.0, 10.0)
    tau = transition_temperature(0.3, p)
    asym = 2 * math.exp(0.5772156649015329) / math.pi * math.exp(-1 / 0.3)
    assert tau == pytest.approx(0.04045, rel=0.02)
    assert tau == pytest.approx(asym, rel=1e-3)


def test_weak_coupling_gap_ratio():
    ratio = delta0_closed_form(0.25, WEAK) / transition_temperature(0.25, WEAK)
    assert ratio == pytest.approx(math.pi / math.exp(0.5772156649015329), rel=0.01)


def test_tau_monotone_in_coupling():
    assert transition_temperature(0.5, REF) > transition_temperature(0.3, REF)


def test_coupling_round_trip():
    U = coupling_for_tc(0.1, REF)
    assert transition_temperature(U, REF) == pytest.approx(0.1, rel=1e-10)
    tau1 = transition_temperature(0.4, REF)
    assert coupling_for_tc(tau1, REF) == pytest.approx(0.4, rel=1e-10)


def test_coupling_ordering():
    t1, t2 = transition_temperature(0.4, REF), transition_temperature(0.5, REF)
    for tc in np.linspace(t1, t2, 5):
        assert 0.4 - 1e-10 <= coupling_for_tc(tc, REF) <= 0.5 + 1e-10


def test_table_against_direct_solves():
    sol = SimplifiedSolution(0.5, REF)
    Ts = np.linspace(0.0, sol.tau * 0.999, 23)
    direct = np.array([sol.delta(T) for T in Ts])
    np.testing.assert_allclose(sol.delta_of_T(Ts), direct, rtol=1e-4, atol=1e-6)
    assert sol.delta(sol.tau) == 0.0
    assert sol(0.0) == pytest.approx(sol.delta0, rel=1e-12)


def test_envelopes_ordered():
    low, high = envelopes(0.4, 0.5, REF)
    assert low.tau < high.tau
    for T in np.linspace(0, low.tau, 6):
        assert low.delta(T) <= high.delta(T)
