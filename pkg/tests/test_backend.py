import os
import subprocess
import sys

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcsgap import backend
from bcsgap.model import EnergyGrid, SeparableKernel

from conftest import REF

mp.mp.dps = 40
BACKENDS = backend.available()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")


def _inputs(seed, n=48):
    rng = np.random.default_rng(seed)
    grid = EnergyGrid.gauss_legendre(REF, n)
    kmat = SeparableKernel(0.4, (0.1,), REF.domain).matrix(grid.nodes)
    u = rng.uniform(0.0, 0.3, n)
    u[rng.integers(0, n, 5)] = 0.0
    return kmat, grid, u


@pytest.mark.parametrize("name", BACKENDS)
def test_phi_at_zero_gap(name):
    m = backend.get(name)
    xi = np.array([0.01, 0.1, 1.0])
    np.testing.assert_array_equal(m.gap_phi(xi, np.zeros(3), 0.05), np.zeros(3))


@pytest.mark.parametrize("name", BACKENDS)
def test_phi_derivs_against_finite_differences(name):
    m = backend.get(name)
    xi, u, T = np.array([0.02, 0.2, 0.7]), np.array([0.1, 0.05, 0.2]), 0.07
    phi, dphi, dT = m.gap_phi_derivs(xi, u, T)
    h = 1e-6
    fd_u = (m.gap_phi(xi, u + h, T) - m.gap_phi(xi, u - h, T)) / (2 * h)
    fd_T = (m.gap_phi(xi, u, T + h) - m.gap_phi(xi, u, T - h)) / (2 * h)
    np.testing.assert_allclose(dphi, fd_u, rtol=1e-7)
    np.testing.assert_allclose(dT, fd_T, rtol=1e-6)


@pytest.mark.parametrize("name", BACKENDS)
def test_phi_zero_temperature(name):
    m = backend.get(name)
    xi, u = np.array([0.1, 0.5]), np.array([0.2, 0.1])
    np.testing.assert_allclose(m.gap_phi(xi, u, 0.0), u / np.hypot(xi, u), rtol=1e-15)


@pytest.mark.parametrize("name", BACKENDS)
@pytest.mark.parametrize("T", [1e-300, 5e-324])
def test_derivs_finite_at_tiny_temperature(name, T):
    m = backend.get(name)
    with np.errstate(all="raise", under="ignore"):
        phi, dphi, dT = m.gap_phi_derivs(np.array([0.1, 0.5]), np.array([0.2, 0.0]), T)
    np.testing.assert_allclose(dphi, [0.1 ** 2 / np.hypot(0.1, 0.2) ** 3, 2.0], rtol=1e-14)
    np.testing.assert_array_equal(dT, [0.0, 0.0])


@pytest.mark.parametrize("name", BACKENDS)
def test_gap_integral_against_mpmath(name):
    m = backend.get(name)
    T, d = 0.05, 0.1
    oracle = mp.quad(lambda x: mp.tanh(mp.sqrt(x * x + d * d) / (2 * T)) / mp.sqrt(x * x + d * d), [0.01, 0.1, 1])
    assert m.gap_integral(T, d, 0.01, 1.0, 1e-14)[0] == pytest.approx(float(oracle), rel=1e-13)


@pytest.mark.parametrize("name", BACKENDS)
def test_g_function_against_mpmath(name):
    m = backend.get(name)
    eta = np.array([1e-4, 5e-3, 0.02, 0.3, 1.0, 4.0, 40.0])
    ref = [float((mp.sech(e) ** 2 - mp.tanh(e) / e) / e ** 2) for e in map(mp.mpf, eta)]
    # the direct form loses about eps / eta^2 just above the Taylor switch
    np.testing.assert_allclose(m.g_function(eta), ref, rtol=1e-11)


@needs_both
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), T=st.floats(0.0, 0.2))
def test_backends_agree(seed, T):
    kmat, grid, u = _inputs(seed)
    py, cy = backend.get("python"), backend.get("cython")
    a = py.nystrom_system(kmat, grid.weights, grid.nodes, u, T)
    b = cy.nystrom_system(kmat, grid.weights, grid.nodes, u, T)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-15, equal_nan=False)
        assert np.all(np.isfinite(x))
    np.testing.assert_allclose(py.nystrom_apply(kmat, grid.weights, grid.nodes, u, T),
                               cy.nystrom_apply(kmat, grid.weights, grid.nodes, u, T), rtol=1e-13, atol=1e-16)


@needs_both
def test_gap_integral_backends_agree():
    py, cy = backend.get("python"), backend.get("cython")
    for T, d in [(0.0, 0.2), (0.01, 0.0), (0.08, 0.05), (0.3, 1e-8)]:
        assert cy.gap_integral(T, d, 0.01, 1.0, 1e-14)[0] == pytest.approx(py.gap_integral(T, d, 0.01, 1.0, 1e-14)[0], rel=1e-13)


def test_get_unknown():
    with pytest.raises(ValueError):
        backend.get("fortran")


def test_pure_python_switch():
    env = dict(os.environ, BCSGAP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from bcsgap import backend; print(backend.NAME)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
