import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcsgap.errors import DomainError, ParameterError
from bcsgap.model import (ConstantDOS, ConstantKernel, EnergyGrid, FreeElectronDOS, PhysicalParams,
                          SeparableKernel, TabulatedDOS, TabulatedKernel, ZeroDOS, eval_kernel,
                          validate_kernel)

from conftest import REF


@pytest.mark.parametrize("kwargs", [
    dict(epsilon=0.0, hbar_omega_d=1.0, mu=10.0),
    dict(epsilon=1.0, hbar_omega_d=1.0, mu=10.0),
    dict(epsilon=0.01, hbar_omega_d=1.0, mu=0.5),
    dict(epsilon=0.01, hbar_omega_d=1.0, mu=10.0, n0=0.0),
    dict(epsilon=float("nan"), hbar_omega_d=1.0, mu=10.0),
])
def test_params_reject_bad_values(kwargs):
    with pytest.raises(ParameterError):
        PhysicalParams(**kwargs)


def test_params_log_ratio():
    assert REF.log_ratio == pytest.approx(math.log(100.0), rel=1e-15)
    assert REF.domain == (0.01, 1.0)


def test_kernel_point_values():
    assert eval_kernel(ConstantKernel(0.5, REF.domain), 0.3, 0.7) == 0.5
    assert eval_kernel(SeparableKernel(0.4, (0.1,), REF.domain), 1.0, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_kernel_outside_domain():
    with pytest.raises(DomainError):
        ConstantKernel(0.5, REF.domain)(1.5, 0.5)


def test_kernel_matrix_broadcasts():
    k = SeparableKernel(0.4, (0.1,), REF.domain)
    nodes = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(k.matrix(nodes), 0.4 + 0.1 * np.outer(nodes, nodes), rtol=1e-15)


def test_separable_bounds_brute_force():
    k = SeparableKernel(0.3, (0.1, 0.1), REF.domain)
    x = np.linspace(0.01, 1.0, 2001)
    vals = 0.3 + 0.1 * np.outer(x, x) + 0.1 * np.outer(x, x) ** 2
    assert k.u1 == pytest.approx(vals.min(), rel=1e-12)
    assert k.u2 == pytest.approx(vals.max(), rel=1e-12)


def test_validate_constant_passes():
    grid = EnergyGrid.gauss_legendre(REF, 32)
    rep = validate_kernel(ConstantKernel(0.5, REF.domain), grid)
    assert rep.passed and rep.minimum == rep.maximum == 0.5


def test_validate_declared_bound_too_high_fails():
    domain = (0.01, math.sqrt(2.0))
    k = SeparableKernel(0.4, (0.1,), domain, u1=0.45, u2=0.6)
    rep = validate_kernel(k, EnergyGrid.gauss_legendre(domain, 32))
    assert not rep.passed
    assert "below u1" in rep.message


def test_tabulated_bounds_match_brute_force():
    src = SeparableKernel(0.4, (0.1,), REF.domain)
    k = TabulatedKernel.sample(src._evaluate, REF.domain, 33)
    grid = EnergyGrid.gauss_legendre(REF, 64)
    rep = validate_kernel(k, grid)
    # brute force over a fine grid of the generating function
    x = np.linspace(0.01, 1.0, 1001)
    fine = 0.4 + 0.1 * np.outer(x, x)
    assert rep.passed
    assert k.u1 == pytest.approx(fine.min(), abs=1e-9)
    assert k.u2 == pytest.approx(fine.max(), abs=1e-9)
    assert rep.minimum == pytest.approx(0.40001, abs=1e-5)


def test_tabulated_reproduces_bilinear_function():
    src = SeparableKernel(0.4, (0.1,), REF.domain)
    k = TabulatedKernel.sample(src._evaluate, REF.domain, 17)
    x = np.linspace(0.01, 1.0, 37)
    # bicubic splines are exact on polynomials of degree <= 3 per axis
    np.testing.assert_allclose(k(x[:, None], x[None, :]), src(x[:, None], x[None, :]), atol=1e-13)


def test_tabulated_csv_round_trip(tmp_path):
    k = TabulatedKernel.sample(lambda x, xi: 0.35 + 0.1 * x + 0.05 * xi * xi, REF.domain, 9)
    path = tmp_path / "kernel.csv"
    k.to_csv(path)
    back = TabulatedKernel.from_csv(path)
    np.testing.assert_array_equal(back.values, k.values)
    np.testing.assert_array_equal(back.x_coords, k.x_coords)
    assert not back.is_symmetric


@pytest.mark.parametrize("bad", [
    dict(x_coords=[0.1, 0.2, 0.3], xi_coords=[0.1, 0.2, 0.3], values=np.ones((3, 3))),
    dict(x_coords=[0.1, 0.3, 0.2, 0.4], xi_coords=[0.1, 0.2, 0.3, 0.4], values=np.ones((4, 4))),
    dict(x_coords=[0.1, 0.2, 0.3, 0.4], xi_coords=[0.1, 0.2, 0.3, 0.4], values=np.ones((4, 3))),
    dict(x_coords=[0.1, 0.2, 0.3, 0.4], xi_coords=[0.1, 0.2, 0.3, 0.4], values=-np.ones((4, 4))),
])
def test_tabulated_rejects_bad_tables(bad):
    with pytest.raises(ParameterError):
        TabulatedKernel(**bad)


def test_constant_kernel_rejects_nonpositive():
    with pytest.raises(ParameterError):
        ConstantKernel(0.0, REF.domain)


@pytest.mark.parametrize("mapping", ["log", "linear"])
def test_grid_integrates_reciprocal(mapping):
    n = 64 if mapping == "log" else 400
    grid = EnergyGrid.gauss_legendre(REF, n, mapping)
    tol = 1e-13 if mapping == "log" else 1e-6
    assert grid.integrate(1.0 / grid.nodes) == pytest.approx(math.log(100.0), rel=tol)


def test_grid_refined_and_interpolant():
    grid = EnergyGrid.gauss_legendre(REF, 24)
    assert grid.refined(2).size == 48
    f = grid.interpolant(np.log(grid.nodes) ** 2)
    assert f(0.1) == pytest.approx(math.log(0.1) ** 2, rel=1e-12)
    with pytest.raises(DomainError):
        f(2.0)


def test_grid_unknown_mapping():
    with pytest.raises(ParameterError):
        EnergyGrid.gauss_legendre(REF, 16, "cubic")


@pytest.mark.parametrize("dos", [
    ZeroDOS(), ConstantDOS(1.0), FreeElectronDOS(0.3, 10.0),
    TabulatedDOS(np.array([-10.0, -1.0, 0.0, 1.0, 4.0]), np.array([0.2, 0.9, 1.0, 1.1, 2.0])),
])
@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.05, 5.0), t=st.floats(0.0, 200.0))
def test_dos_growth_bound(dos, a, t):
    x = a + t
    assert float(dos(x)) <= dos.growth_constant(a) * math.sqrt(x) * (1 + 1e-12) + 1e-300


def test_tabulated_dos_continuous_tail():
    dos = TabulatedDOS(np.array([0.0, 1.0, 4.0]), np.array([1.0, 1.5, 2.0]))
    assert float(dos(4.0)) == pytest.approx(float(dos(4.0 + 1e-12)), rel=1e-9)
    assert float(dos(16.0)) == pytest.approx(4.0, rel=1e-14)
