import numpy as np
import pytest

from bcsgap.model import ConstantKernel, PhysicalParams, SeparableKernel, TabulatedKernel
from bcsgap.solver import GapProblem

REF = PhysicalParams(epsilon=0.01, hbar_omega_d=1.0, mu=10.0, n0=1.0)
WEAK = PhysicalParams(epsilon=1e-6, hbar_omega_d=1.0, mu=10.0, n0=1.0)


@pytest.fixture(scope="session")
def params():
    return REF


@pytest.fixture(scope="session")
def constant_problem():
    return GapProblem(ConstantKernel(0.5, REF.domain), REF)


@pytest.fixture(scope="session")
def separable_problem():
    return GapProblem(SeparableKernel(0.4, (0.1,), REF.domain), REF)


@pytest.fixture(scope="session")
def asymmetric_problem():
    k = TabulatedKernel.sample(lambda x, xi: 0.35 + 0.1 * x + 0.05 * xi * xi, REF.domain, 33)
    return GapProblem(k, REF)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
