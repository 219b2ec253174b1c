"""Pytest configuration and fixtures"""
import numpy as np
import pytest

from nepmri.models import Region
from nepmri.mri import BarycentricSurrogate, SampleSet, build_surrogate
from nepmri.problems import LinearPencilProblem, make_diag_rational


def sample(problem, nodes, rhs):
    """Exact samples of u(z) = T(z)^-1 rhs at the given nodes"""
    return SampleSet(nodes, [problem.solve(z, rhs) for z in nodes])


@pytest.fixture
def rng():
    """Seeded generator shared by randomized tests"""
    return np.random.default_rng(20240607)


@pytest.fixture
def two_pole_problem():
    """T(z) = diag(z - 1, z + 1), so u(z) = (1/(z-1), 1/(z+1)) for v = (1, 1)"""
    return make_diag_rational([1.0, -1.0])


@pytest.fixture
def ones2():
    return np.ones((2, 1), dtype=complex)


@pytest.fixture
def two_pole_surrogate(two_pole_problem, ones2):
    """Exact surrogate of the two-pole problem from three samples"""
    return build_surrogate(sample(two_pole_problem, [-3.0, 0.5, 3.0], ones2))


@pytest.fixture
def unit_interval():
    return Region(kind='real_interval', endpoints=(-1, 1))


@pytest.fixture
def fig1_surrogate():
    """Nodes -1 and 1 with weights (3/4, 1/4), a single pole at 1/2"""
    return BarycentricSurrogate([-1.0, 1.0], [0.75, 0.25], [np.ones(1), np.ones(1)])


@pytest.fixture
def pencil8():
    """Well-conditioned random 8 x 8 pencil with eigenvalues near -2"""
    return LinearPencilProblem.random(8, seed=7)
