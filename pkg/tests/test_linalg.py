"""Tests for the small dense kernels"""
import numpy as np
import pytest

from nepmri.errors import DegeneratePencilError, NearSingularError
from nepmri.linalg import (
    arrowhead_pole_eigs, as_hermitian, denominator_and_derivative, hermitian_eig, newton_polish_root,
    solve_hermitian,
)


def random_hermitian(rng, order):
    A = rng.standard_normal((order, order)) + 1j * rng.standard_normal((order, order))
    return A + A.conj().T


class TestHermitianEig:
    def test_two_by_two(self):
        eigenvalues, eigenvectors = hermitian_eig(np.array([[1.0, -1.0], [-1.0, 1.0]]))
        assert eigenvalues == pytest.approx([0.0, 2.0], abs=1e-14)
        assert np.abs(eigenvectors[:, 0]) == pytest.approx([1 / np.sqrt(2)] * 2)

    def test_identity(self):
        eigenvalues, _ = hermitian_eig(np.eye(3))
        assert eigenvalues == pytest.approx([1.0, 1.0, 1.0])

    def test_diagonal_sorted(self):
        eigenvalues, eigenvectors = hermitian_eig(np.diag([3.0, 1.0, 2.0]))
        assert eigenvalues == pytest.approx([1.0, 2.0, 3.0])
        assert np.abs(eigenvectors) == pytest.approx(np.eye(3)[:, [1, 2, 0]])

    @pytest.mark.parametrize("order", [1, 5, 64])
    def test_reconstruction(self, rng, order):
        G = random_hermitian(rng, order)
        eigenvalues, V = hermitian_eig(G)
        assert np.all(np.diff(eigenvalues) >= 0)
        assert np.linalg.norm(V @ np.diag(eigenvalues) @ V.conj().T - G) <= 1e-12 * np.linalg.norm(G)
        assert np.linalg.norm(V.conj().T @ V - np.eye(order)) <= 1e-12 * order

    def test_lower_triangle_ignored(self):
        G = np.array([[2.0, 1.0j], [99.0, 2.0]])
        H = as_hermitian(G)
        assert H[1, 0] == -1.0j
        assert np.allclose(H, H.conj().T)


class TestSolveHermitian:
    def test_scaled_identity(self):
        assert solve_hermitian(2 * np.eye(2), np.ones(2)) == pytest.approx([0.5, 0.5])

    def test_diagonal(self):
        assert solve_hermitian(np.diag([2.0, 1.0]), np.array([2.0, 3.0])) == pytest.approx([1.0, 3.0])

    def test_singular(self):
        with pytest.raises(NearSingularError):
            solve_hermitian(np.array([[1.0, -1.0], [-1.0, 1.0]]), np.ones(2))

    def test_residual(self, rng):
        G = random_hermitian(rng, 6) + 20 * np.eye(6)
        b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        x = solve_hermitian(G, b)
        assert np.linalg.norm(G @ x - b) <= 1e-10 * np.linalg.norm(G) * np.linalg.norm(x)


class TestArrowhead:
    def test_fig1_left(self):
        assert arrowhead_pole_eigs([1.0, -1.0], [0.25, 0.75]) == [pytest.approx(0.5)]

    def test_fig1_right(self):
        assert arrowhead_pole_eigs([1.0, -1.0], [1.5, -0.5]) == [pytest.approx(-2.0)]

    def test_three_nodes(self):
        poles = sorted(arrowhead_pole_eigs([0.0, 2.0, 3.0], [-1 / 6, -1.5, 8 / 3]), key=lambda z: z.real)
        assert poles == [pytest.approx(-1.0), pytest.approx(1.0)]

    def test_zero_weight_sum_drops_infinite_eigenvalue(self):
        # q = (1/2, -1/2): d(z) = 1/(z^2 - 1) has no finite root
        assert arrowhead_pole_eigs([1.0, -1.0], [0.5, -0.5]) == []

    def test_zero_weight_sum_keeps_finite_root(self):
        # q = (1, -2, 1) on (0, 1, 3): the numerator z + 3 is linear
        assert arrowhead_pole_eigs([0.0, 1.0, 3.0], [1.0, -2.0, 1.0]) == [pytest.approx(-3.0)]

    def test_zero_weight_sum_constant_numerator(self):
        # q = (1, -2, 1) on (-1, 0, 1): d(z) = 2 / (z^3 - z)
        assert arrowhead_pole_eigs([-1.0, 0.0, 1.0], [1.0, -2.0, 1.0]) == []

    def test_all_zero_weights(self):
        with pytest.raises(DegeneratePencilError):
            arrowhead_pole_eigs([0.0, 1.0], [0.0, 0.0])

    def test_scaling_invariance(self, rng):
        nodes = np.linspace(0, 1, 6)
        weights = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        reference = sorted(arrowhead_pole_eigs(nodes, weights), key=lambda z: (z.real, z.imag))
        scaled = sorted(arrowhead_pole_eigs(nodes, (3 - 2j) * weights), key=lambda z: (z.real, z.imag))
        assert len(reference) == len(scaled) == 5
        for a, b in zip(reference, scaled):
            assert abs(a - b) <= 1e-10 * (1 + abs(a))

    def test_roots_of_denominator(self, rng):
        nodes = np.linspace(-1, 1, 7)
        weights = rng.standard_normal(7)
        for lam in arrowhead_pole_eigs(nodes, weights):
            polished = newton_polish_root(nodes, weights, lam, tol=1e-14 * (1 + abs(lam)))
            assert abs(polished.root - lam) <= 1e-8 * (1 + abs(lam))
            d, _ = denominator_and_derivative(nodes, weights, polished.root)
            assert abs(d) <= 1e-8 * np.max(np.abs(weights)) / np.min(np.abs(polished.root - nodes))


class TestNewton:
    def test_linear_numerator(self):
        result = newton_polish_root([1.0, -1.0], [0.25, 0.75], 0.49)
        assert result.converged
        assert result.root == pytest.approx(0.5, abs=1e-12)

    def test_fixed_point(self):
        result = newton_polish_root([1.0, -1.0], [0.25, 0.75], 0.5)
        assert result.iterations == 0
        assert result.root == 0.5

    def test_three_nodes(self):
        result = newton_polish_root([0.0, 2.0, 3.0], [-1 / 6, -1.5, 8 / 3], 1.1)
        assert result.root == pytest.approx(1.0, abs=1e-12)

    def test_zero_derivative_flags_no_progress(self):
        # d(z) = 1/(z^2 - 1) has d'(0) = 0
        result = newton_polish_root([1.0, -1.0], [0.5, -0.5], 0.0)
        assert result.no_progress
        assert not result.converged
        assert result.root == 0.0
