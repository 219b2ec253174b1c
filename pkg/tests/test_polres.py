"""Tests for pole finding and residue extraction"""
import numpy as np
import pytest

from nepmri.errors import ContourError, ResidueError
from nepmri.mri import BarycentricSurrogate
from nepmri.polres import (
    attach_residues, cluster_poles, default_contour_radius, find_poles, laurent_residues, poles_and_residues,
    simple_residue,
)


def random_simple_pole_surrogate(rng, size=5, dim=3):
    nodes = np.sort(rng.uniform(-1, 1, size))
    weights = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    values = [rng.standard_normal(dim) + 1j * rng.standard_normal(dim) for _ in range(size)]
    return BarycentricSurrogate(nodes, weights, values)


class TestClustering:
    def test_merges_close_values(self):
        clusters = cluster_poles([1.0, 1.0 + 1e-10, 2.0], tol_cluster=1e-7)
        assert [len(c) for c in clusters] == [2, 1]

    def test_single_linkage_chains(self):
        clusters = cluster_poles([0.0, 0.6e-7, 1.2e-7], tol_cluster=1e-7)
        assert len(clusters) == 1

    def test_separated(self):
        assert len(cluster_poles([1.0, 2.0, 3.0], tol_cluster=1e-7)) == 3

    def test_empty(self):
        assert cluster_poles([]) == []


class TestFindPoles:
    def test_two_pole_function(self, two_pole_surrogate):
        reports = find_poles(two_pole_surrogate)
        assert [r.pole for r in reports] == [pytest.approx(-1.0, abs=1e-10), pytest.approx(1.0, abs=1e-10)]
        assert all(r.order == 1 and r.newton_converged for r in reports)

    def test_no_poles_when_weights_sum_to_zero(self):
        surrogate = BarycentricSurrogate([1.0, -1.0], [0.5, -0.5], [np.ones(1), np.ones(1)])
        assert find_poles(surrogate) == []

    def test_single_active_node(self):
        surrogate = BarycentricSurrogate([0.0, 1.0], [1.0, 0.0], [np.ones(1), np.ones(1)])
        assert find_poles(surrogate) == []

    def test_double_pole_cluster(self):
        # u(z) = 1/(z-1)^2 through nodes 0, 2, 3 has denominator (z-1)^2 / l(z)
        surrogate = BarycentricSurrogate([0.0, 2.0, 3.0], [1 / 6, -1 / 2, 4 / 3], [np.ones(1), np.ones(1), np.ones(1) / 4])
        reports = find_poles(surrogate)
        assert len(reports) == 1
        assert reports[0].order == 2
        assert reports[0].pole == pytest.approx(1.0, abs=1e-7)


class TestResidues:
    def test_hand_derived_three_node_example(self, two_pole_surrogate):
        reports = poles_and_residues(two_pole_surrogate)
        residues = {round(r.pole.real): r.residues[0].ravel() for r in reports}
        assert np.allclose(residues[-1], [0.0, 1.0], atol=1e-10)
        assert np.allclose(residues[1], [1.0, 0.0], atol=1e-10)

    def test_simple_residue_matches_quadrature(self, rng):
        checked = 0
        while checked < 20:
            surrogate = random_simple_pole_surrogate(rng)
            reports = find_poles(surrogate)
            poles = [r.pole for r in reports]
            for report in reports:
                if report.order != 1:
                    continue
                others = [p for p in poles if p != report.pole]
                closed_form = simple_residue(surrogate, report.pole)
                quadrature = laurent_residues(surrogate, report.pole, 1, other_poles=others)[0]
                assert np.linalg.norm(quadrature - closed_form) <= 1e-8 * np.linalg.norm(closed_form)
                checked += 1

    def test_principal_part_leaves_bounded_remainder(self, rng):
        angles = np.exp(2j * np.pi * np.arange(16) / 16)

        def remainder(surrogate, report, radius):
            worst = 0.0
            for offset in radius * angles:
                principal = sum(r / offset ** k for k, r in enumerate(report.residues, start=1))
                worst = max(worst, np.linalg.norm(surrogate.eval_surrogate(report.pole + offset) - principal))
            return worst

        for _ in range(10):
            surrogate = random_simple_pole_surrogate(rng)
            reports = poles_and_residues(surrogate)
            for report in reports:
                others = [r.pole for r in reports if r is not report]
                radius = default_contour_radius(surrogate, report.pole, others)
                # u~ itself grows like 1/radius; what is left after the principal part must not
                slack = 1e-10 * np.linalg.norm(report.residues[0]) / (radius / 10) ** 2
                assert remainder(surrogate, report, radius / 10) <= 2 * remainder(surrogate, report, radius) + slack

    def test_simple_residue_rejects_double_root(self):
        surrogate = BarycentricSurrogate([1.0, -1.0], [0.5, -0.5], [np.ones(1), np.ones(1)])
        with pytest.raises(ResidueError):
            simple_residue(surrogate, 0.0)

    def test_double_pole_laurent_coefficients(self):
        surrogate = BarycentricSurrogate([0.0, 2.0, 3.0], [1 / 6, -1 / 2, 4 / 3], [np.ones(1), np.ones(1), np.ones(1) / 4])
        r1, r2 = laurent_residues(surrogate, 1.0, 2)
        assert abs(r1.item()) <= 1e-10
        assert r2.item() == pytest.approx(1.0, abs=1e-10)

    def test_double_pole_keeps_both_coefficients(self):
        surrogate = BarycentricSurrogate([0.0, 2.0, 3.0], [1 / 6, -1 / 2, 4 / 3], [np.ones(1), np.ones(1), np.ones(1) / 4])
        [report] = poles_and_residues(surrogate)
        assert report.order == 2
        assert report.residues[1].item() == pytest.approx(1.0, abs=1e-6)

    def test_contour_reaching_node(self, two_pole_surrogate):
        with pytest.raises(ContourError) as e:
            laurent_residues(two_pole_surrogate, 1.0, 1, radius=1.0)
        assert e.value.suggested_radius == pytest.approx(0.25)

    def test_too_few_points(self, two_pole_surrogate):
        with pytest.raises(ValueError):
            laurent_residues(two_pole_surrogate, 1.0, 2, points=8)

    def test_order_zero(self, two_pole_surrogate):
        assert laurent_residues(two_pole_surrogate, 1.0, 0) == []

    def test_attach_keeps_poles(self, two_pole_surrogate):
        reports = attach_residues(two_pole_surrogate, find_poles(two_pole_surrogate))
        assert [len(r.residues) for r in reports] == [1, 1]
