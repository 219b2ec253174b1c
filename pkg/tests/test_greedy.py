"""Tests for the greedy sampling loop"""
import numpy as np
import pytest

from nepmri.config import INDICATOR_CAP
from nepmri.errors import SamplingError
from nepmri.greedy import greedy_loop, indicator, indicator_grid, next_sample_point, rank_candidates, residual_norm
from nepmri.models import Region
from nepmri.mri import BarycentricSurrogate, SampleSet, build_surrogate
from nepmri.polres import find_poles
from nepmri.problems import LinearPencilProblem, NEPProblem, as_block, make_diag_rational, make_scalar_sin

from tests.conftest import sample

GRID_SPACING = 2.0 / 500


class BlowupProblem(NEPProblem):
    """Identity-like operator whose n-th solve explodes"""

    name = "blowup"

    def __init__(self, bad_call):
        self.bad_call = bad_call
        self.solves = 0

    def dim(self):
        return 2

    def apply_T(self, z, X):
        return as_block(X)

    def solve(self, z, B):
        self.solves += 1
        scale = 1e20 if self.solves == self.bad_call else 1.0 / (z - 5.0)
        return scale * as_block(B)


def two_node_surrogate(weights):
    return BarycentricSurrogate([1.0, -1.0], weights, [np.ones(1), np.ones(1)])


class TestIndicator:
    def test_capped_at_pole(self):
        assert indicator(two_node_surrogate([0.25, 0.75]), 0.5) >= 1e15
        assert indicator(two_node_surrogate([1.0, 1.0]), 0.0) == INDICATOR_CAP

    def test_zero_at_node(self):
        assert indicator(two_node_surrogate([0.25, 0.75]), 1.0) == 0.0

    def test_derived_value(self):
        assert indicator(two_node_surrogate([0.5, -0.5]), 0.0) == pytest.approx(1.0)

    def test_grid_matches_scalar(self, fig1_surrogate):
        points = np.array([-1.0, -0.3, 0.5, 0.9 + 0.2j])
        values = indicator_grid(fig1_surrogate, points)
        assert values == pytest.approx([indicator(fig1_surrogate, z) for z in points])


class TestNextSamplePoint:
    def test_fig1_left(self, unit_interval):
        assert abs(next_sample_point(two_node_surrogate([0.25, 0.75]), unit_interval) - 0.5) <= GRID_SPACING

    def test_fig1_right(self, unit_interval):
        z = next_sample_point(two_node_surrogate([1.5, -0.5]), unit_interval)
        assert abs(z - (-2 + np.sqrt(3))) <= GRID_SPACING

    def test_symmetric_weights(self, unit_interval):
        assert abs(next_sample_point(two_node_surrogate([0.5, -0.5]), unit_interval)) <= GRID_SPACING

    def test_nodes_excluded(self, unit_interval):
        candidates, values = rank_candidates(two_node_surrogate([0.5, -0.5]), unit_interval)
        assert values[0] == values[-1] == -1.0
        assert np.all(values[1:-1] > 0)

    def test_all_candidates_excluded(self):
        region = Region(endpoints=(0, 1), candidate_count=3)
        surrogate = BarycentricSurrogate([0.0, 0.5, 1.0], [1.0, -2.0, 1.0], [np.ones(1)] * 3)
        with pytest.raises(SamplingError):
            next_sample_point(surrogate, region)


class TestResidualNorm:
    def test_identity_problem(self):
        problem = make_diag_rational([10.0], dim=3)
        v = np.array([[0.0], [1.0], [2.0]], dtype=complex)
        surrogate = build_surrogate(sample(problem, [0.0, 1.0], v))
        for z in [0.3, 0.7, 2.0]:
            assert residual_norm(problem, surrogate, z, v) <= 1e-12

    def test_zero_at_node(self, two_pole_problem, two_pole_surrogate, ones2):
        assert residual_norm(two_pole_problem, two_pole_surrogate, 0.5, ones2) <= 1e-10

    def test_residual_times_denominator_is_constant_for_pencils(self, rng):
        # Eigenvalues near [0, 1], so the residual stays well above rounding level
        pencil = LinearPencilProblem.random(8, seed=7, shift=-0.5)
        v = rng.standard_normal((8, 1)).astype(complex)
        points = Region(endpoints=(0, 1)).grid(101)
        for size in range(3, 9):
            nodes = np.linspace(0.013, 0.987, size)
            surrogate = build_surrogate(sample(pencil, nodes, v))
            products = [
                residual_norm(pencil, surrogate, z, v) * abs(surrogate.eval_denominator(z))
                for z in points
                if surrogate.node_index(z) is None
            ]
            assert len(products) >= 95
            assert np.std(products) / np.mean(products) <= 1e-6


class TestGreedyLoop:
    def test_two_poles_recovered_with_three_samples(self, two_pole_problem, ones2):
        region = Region(endpoints=(-3, 3))
        surrogate, trace = greedy_loop(two_pole_problem, ones2, region, budget=3)
        poles = sorted(report.pole.real for report in find_poles(surrogate))
        assert poles == [pytest.approx(-1.0, abs=1e-6), pytest.approx(1.0, abs=1e-6)]
        assert len(trace.steps) == 1
        assert trace.steps[0].z == 0
        assert trace.status == 'complete'

    def test_budget_equal_to_initial_nodes(self, two_pole_problem, ones2):
        surrogate, trace = greedy_loop(two_pole_problem, ones2, Region(endpoints=(-3, 3)), budget=2)
        assert trace.steps == []
        assert surrogate.size == 2

    def test_budget_exactness(self, pencil8):
        problem_solves = []
        original = pencil8.solve

        def counting_solve(z, B):
            problem_solves.append(z)
            return original(z, B)

        pencil8.solve = counting_solve
        surrogate, trace = greedy_loop(pencil8, np.ones(8), Region(endpoints=(0, 1)), budget=7)
        assert len(problem_solves) == 7
        assert surrogate.size == 7
        assert len(trace.steps) == 7 - trace.initial_count

    def test_custom_initial_nodes(self, pencil8):
        _, trace = greedy_loop(pencil8, np.ones(8), Region(endpoints=(0, 1)), budget=4, initial_nodes=[0.25, 0.75])
        assert [record.z for record in trace.samples[:2]] == [0.25, 0.75]

    def test_initial_nodes_outside_region(self, pencil8):
        with pytest.raises(ValueError):
            greedy_loop(pencil8, np.ones(8), Region(endpoints=(0, 1)), budget=4, initial_nodes=[0.0, 2.0])

    def test_indicator_argmax_matches_residual_argmax(self, pencil8, rng):
        region = Region(endpoints=(0, 1))
        v = rng.standard_normal((8, 1)).astype(complex)
        _, trace = greedy_loop(pencil8, v, region, budget=7, record_timing=False)

        nodes = [record.z for record in trace.samples]
        values = [pencil8.solve(z, v) for z in nodes]
        for step in trace.steps:
            size = step.iteration + 1
            surrogate = build_surrogate(SampleSet(nodes[:size], values[:size]))
            candidates, ranked = rank_candidates(surrogate, region)
            residuals = np.array([
                residual_norm(pencil8, surrogate, z, v) if rank >= 0 else -1.0 for z, rank in zip(candidates, ranked)
            ])
            best = int(np.argmax(residuals))
            chosen = int(np.flatnonzero(candidates == step.z)[0])
            assert best == chosen or residuals[chosen] >= residuals[best] * (1 - 1e-6)

    def test_offset_rule_on_exact_eigenvalue(self):
        # u(z) = 1/z sampled at +-3 puts the surrogate pole exactly on 0
        problem = make_diag_rational([0.0])
        region = Region(endpoints=(-3, 3))
        _, trace = greedy_loop(problem, np.ones(1), region, budget=3)
        step = trace.steps[0]
        assert step.event == 'offset'
        assert step.requested_z == 0
        assert abs(step.z) == pytest.approx(6 / 500, rel=1e-9)
        assert trace.suspects == [0]
        assert trace.status == 'complete'

    def test_suspect_solution_blowup(self):
        problem = BlowupProblem(bad_call=3)
        _, trace = greedy_loop(problem, np.ones(2), Region(endpoints=(-3, 3)), budget=3)
        step = trace.steps[0]
        assert step.event == 'suspect'
        assert step.requested_z is not None and step.z != step.requested_z
        assert problem.solves == 4
        assert len(trace.samples) == 3

    def test_scalar_sin_completes_with_ambiguous_weights(self):
        problem = make_scalar_sin(3)
        surrogate, trace = greedy_loop(problem, np.ones(3), Region(endpoints=(2, 4.5)), budget=6)
        assert surrogate.weight_ambiguous
        assert trace.ambiguous_iterations
        assert len(trace.samples) == 6

    def test_callback_events(self, two_pole_problem, ones2):
        events = []
        greedy_loop(two_pole_problem, ones2, Region(endpoints=(-3, 3)), budget=5,
                    callback=lambda event, data: events.append(event))
        assert events.count('sample') == 5
        assert events.count('surrogate') == 4

    def test_early_stop(self, two_pole_problem, ones2):
        _, trace = greedy_loop(two_pole_problem, ones2, Region(endpoints=(-3, 3)), budget=5,
                               early_stop_tol=2 * INDICATOR_CAP)
        assert trace.status == 'converged'
        assert trace.steps == []

    def test_deterministic(self, pencil8):
        region = Region(endpoints=(0, 1))
        _, first = greedy_loop(pencil8, np.ones(8), region, budget=6, record_timing=False)
        _, second = greedy_loop(pencil8, np.ones(8), region, budget=6, record_timing=False)
        assert first.model_dump() == second.model_dump()
