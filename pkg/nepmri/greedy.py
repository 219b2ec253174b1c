"""
Greedy adaptive sampling

Each iteration solves the problem at the point where the indicator
1/|d(z)| of the current surrogate is largest, adds the sample and rebuilds
the surrogate, until the budget of problem solves is spent.
"""
from typing import Callable, Optional, Sequence, Tuple
import logging
import time

import numpy as np

from nepmri.config import INDICATOR_CAP, REGION_RTOL, SOLVE_BLOWUP_FACTOR
from nepmri.errors import SamplingError, SolveError
from nepmri.models import GreedyStep, GreedyTrace, NormalizationMode, Region, SampleRecord
from nepmri.mri import BarycentricSurrogate, SampleSet, build_surrogate
from nepmri.problems import NEPProblem, as_block

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str, dict], None]


def indicator(surrogate: BarycentricSurrogate, z: complex) -> float:
    """
    Greedy indicator rho(z) = 1/|d(z)|

    Zero at active nodes (where d diverges), capped at INDICATOR_CAP at
    surrogate poles.
    """
    if surrogate.node_index(z) is not None:
        return 0.0
    denominator = surrogate.eval_denominator(z)
    if not np.isfinite(denominator):
        return 0.0
    magnitude = abs(denominator)
    if magnitude <= 1.0 / INDICATOR_CAP:
        return INDICATOR_CAP
    return float(min(1.0 / magnitude, INDICATOR_CAP))


def indicator_grid(surrogate: BarycentricSurrogate, points: np.ndarray) -> np.ndarray:
    """Vectorized ``indicator`` over many points"""
    denominator = surrogate.denominator_grid(points)
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        values = 1.0 / np.abs(denominator)
    values[np.isnan(values)] = INDICATOR_CAP
    return np.minimum(values, INDICATOR_CAP)


def rank_candidates(surrogate: BarycentricSurrogate, region: Region) -> Tuple[np.ndarray, np.ndarray]:
    """
    Indicator over the candidate grid, with excluded candidates set to -1

    A candidate is excluded when it lies within the coincidence radius of
    any node, active or not.
    """
    candidates = region.candidates
    distances = np.abs(candidates[:, None] - surrogate.nodes[None, :])
    excluded = np.any(distances <= surrogate.coincidence_radius, axis=1)

    values = indicator_grid(surrogate, candidates)
    values[excluded] = -1.0
    return candidates, values


def next_sample_point(surrogate: BarycentricSurrogate, region: Region) -> complex:
    """
    Candidate maximizing the indicator, lowest index on ties

    Raises:
        SamplingError: If every candidate coincides with a node
    """
    candidates, values = rank_candidates(surrogate, region)
    index = int(np.argmax(values))
    if values[index] < 0:
        raise SamplingError("Every candidate point coincides with a node; the budget cannot be spent")
    return complex(candidates[index])


def residual_norm(problem: NEPProblem, surrogate: BarycentricSurrogate, z: complex, rhs: np.ndarray) -> float:
    """
    ||T(z) u~(z) - V||, Frobenius norm for blocks

    Raises:
        PoleProximityError: If z is numerically a surrogate pole
    """
    approximation = surrogate.eval_surrogate(z)
    return float(np.linalg.norm(problem.apply_T(z, approximation) - as_block(rhs)))


def _nearest_unused(candidates: np.ndarray, values: np.ndarray, index: int) -> Optional[int]:
    distances = np.abs(candidates - candidates[index])
    distances[values < 0] = np.inf
    distances[index] = np.inf
    nearest = int(np.argmin(distances))
    return None if np.isinf(distances[nearest]) else nearest


def _sample(problem: NEPProblem, z: complex, rhs: np.ndarray, rhs_norm: float):
    """Solve at z; returns (solution or None, seconds, event)"""
    started = time.perf_counter()
    try:
        solution = as_block(problem.solve(z, rhs))
    except SolveError as e:
        logger.warning(f"Solve failed at z={z}", extra={"reason": e.reason})
        return None, time.perf_counter() - started, 'offset'
    seconds = time.perf_counter() - started

    norm = np.linalg.norm(solution)
    if not np.isfinite(norm) or norm > SOLVE_BLOWUP_FACTOR * rhs_norm:
        logger.warning(f"Solution norm {norm:.3e} at z={z} suggests an exact eigenvalue")
        return None, seconds, 'suspect'
    return solution, seconds, 'ok'


def _check_initial_nodes(nodes: Sequence[complex], region: Region, budget: int) -> None:
    if len(nodes) < 2:
        raise ValueError("At least two initial nodes are required")
    if len(set(nodes)) != len(nodes):
        raise ValueError("Initial nodes must be distinct")
    if budget < len(nodes):
        raise ValueError(f"Budget {budget} is smaller than the {len(nodes)} initial nodes")
    margin = REGION_RTOL * region.length
    outside = [z for z in nodes if region.distance(z) > margin]
    if outside:
        raise ValueError(f"Initial nodes {outside} lie outside the region segment")


def greedy_loop(
    problem: NEPProblem,
    rhs: np.ndarray,
    region: Region,
    budget: int,
    initial_nodes: Optional[Sequence[complex]] = None,
    mode: NormalizationMode = 'euclidean',
    early_stop_tol: Optional[float] = None,
    callback: Optional[ProgressCallback] = None,
    record_timing: bool = True,
) -> Tuple[BarycentricSurrogate, GreedyTrace]:
    """
    Greedy minimal rational interpolation of u(z) = T(z)^-1 V

    Args:
        problem: Problem provider
        rhs: Right-hand side V (vector or n x m block)
        region: Segment searched for sample points
        budget: Total number of samples, initial ones included
        initial_nodes: Starting points (default: region endpoints)
        mode: Weight normalization
        early_stop_tol: Stop once the indicator maximum drops below this
        callback: Optional function(event_type, data) called with 'sample'
            after every solve and 'surrogate' after every rebuild
        record_timing: Record solve wall-clock times (zeros otherwise)

    Returns:
        Tuple of (final surrogate, trace). A solve failure that the offset
        rule cannot recover ends the loop with trace.status 'partial'.

    Raises:
        SamplingError: If a solve at an initial node fails; its ``partial``
            attribute holds the trace up to the failure
    """
    nodes = [complex(z) for z in (initial_nodes if initial_nodes is not None else region.endpoints)]
    _check_initial_nodes(nodes, region, budget)

    rhs = as_block(np.asarray(rhs, dtype=complex))
    rhs_norm = float(np.linalg.norm(rhs))

    def notify(event: str, payload: dict):
        if callback:
            callback(event, payload)

    trace = GreedyTrace()
    values = []
    for z in nodes:
        solution, _, event = _sample(problem, z, rhs, rhs_norm)
        if event != 'ok':
            trace.status = 'partial'
            raise SamplingError(f"Solve at initial node {z} failed ({event})", partial=trace)
        values.append(solution)
        record = SampleRecord(iteration=0, z=z, u_norm=float(np.linalg.norm(solution)))
        trace.samples.append(record)
        notify('sample', record.model_dump())

    samples = SampleSet(nodes, values)
    surrogate = build_surrogate(samples, mode)
    if surrogate.weight_ambiguous:
        trace.ambiguous_iterations.append(0)
    notify('surrogate', {'iteration': 0, 'size': samples.size, 'weight_ambiguous': surrogate.weight_ambiguous})
    logger.info(f"Initial surrogate from {samples.size} samples, budget {budget}")

    iteration = 0
    while samples.size < budget:
        iteration += 1
        candidates, ranked = rank_candidates(surrogate, region)
        index = int(np.argmax(ranked))
        if ranked[index] < 0:
            logger.error("Every candidate point coincides with a node", extra={"iteration": iteration})
            trace.status = 'partial'
            break

        requested = complex(candidates[index])
        value = float(ranked[index])
        if early_stop_tol is not None and value < early_stop_tol:
            logger.info(f"Indicator maximum {value:.3e} below {early_stop_tol:.3e}, stopping early")
            trace.status = 'converged'
            break

        z = requested
        solution, seconds, event = _sample(problem, z, rhs, rhs_norm)
        if solution is None:
            trace.suspects.append(requested)
            offset = _nearest_unused(candidates, ranked, index)
            if offset is None:
                trace.status = 'partial'
                break
            z = complex(candidates[offset])
            solution, seconds, _ = _sample(problem, z, rhs, rhs_norm)
            if solution is None:
                logger.error(f"Offset solve at z={z} failed as well; aborting", extra={"iteration": iteration})
                trace.suspects.append(z)
                trace.status = 'partial'
                break

        u_norm = float(np.linalg.norm(solution))
        step = GreedyStep(
            iteration=iteration,
            z=z,
            indicator=value,
            u_norm=u_norm,
            solve_seconds=seconds if record_timing else 0.0,
            event=event,
            requested_z=requested if z != requested else None,
        )
        record = SampleRecord(iteration=iteration, z=z, u_norm=u_norm, indicator=value)
        trace.steps.append(step)
        trace.samples.append(record)
        notify('sample', record.model_dump())

        samples = samples.with_sample(z, solution)
        surrogate = build_surrogate(samples, mode)
        if surrogate.weight_ambiguous:
            trace.ambiguous_iterations.append(iteration)
        notify('surrogate', {'iteration': iteration, 'size': samples.size, 'weight_ambiguous': surrogate.weight_ambiguous})

        logger.info(f"Iteration {iteration}: z*={z:.6g}, indicator={value:.3e}, |u|={u_norm:.3e} ({event})")

    trace.surrogate = surrogate
    return surrogate, trace

