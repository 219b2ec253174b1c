"""
Command-line front-end

    python -m nepmri solve --config run.json
    python -m nepmri validate --config run.json --run runs/example
    python -m nepmri list-problems [--json]
"""
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, List, Optional, Sequence
import argparse
import csv
import json
import logging
import sys

import numpy as np
from pydantic import ValidationError

from nepmri import __version__
from nepmri.config import MAX_WORKERS
from nepmri.eigrecover import extract_eigenpairs, filter_spurious
from nepmri.errors import ConfigError, DomainError, PoleProximityError, SamplingError, SolveError
from nepmri.greedy import greedy_loop, indicator, indicator_grid, residual_norm
from nepmri.models import EigenpairEstimate, GreedyTrace, RunConfig
from nepmri.mri import BarycentricSurrogate
from nepmri.registry import PROBLEM_REGISTRY, build_problem, describe_problems
from nepmri.utils import format_float

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3

SAMPLES_HEADER = ['iter', 'z_re', 'z_im', 'u_norm', 'indicator_at_choice']
EIGENPAIRS_HEADER = ['idx', 'lambda_re', 'lambda_im', 'residual', 'order_index', 'in_region', 'filtered']
TRACE_HEADER = ['iter', 'z_re', 'z_im', 'solve_seconds', 'event']
ERROR_HEADER = ['z_re', 'z_im', 'rel_error']
ESTIMATOR_HEADER = ['z_re', 'z_im', 'indicator']
RESIDUAL_HEADER = ['z_re', 'z_im', 'residual', 'indicator', 'product']

# Appended to trace.csv when the greedy loop aborted
ABORTED_ROW = ['-1', 'nan', 'nan', 'nan', 'aborted']


def load_config(path: Path) -> RunConfig:
    """
    Read and validate a JSON run configuration

    Raises:
        ConfigError: If the file cannot be read or is not valid JSON
        ValidationError: If the content does not describe a valid run
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
    return RunConfig.model_validate(data)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Wrote {path}")
    return path


def _complex_cells(z: complex) -> List[str]:
    return [format_float(z.real), format_float(z.imag)]


def samples_rows(trace: GreedyTrace) -> List[List[str]]:
    return [
        [str(record.iteration), *_complex_cells(record.z), format_float(record.u_norm),
         format_float(record.indicator if record.indicator is not None else float('nan'))]
        for record in trace.samples
    ]


def trace_rows(trace: GreedyTrace) -> List[List[str]]:
    rows = [
        [str(step.iteration), *_complex_cells(step.z), format_float(step.solve_seconds), step.event]
        for step in trace.steps
    ]
    if trace.status == 'partial':
        rows.append(list(ABORTED_ROW))
    return rows


def eigenpair_rows(estimates: Sequence[EigenpairEstimate]) -> List[List[str]]:
    return [
        [str(index), *_complex_cells(estimate.eigenvalue), format_float(estimate.residual),
         str(estimate.order_index), str(int(estimate.in_region)), str(int(estimate.filtered))]
        for index, estimate in enumerate(estimates)
    ]


def save_surrogate(path: Path, surrogate: BarycentricSurrogate) -> Path:
    np.savez(
        path,
        nodes=surrogate.nodes,
        weights=surrogate.weights,
        values=surrogate.values,
        mode=np.array(surrogate.normalization_mode),
        flags=np.array([surrogate.robust_fallback, surrogate.weight_ambiguous, surrogate.sum_degenerate]),
    )
    return path


def load_surrogate(path: Path) -> BarycentricSurrogate:
    """
    Raises:
        ConfigError: If the artifact is missing
    """
    if not Path(path).exists():
        raise ConfigError(f"No surrogate artifact at {path}; run 'solve' first")
    with np.load(path, allow_pickle=False) as data:
        robust_fallback, weight_ambiguous, sum_degenerate = (bool(flag) for flag in data['flags'])
        return BarycentricSurrogate(
            data['nodes'], data['weights'], data['values'],
            normalization_mode=str(data['mode']),
            robust_fallback=robust_fallback,
            weight_ambiguous=weight_ambiguous,
            sum_degenerate=sum_degenerate,
        )


def run_solve(config: RunConfig) -> int:
    """
    Greedy run followed by eigenpair extraction

    Writes resolved_config.json, samples.csv, trace.csv, eigenpairs.csv
    and surrogate.npz into config.output_dir.

    Returns:
        EXIT_OK, or EXIT_PARTIAL when the greedy loop aborted (a failed
        initial solve leaves only resolved_config.json, samples.csv and
        trace.csv)
    """
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / 'resolved_config.json').write_text(config.model_dump_json(indent=2) + "\n")

    problem = build_problem(config.problem)
    if config.dump_mesh:
        if hasattr(problem, 'dump_mesh'):
            logger.info(f"Wrote {problem.dump_mesh(output_dir / 'mesh.txt')}")
        else:
            logger.warning(f"Problem '{config.problem.name}' has no mesh to dump")

    rhs = problem.make_rhs(config.rhs)
    logger.info(f"Solving '{config.problem.name}' on {config.region.endpoints} with budget {config.budget}")
    try:
        surrogate, trace = greedy_loop(
            problem,
            rhs,
            config.region,
            config.budget,
            initial_nodes=config.start_nodes,
            mode=config.mode,
            early_stop_tol=config.early_stop_tol,
            record_timing=config.record_timing,
        )
    except SamplingError as e:
        logger.error(f"Sampling aborted: {e}")
        trace = e.partial if isinstance(e.partial, GreedyTrace) else GreedyTrace(status='partial')
        write_csv(output_dir / 'samples.csv', SAMPLES_HEADER, samples_rows(trace))
        write_csv(output_dir / 'trace.csv', TRACE_HEADER, trace_rows(trace))
        return EXIT_PARTIAL

    estimates = extract_eigenpairs(
        surrogate,
        config.region,
        problem,
        tol_cluster=config.tolerances.cluster,
        tol_region=config.tol_region,
        newton_tol=config.tolerances.newton,
    )
    if config.filtering:
        estimates = filter_spurious(estimates, config.tolerances.cluster)

    write_csv(output_dir / 'samples.csv', SAMPLES_HEADER, samples_rows(trace))
    write_csv(output_dir / 'trace.csv', TRACE_HEADER, trace_rows(trace))
    write_csv(output_dir / 'eigenpairs.csv', EIGENPAIRS_HEADER, eigenpair_rows(estimates))
    save_surrogate(output_dir / 'surrogate.npz', surrogate)

    in_region = sum(1 for e in estimates if e.in_region and not e.filtered)
    logger.info(f"Run {trace.status}: {trace.solve_count} solves, {in_region} eigenpairs in the region")
    return EXIT_PARTIAL if trace.status == 'partial' else EXIT_OK


def run_validate(config: RunConfig, run_dir: Path) -> int:
    """
    Compare a finished run's surrogate with exact solves

    Writes error.csv (relative error at the validation points, nan where
    the solve failed), residual.csv and estimator.csv (indicator on the
    candidate grid) into run_dir.
    """
    run_dir = Path(run_dir)
    surrogate = load_surrogate(run_dir / 'surrogate.npz')
    problem = build_problem(config.problem)
    rhs = problem.make_rhs(config.rhs)

    points = config.region.grid(config.validation_points)
    distances = np.abs(points[:, None] - surrogate.nodes[None, :])
    points = points[~np.any(distances <= surrogate.coincidence_radius, axis=1)]

    def evaluate(z: complex):
        try:
            exact = problem.solve(z, rhs)
            approximation = surrogate.eval_surrogate(z)
            error = np.linalg.norm(approximation - exact) / np.linalg.norm(exact)
            residual = residual_norm(problem, surrogate, z, rhs)
            product = residual * abs(surrogate.eval_denominator(z))
        except (SolveError, PoleProximityError, DomainError) as e:
            logger.warning(f"Validation failed at z={z}", extra={"error": str(e)})
            error = residual = product = float('nan')
        return z, float(error), float(residual), indicator(surrogate, z), float(product)

    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as pool:
        results = list(pool.map(evaluate, points))

    write_csv(run_dir / 'error.csv', ERROR_HEADER, [
        [*_complex_cells(z), format_float(error)] for z, error, _, _, _ in results
    ])
    write_csv(run_dir / 'residual.csv', RESIDUAL_HEADER, [
        [*_complex_cells(z), format_float(residual), format_float(rho), format_float(product)]
        for z, _, residual, rho, product in results
    ])

    fine_grid = config.region.candidates
    write_csv(run_dir / 'estimator.csv', ESTIMATOR_HEADER, [
        [*_complex_cells(z), format_float(rho)] for z, rho in zip(fine_grid, indicator_grid(surrogate, fine_grid))
    ])
    return EXIT_OK


def list_problems(as_json: bool = False) -> str:
    """Registry listing, as text or JSON with parameter schemas"""
    if as_json:
        return json.dumps(describe_problems(), indent=2)

    lines = []
    for name, entry in PROBLEM_REGISTRY.items():
        lines.append(f"{name}: {entry.description}")
        for field, info in entry.params.model_fields.items():
            default = "required" if info.is_required() else f"default {info.default!r}"
            lines.append(f"    {field} ({default})")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='nepmri', description="Greedy rational interpolation eigensolver")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('-v', '--verbose', action='store_true', help="Debug logging")
    commands = parser.add_subparsers(dest='command', required=True)

    solve = commands.add_parser('solve', help="Run the greedy eigensolver")
    solve.add_argument('--config', required=True, type=Path)

    validate = commands.add_parser('validate', help="Validate a finished run against exact solves")
    validate.add_argument('--config', required=True, type=Path)
    validate.add_argument('--run', required=True, type=Path, help="Output directory of the run")

    listing = commands.add_parser('list-problems', help="Show the problem registry")
    listing.add_argument('--json', action='store_true', help="Machine-readable output")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(levelname)-8s %(name)s - %(message)s',
        handlers=[logging.StreamHandler()],
    )

    try:
        if args.command == 'list-problems':
            print(list_problems(args.json))
            return EXIT_OK
        config = load_config(args.config)
        if args.command == 'solve':
            return run_solve(config)
        return run_validate(config, args.run)
    except (ValidationError, ConfigError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except SamplingError as e:
        logger.error(f"Sampling aborted: {e}")
        return EXIT_PARTIAL


if __name__ == '__main__':
    sys.exit(main())
