"""
Eigenpair estimates from surrogate poles and residues

Near an eigenvalue the residues of u(z) = T(z)^-1 V point along
eigenvectors, so every pole-residue pair of the surrogate yields an
estimate (lambda, w) that is then checked against T(lambda) w = 0.
"""
from typing import List, Optional, Sequence
import logging

import numpy as np

from nepmri.config import DEFAULT_NEWTON_TOL, DEFAULT_TOL_CLUSTER, REGION_RTOL, RESIDUE_RTOL
from nepmri.errors import DomainError
from nepmri.models import EigenpairEstimate, PoleReport, Region
from nepmri.mri import BarycentricSurrogate
from nepmri.polres import cluster_indices, poles_and_residues
from nepmri.problems import NEPProblem

logger = logging.getLogger(__name__)


def residue_direction(residue: np.ndarray) -> np.ndarray:
    """Unit eigenvector estimate: r/||r|| for one column, dominant left singular vector otherwise"""
    block = np.asarray(residue, dtype=complex)
    if block.ndim == 1 or block.shape[1] == 1:
        vector = block.ravel()
        return vector / np.linalg.norm(vector)
    left, _, _ = np.linalg.svd(block, full_matrices=False)
    return left[:, 0]


def verify_residual(problem: NEPProblem, lam: complex, w: np.ndarray) -> float:
    """
    ||T(lam) w|| from a single operator application

    Raises:
        DomainError: If the problem cannot be evaluated at lam
    """
    return float(np.linalg.norm(problem.apply_T(lam, np.asarray(w)[:, None])))


def extract_eigenpairs(
    surrogate: BarycentricSurrogate,
    region: Region,
    problem: NEPProblem,
    tol_cluster: float = DEFAULT_TOL_CLUSTER,
    tol_region: Optional[float] = None,
    newton_tol: float = DEFAULT_NEWTON_TOL,
    reports: Optional[Sequence[PoleReport]] = None,
) -> List[EigenpairEstimate]:
    """
    One estimate per pole and non-negligible residue

    Args:
        surrogate: Final surrogate
        region: Search region, for the in-region flag
        problem: Problem provider, for residual verification
        tol_cluster: Pole clustering tolerance
        tol_region: Absolute membership margin (default 1e-8 * region length)
        newton_tol: Relative Newton tolerance for pole polishing
        reports: Precomputed pole reports (computed from the surrogate if None)

    Returns:
        Estimates sorted by real part, then imaginary part, then order index
    """
    if tol_region is None:
        tol_region = REGION_RTOL * region.length
    if reports is None:
        reports = poles_and_residues(surrogate, tol_cluster=tol_cluster, newton_tol=newton_tol)

    threshold = RESIDUE_RTOL * surrogate.values_norm
    estimates = []
    for report in reports:
        for k, residue in enumerate(report.residues, start=1):
            if np.linalg.norm(residue) <= threshold:
                continue

            lam = complex(report.pole)
            w = residue_direction(residue)
            try:
                residual = verify_residual(problem, lam, w)
            except DomainError as e:
                logger.warning(f"Cannot verify the estimate at {lam}", extra={"error": str(e)})
                residual = float('inf')

            estimates.append(EigenpairEstimate(
                eigenvalue=lam,
                eigenvector=w,
                residual=residual,
                order_index=k,
                in_region=bool(region.distance(lam) <= tol_region),
                source_pole=report,
            ))

    estimates.sort(key=lambda e: (e.eigenvalue.real, e.eigenvalue.imag, e.order_index))
    logger.info(f"Extracted {len(estimates)} eigenpair estimates from {len(reports)} poles")
    return estimates


def filter_spurious(estimates: Sequence[EigenpairEstimate], tol_cluster: float = DEFAULT_TOL_CLUSTER) -> List[EigenpairEstimate]:
    """
    Flag near-duplicate estimates

    Estimates are clustered by eigenvalue; in each cluster the one with the
    smallest residual stays unfiltered and the rest are flagged. Nothing is
    removed and the input order is kept.
    """
    estimates = list(estimates)
    flags = [True] * len(estimates)
    for members in cluster_indices([e.eigenvalue for e in estimates], tol_cluster):
        keep = min(members, key=lambda i: (estimates[i].residual, i))
        flags[keep] = False

    return [
        estimate if estimate.filtered == flag else estimate.model_copy(update={'filtered': flag})
        for estimate, flag in zip(estimates, flags)
    ]
