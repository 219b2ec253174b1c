"""
Poles and residues of barycentric surrogates

Poles come from the arrowhead pencil, polished by Newton iteration on the
denominator and merged into clusters; a cluster of N pencil eigenvalues is
one pole of order N. Simple poles get the closed-form residue n/d'. Higher
orders get their Laurent coefficients from trapezoid quadrature on a small
circle around the pole.
"""
from typing import List, Optional, Sequence
import logging

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from nepmri.config import (
    DEFAULT_NEWTON_MAX_ITER, DEFAULT_NEWTON_TOL, DEFAULT_TOL_CLUSTER,
    LAURENT_POINTS, RESIDUE_RTOL,
)
from nepmri.errors import ContourError, ResidueError
from nepmri.linalg import arrowhead_pole_eigs, newton_polish_root
from nepmri.models import PoleReport
from nepmri.mri import BarycentricSurrogate

logger = logging.getLogger(__name__)


def _sort_key(value: complex):
    return (value.real, value.imag)


def cluster_indices(values: Sequence[complex], tol_cluster: float) -> List[List[int]]:
    """
    Single-linkage clusters of complex values, as lists of indices

    Two values link when |a - b| <= tol_cluster * (1 + max(|a|, |b|)).
    Members are ordered by (real, imag) and clusters by their first member.
    """
    if tol_cluster <= 0:
        raise ValueError("Clustering tolerance must be positive")

    values = np.asarray(values, dtype=complex).ravel()
    if values.size == 0:
        return []

    gaps = np.abs(values[:, None] - values[None, :])
    scale = 1.0 + np.maximum(np.abs(values)[:, None], np.abs(values)[None, :])
    _, labels = connected_components(csr_matrix(gaps <= tol_cluster * scale), directed=False)

    groups = {}
    for index, label in enumerate(labels):
        groups.setdefault(label, []).append(index)

    clusters = [sorted(members, key=lambda i: (_sort_key(values[i]), i)) for members in groups.values()]
    clusters.sort(key=lambda members: (_sort_key(values[members[0]]), members[0]))
    return clusters


def cluster_poles(raw: Sequence[complex], tol_cluster: float = DEFAULT_TOL_CLUSTER) -> List[List[complex]]:
    """Single-linkage clustering of raw pencil eigenvalues"""
    raw = [complex(value) for value in raw]
    return [[raw[i] for i in members] for members in cluster_indices(raw, tol_cluster)]


def find_poles(
    surrogate: BarycentricSurrogate,
    tol_cluster: float = DEFAULT_TOL_CLUSTER,
    newton_tol: float = DEFAULT_NEWTON_TOL,
    max_iter: int = DEFAULT_NEWTON_MAX_ITER,
) -> List[PoleReport]:
    """
    Poles of the surrogate, with provisional orders and no residues

    Args:
        surrogate: Barycentric surrogate
        tol_cluster: Relative single-linkage tolerance merging pencil
            eigenvalues into one pole
        newton_tol: Relative tolerance of the Newton polishing step
        max_iter: Newton iteration cap

    Returns:
        PoleReports sorted by real then imaginary part (possibly empty)
    """
    active = surrogate.active
    if np.count_nonzero(active) < 2:
        return []

    nodes = surrogate.nodes[active]
    weights = surrogate.weights[active]
    finite = arrowhead_pole_eigs(nodes, weights)

    polished = [
        newton_polish_root(nodes, weights, value, max_iter=max_iter, tol=newton_tol * (1 + abs(value)))
        for value in finite
    ]
    roots = [result.root for result in polished]

    reports = []
    for members in cluster_indices(roots, tol_cluster):
        member_roots = [roots[i] for i in members]
        reports.append(PoleReport(
            pole=complex(np.mean(member_roots)),
            order=len(members),
            polish_displacement=float(max(abs(roots[i] - finite[i]) for i in members)),
            cluster_members=member_roots,
            newton_converged=all(polished[i].converged for i in members),
        ))

    reports.sort(key=lambda report: _sort_key(report.pole))
    return reports


def simple_residue(surrogate: BarycentricSurrogate, lam: complex) -> np.ndarray:
    """
    Residue n(lam)/d'(lam) at a simple pole

    Raises:
        ResidueError: If d'(lam) underflows (the pole is not simple; use
            ``laurent_residues``)
    """
    derivative = surrogate.eval_denominator_derivative(lam)
    if not np.isfinite(derivative) or abs(derivative) < np.finfo(float).tiny:
        raise ResidueError(f"d'({lam}) underflows; the pole is not simple, use laurent_residues")
    return surrogate.eval_numerator(lam) / derivative


def _obstacle_distance(surrogate: BarycentricSurrogate, lam: complex, other_poles: Sequence[complex]) -> float:
    obstacles = np.concatenate([surrogate.nodes[surrogate.active], np.asarray(other_poles, dtype=complex)])
    return float(np.min(np.abs(obstacles - lam)))


def default_contour_radius(
    surrogate: BarycentricSurrogate,
    lam: complex,
    other_poles: Sequence[complex] = (),
) -> float:
    """min(0.1 * distance to the nearest other pole or node, 1e-2 * node-set diameter)"""
    return min(0.1 * _obstacle_distance(surrogate, lam, other_poles), 1e-2 * surrogate.diameter)


def laurent_residues(
    surrogate: BarycentricSurrogate,
    lam: complex,
    order: int,
    radius: Optional[float] = None,
    points: int = LAURENT_POINTS,
    other_poles: Sequence[complex] = (),
) -> List[np.ndarray]:
    """
    Laurent coefficients r_1..r_N of the surrogate at lam

    r_k = (1/2 pi i) \\oint u~(z) (z - lam)^(k-1) dz over |z - lam| = radius,
    discretized by the ``points``-point trapezoid rule.

    Args:
        surrogate: Barycentric surrogate
        lam: Pole location
        order: Number N of coefficients
        radius: Circle radius (default: ``default_contour_radius``)
        points: Quadrature points, at least 8N
        other_poles: Remaining poles, which the circle must not enclose

    Raises:
        ContourError: If the circle reaches another pole or an active node
    """
    if order == 0:
        return []
    if order < 0:
        raise ValueError("Pole order must be non-negative")
    if points < 8 * order:
        raise ValueError(f"Need at least {8 * order} quadrature points for order {order}, got {points}")

    lam = complex(lam)
    nearest = _obstacle_distance(surrogate, lam, other_poles)
    if radius is None:
        radius = min(0.1 * nearest, 1e-2 * surrogate.diameter)
    if radius <= 0:
        raise ValueError("Contour radius must be positive")
    if nearest <= radius:
        raise ContourError(f"Circle of radius {radius:.3e} around {lam} reaches another pole or node", 0.5 * nearest)

    offsets = radius * np.exp(2j * np.pi * np.arange(points) / points)
    values = np.stack([surrogate.eval_surrogate(lam + offset) for offset in offsets])
    return [np.tensordot(offsets ** k, values, axes=1) / points for k in range(1, order + 1)]


def attach_residues(
    surrogate: BarycentricSurrogate,
    reports: Sequence[PoleReport],
    points: int = LAURENT_POINTS,
) -> List[PoleReport]:
    """
    Fill in the residues of every pole report

    Orders whose leading coefficient vanishes (relative to the others) are
    demoted until the leading coefficient is genuine.
    """
    filled = []
    for report in reports:
        others = [other.pole for other in reports if other is not report]

        if report.order == 1:
            try:
                residues = [simple_residue(surrogate, report.pole)]
            except ResidueError as e:
                logger.debug(f"{e}; switching to quadrature")
                residues = _quadrature_residues(surrogate, report.pole, 1, points, others)
        else:
            residues = _quadrature_residues(surrogate, report.pole, report.order, points, others)
            norms = [np.linalg.norm(residue) for residue in residues]
            while len(residues) > 1 and norms[-1] <= RESIDUE_RTOL * max(norms):
                residues.pop()
                norms.pop()
            if len(residues) < report.order:
                logger.debug(f"Pole {report.pole} demoted from order {report.order} to {len(residues)}")

        filled.append(report.model_copy(update={'residues': residues, 'order': len(residues)}))
    return filled


def _quadrature_residues(surrogate, lam, order, points, others) -> List[np.ndarray]:
    try:
        return laurent_residues(surrogate, lam, order, points=points, other_poles=others)
    except ContourError as e:
        logger.debug(f"{e}; retrying with the suggested radius")
        return laurent_residues(surrogate, lam, order, radius=e.suggested_radius, points=points, other_poles=others)


def poles_and_residues(
    surrogate: BarycentricSurrogate,
    tol_cluster: float = DEFAULT_TOL_CLUSTER,
    newton_tol: float = DEFAULT_NEWTON_TOL,
) -> List[PoleReport]:
    """find_poles followed by attach_residues"""
    return attach_residues(surrogate, find_poles(surrogate, tol_cluster=tol_cluster, newton_tol=newton_tol))
