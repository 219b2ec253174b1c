"""
Small dense linear-algebra kernels for the surrogate and pole machinery

Every matrix handled here has order S (the number of samples), never the
problem dimension n.
"""
from typing import List, NamedTuple, Tuple
import logging

import numpy as np
import scipy.linalg

from nepmri.config import AT_INFINITY_FACTOR, DEFAULT_NEWTON_MAX_ITER, DEFAULT_NEWTON_TOL, SINGULAR_RCOND
from nepmri.errors import DegeneratePencilError, EigenDecompositionError, NearSingularError
from nepmri.utils import node_diameter

logger = logging.getLogger(__name__)

# Reduced pencils whose B block has a smaller singular value are treated as
# singular (sum of weights zero) and solved in generalized form
_STANDARD_FORM_MIN_SIGMA = 1e-10


class NewtonResult(NamedTuple):
    """Outcome of Newton polishing on a barycentric denominator"""
    root: complex
    iterations: int
    converged: bool
    no_progress: bool


def as_hermitian(G: np.ndarray) -> np.ndarray:
    """
    Rebuild a Hermitian matrix from its upper triangle

    The lower triangle is ignored and the diagonal is made real, so the
    result is Hermitian exactly as stored.
    """
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] < 1:
        raise ValueError(f"Expected a non-empty square matrix, got shape {G.shape}")
    upper = np.triu(G, 1)
    H = upper + upper.conj().T + np.diag(np.real(np.diag(G)))
    if np.iscomplexobj(H) and np.all(H.imag == 0):
        H = H.real
    return H


def hermitian_eig(G: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition G = V diag(w) V^H with ascending eigenvalues

    Real symmetric input stays in real arithmetic, so eigenvectors of real
    Gramians come out real.

    Args:
        G: Hermitian matrix (upper triangle is authoritative)

    Returns:
        Tuple of (eigenvalues ascending, eigenvectors as columns)

    Raises:
        EigenDecompositionError: If LAPACK fails to converge
    """
    H = as_hermitian(G)
    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(H)
    except np.linalg.LinAlgError as e:
        raise EigenDecompositionError(f"Hermitian eigensolver did not converge (order {H.shape[0]}): {e}") from e
    return eigenvalues, eigenvectors


def reciprocal_condition(G: np.ndarray) -> float:
    """Reciprocal 2-norm condition number (0 for a zero matrix)"""
    singular_values = np.linalg.svd(np.asarray(G), compute_uv=False)
    if singular_values[0] == 0:
        return 0.0
    return float(singular_values[-1] / singular_values[0])


def solve_hermitian(G: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Solve G x = b for Hermitian G

    Raises:
        NearSingularError: If the reciprocal condition number is below the
            singularity threshold; callers fall back to the robust mode
    """
    H = as_hermitian(G)
    b = np.asarray(b)
    if b.shape[0] != H.shape[0]:
        raise ValueError(f"Right-hand side of length {b.shape[0]} does not match order {H.shape[0]}")

    rcond = reciprocal_condition(H)
    if rcond < SINGULAR_RCOND:
        raise NearSingularError(rcond)

    return scipy.linalg.solve(H, b, assume_a='her')


def denominator_and_derivative(nodes: np.ndarray, weights: np.ndarray, z: complex) -> Tuple[complex, complex]:
    """Evaluate d(z) = sum q_j/(z - z_j) and d'(z) = -sum q_j/(z - z_j)^2"""
    inverse = 1.0 / (z - nodes)
    terms = weights * inverse
    return complex(np.sum(terms)), complex(-np.sum(terms * inverse))


def _real_if_possible(values: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(values) and np.all(values.imag == 0):
        return values.real
    return values


def arrowhead_pole_eigs(nodes, weights) -> List[complex]:
    """
    Finite eigenvalues of the barycentric arrowhead pencil

    The constraint row forces sum_j q_j w_j = 0 and the remaining rows force
    (Z - lambda) w to be parallel to the all-ones vector. Restricting w to
    the complement P of the weight row and projecting out the all-ones
    direction with C gives the (S-1)x(S-1) pencil (C Z P, C P), whose
    eigenvalues are exactly the roots of sum_j q_j/(lambda - z_j).

    Args:
        nodes: S distinct support points
        weights: S barycentric weights, not all zero

    Returns:
        Finite eigenvalues (at most S-1, with multiplicity), unpolished;
        values farther than 1e8 node diameters from the nodes count as infinite

    Raises:
        DegeneratePencilError: If all weights vanish
    """
    nodes = np.asarray(nodes, dtype=complex).ravel()
    weights = np.asarray(weights, dtype=complex).ravel()
    if nodes.size != weights.size:
        raise ValueError(f"{nodes.size} nodes but {weights.size} weights")

    scale = np.max(np.abs(weights)) if weights.size else 0.0
    if scale == 0:
        raise DegeneratePencilError("All barycentric weights are zero")

    S = nodes.size
    if S < 2:
        return []

    q = _real_if_possible(weights / scale)
    z = _real_if_possible(nodes)

    P = scipy.linalg.null_space(q[None, :])
    C = scipy.linalg.null_space(np.ones((1, S))).T
    A = C @ (z[:, None] * P)
    B = C @ P

    # C and P have orthonormal rows/columns, so the singular values of B lie in [0, 1]
    if np.linalg.svd(B, compute_uv=False)[-1] > _STANDARD_FORM_MIN_SIGMA:
        eigenvalues = np.linalg.eigvals(np.linalg.solve(B, A))
    else:
        # Sum of weights (numerically) zero: the pencil has infinite eigenvalues
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            eigenvalues = scipy.linalg.eigvals(A, B)
        eigenvalues = eigenvalues[np.isfinite(eigenvalues)]

    center = np.mean(nodes)
    limit = AT_INFINITY_FACTOR * node_diameter(nodes)
    finite = [complex(value) for value in eigenvalues if abs(value - center) <= limit]
    if len(finite) < len(eigenvalues):
        logger.debug(f"Discarded {len(eigenvalues) - len(finite)} pencil eigenvalues at infinity")
    return finite


def newton_polish_root(
    nodes,
    weights,
    lam0: complex,
    max_iter: int = DEFAULT_NEWTON_MAX_ITER,
    tol: float = DEFAULT_NEWTON_TOL,
) -> NewtonResult:
    """
    Polish a root of the barycentric denominator by Newton iteration

    Iteration stops once the Newton correction |d/d'| drops to ``tol``. If
    that never happens the iterate with the smallest correction is returned
    (or lam0 itself when nothing improved on it), with ``converged`` unset.

    Args:
        nodes: Support points
        weights: Barycentric weights
        lam0: Starting guess
        max_iter: Iteration cap
        tol: Absolute tolerance on the Newton correction

    Returns:
        NewtonResult with the polished root and diagnostics
    """
    nodes = np.asarray(nodes, dtype=complex).ravel()
    weights = np.asarray(weights, dtype=complex).ravel()
    lam0 = complex(lam0)

    with np.errstate(divide='ignore', invalid='ignore'):
        d, d_prime = denominator_and_derivative(nodes, weights, lam0)
    if not (np.isfinite(d) and np.isfinite(d_prime)) or d_prime == 0:
        return NewtonResult(lam0, 0, False, True)

    step = d / d_prime
    if abs(step) <= tol:
        return NewtonResult(lam0, 0, True, False)

    best_root, best_step = lam0, abs(step)
    lam = lam0
    for iteration in range(1, max_iter + 1):
        lam = lam - step
        with np.errstate(divide='ignore', invalid='ignore'):
            d, d_prime = denominator_and_derivative(nodes, weights, lam)
        if not (np.isfinite(d) and np.isfinite(d_prime)) or d_prime == 0:
            break

        step = d / d_prime
        if abs(step) <= tol:
            return NewtonResult(lam, iteration, True, False)
        if abs(step) < best_step:
            best_root, best_step = lam, abs(step)

    if best_root == lam0:
        logger.debug(f"Newton polishing made no progress from {lam0}")
        return NewtonResult(lam0, max_iter, False, True)
    return NewtonResult(best_root, max_iter, False, False)
