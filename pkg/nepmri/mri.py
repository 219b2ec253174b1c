"""
Minimal rational interpolation in barycentric form

A surrogate of u(z) = T(z)^-1 V is stored as

    u~(z) = n(z) / d(z),   n(z) = sum_j q_j U(z_j) / (z - z_j),
                           d(z) = sum_j q_j / (z - z_j),

which interpolates the samples for any nonzero weights. The weights are
chosen to make ||u~|| minimal at infinity, either with the constraint
sum_j q_j = 1 (closed form through the Gramian inverse) or with the robust
Euclidean normalization sum_j |q_j|^2 = 1 (smallest eigenvector of the
Gramian, read off the SVD of the stacked samples).
"""
from typing import NamedTuple, Optional, Sequence
import logging

import numpy as np

from nepmri.config import ACTIVE_WEIGHT_RTOL, NODE_COINCIDENCE_RTOL, SUM_DEGENERATE_TOL, WEIGHT_GAP_RTOL
from nepmri.errors import NearSingularError, NodeCoincidenceError, PoleProximityError
from nepmri.linalg import as_hermitian, hermitian_eig, solve_hermitian
from nepmri.models import NormalizationMode
from nepmri.utils import node_diameter

logger = logging.getLogger(__name__)


def _as_block(value: np.ndarray) -> np.ndarray:
    """View a sampled solution as an n x m block (vectors become one column)"""
    block = np.asarray(value, dtype=complex)
    if block.ndim == 1:
        block = block[:, None]
    if block.ndim != 2:
        raise ValueError(f"Sample values must be vectors or n x m blocks, got shape {block.shape}")
    return block


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


def _check_distinct(nodes: np.ndarray) -> None:
    if nodes.size < 2:
        return
    gaps = np.abs(nodes[:, None] - nodes[None, :])
    np.fill_diagonal(gaps, np.inf)
    if np.min(gaps) <= NODE_COINCIDENCE_RTOL * node_diameter(nodes):
        raise ValueError("Interpolation nodes must be pairwise distinct")


class SampleSet:
    """
    Sample points z_1..z_S with the solution blocks U(z_j) of shape n x m

    Instances are immutable; ``with_sample`` returns an extended copy.
    """

    def __init__(self, nodes: Sequence[complex], values: Sequence[np.ndarray]):
        nodes = np.asarray(nodes, dtype=complex).ravel()
        blocks = [_as_block(value) for value in values]

        if nodes.size < 2:
            raise ValueError("A sample set needs at least two samples")
        if len(blocks) != nodes.size:
            raise ValueError(f"{nodes.size} nodes but {len(blocks)} sampled values")
        if len({block.shape for block in blocks}) != 1:
            raise ValueError("All sampled blocks must share the same shape")
        _check_distinct(nodes)

        self.nodes = _frozen(nodes)
        self.values = _frozen(np.stack(blocks))

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def columns(self) -> int:
        return self.values.shape[2]

    def with_sample(self, z: complex, value: np.ndarray) -> 'SampleSet':
        """Return a new sample set with (z, value) appended"""
        return SampleSet(np.append(self.nodes, complex(z)), list(self.values) + [_as_block(value)])


class WeightResult(NamedTuple):
    """Barycentric weights plus the flags raised while computing them"""
    weights: np.ndarray
    mode: NormalizationMode  # normalization the weights actually satisfy
    robust_fallback: bool
    weight_ambiguous: bool
    sum_degenerate: bool


def build_gramian(samples: SampleSet) -> np.ndarray:
    """
    Gramian of the samples, G_ij = <U(z_i), U(z_j)>

    Blocks are compared with the Frobenius inner product, which reduces to
    the Euclidean one for single-column samples.
    """
    flat = samples.values.reshape(samples.size, -1)
    return as_hermitian(flat.conj() @ flat.T)


def _normalize_phase(vector: np.ndarray) -> np.ndarray:
    """Rotate a vector so that its largest entry is real and positive"""
    pivot = vector[np.argmax(np.abs(vector))]
    return vector * (abs(pivot) / pivot)


def _smallest_eigenvector(G: np.ndarray):
    eigenvalues, eigenvectors = hermitian_eig(G)
    return _normalize_phase(eigenvectors[:, 0].astype(complex)), _gap_is_ambiguous(eigenvalues)


def _gap_is_ambiguous(eigenvalues: np.ndarray) -> bool:
    """Whether the smallest Gramian eigenvalue fails to separate from the next one"""
    trace = float(np.sum(np.abs(eigenvalues)))
    return bool(eigenvalues[1] - eigenvalues[0] <= WEIGHT_GAP_RTOL * trace)


def _smallest_singular_vector(samples: SampleSet):
    """
    Last right singular vector of the stacked sample matrix [U(z_1) ... U(z_S)]

    Same direction as the smallest Gramian eigenvector, without squaring the
    condition number. A QR step first reduces the tall sample matrix to its
    S x S triangular factor.
    """
    stacked = samples.values.reshape(samples.size, -1).T
    if not np.any(stacked.imag):
        stacked = stacked.real
    R = np.linalg.qr(stacked, mode='r')
    _, singular_values, Vh = np.linalg.svd(R, full_matrices=True)

    # Gramian eigenvalues, padded with zeros when there are fewer rows than samples
    eigenvalues = np.zeros(samples.size)
    eigenvalues[:singular_values.size] = singular_values ** 2
    eigenvalues.sort()
    return _normalize_phase(Vh[-1].conj().astype(complex)), _gap_is_ambiguous(eigenvalues)


def mri_weights(
    G: np.ndarray,
    mode: NormalizationMode = 'euclidean',
    samples: Optional[SampleSet] = None,
) -> WeightResult:
    """
    Barycentric weights of the minimal rational interpolant

    Args:
        G: Gramian of order S >= 2
        mode: 'euclidean' (unit-norm smallest eigenvector) or
            'constrained_sum' (G^-1 1 / 1^H G^-1 1, falling back to the
            Euclidean solution rescaled to unit sum when G is singular)
        samples: The samples G was built from; when given, the Euclidean
            direction is taken from their SVD instead of from G

    Returns:
        WeightResult; ``robust_fallback`` marks the constrained mode falling
        back, ``sum_degenerate`` marks a fallback whose weights cannot be
        rescaled to unit sum (they stay unit-norm, mode 'euclidean')
    """
    G = as_hermitian(G)
    S = G.shape[0]
    if S < 2:
        raise ValueError(f"Minimal rational interpolation needs at least 2 samples, got {S}")
    if samples is not None and samples.size != S:
        raise ValueError(f"Gramian of order {S} does not match {samples.size} samples")

    def smallest():
        if samples is not None:
            return _smallest_singular_vector(samples)
        return _smallest_eigenvector(G)

    if mode == 'euclidean':
        weights, ambiguous = smallest()
        return WeightResult(weights, 'euclidean', False, ambiguous, False)

    if mode != 'constrained_sum':
        raise ValueError(f"Unknown normalization mode: {mode}")

    ones = np.ones(S, dtype=complex)
    try:
        x = solve_hermitian(G, ones)
        total = np.vdot(ones, x)
        if total != 0:
            return WeightResult((x / total).astype(complex), 'constrained_sum', False, False, False)
    except NearSingularError as e:
        logger.warning("Gramian is singular, falling back to the robust normalization", extra={"rcond": e.rcond})

    weights, ambiguous = smallest()
    total = np.sum(weights)
    if abs(total) > SUM_DEGENERATE_TOL:
        return WeightResult(weights / total, 'constrained_sum', True, ambiguous, False)

    logger.warning(f"Robust weights sum to {abs(total):.3e}; keeping the Euclidean normalization")
    return WeightResult(weights, 'euclidean', True, ambiguous, True)


class BarycentricSurrogate:
    """
    Rational surrogate u~ = n/d in barycentric form

    Surrogates are immutable; every evaluation is a pure function of z.
    Nodes whose weight is negligible (|q_j| <= 1e-14 max|q|) are inactive:
    they no longer interpolate and are ignored by pole extraction.
    """

    def __init__(
        self,
        nodes: Sequence[complex],
        weights: Sequence[complex],
        values: Sequence[np.ndarray],
        normalization_mode: NormalizationMode = 'euclidean',
        robust_fallback: bool = False,
        weight_ambiguous: bool = False,
        sum_degenerate: bool = False,
    ):
        nodes = np.asarray(nodes, dtype=complex).ravel()
        weights = np.asarray(weights, dtype=complex).ravel()
        blocks = np.stack([_as_block(value) for value in values])

        if not (nodes.size == weights.size == blocks.shape[0]) or nodes.size == 0:
            raise ValueError("Nodes, weights and values must be non-empty and of equal length")
        if not np.any(weights):
            raise ValueError("Barycentric weights must not all be zero")
        _check_distinct(nodes)

        self.nodes = _frozen(nodes)
        self.weights = _frozen(weights)
        self.values = _frozen(blocks)
        self.normalization_mode = normalization_mode
        self.robust_fallback = robust_fallback
        self.weight_ambiguous = weight_ambiguous
        self.sum_degenerate = sum_degenerate

        self.diameter = node_diameter(nodes)
        self.coincidence_radius = NODE_COINCIDENCE_RTOL * self.diameter
        self.active = _frozen(np.abs(weights) > ACTIVE_WEIGHT_RTOL * np.max(np.abs(weights)))

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def columns(self) -> int:
        return self.values.shape[2]

    @property
    def values_norm(self) -> float:
        """Frobenius norm of all stored samples"""
        return float(np.linalg.norm(self.values))

    def scaled(self, factor: complex) -> 'BarycentricSurrogate':
        """Same rational function with weights multiplied by ``factor``"""
        return BarycentricSurrogate(
            self.nodes,
            factor * self.weights,
            self.values,
            normalization_mode=self.normalization_mode,
            robust_fallback=self.robust_fallback,
            weight_ambiguous=self.weight_ambiguous,
            sum_degenerate=self.sum_degenerate,
        )

    def node_index(self, z: complex) -> Optional[int]:
        """Index of the active node coinciding with z, if any"""
        distances = np.abs(self.nodes - z)
        candidates = np.flatnonzero(self.active & (distances <= self.coincidence_radius))
        if candidates.size == 0:
            return None
        return int(candidates[np.argmin(distances[candidates])])

    def _inverse_distances(self, z: complex) -> np.ndarray:
        with np.errstate(divide='ignore', invalid='ignore'):
            inverse = 1.0 / (z - self.nodes)
        # Inactive nodes hit exactly contribute 0/0; drop them
        inverse[~np.isfinite(inverse)] = 0.0
        return inverse

    def _terms(self, z: complex) -> np.ndarray:
        index = self.node_index(z)
        if index is not None:
            raise NodeCoincidenceError(index, z)
        return self.weights * self._inverse_distances(z)

    def eval_denominator(self, z: complex) -> complex:
        """d(z) = sum_j q_j / (z - z_j)"""
        return complex(np.sum(self._terms(z)))

    def eval_denominator_derivative(self, z: complex) -> complex:
        """d'(z) = -sum_j q_j / (z - z_j)^2"""
        return complex(-np.sum(self._terms(z) * self._inverse_distances(z)))

    def eval_numerator(self, z: complex) -> np.ndarray:
        """n(z) = sum_j q_j U(z_j) / (z - z_j) as an n x m block"""
        return np.tensordot(self._terms(z), self.values, axes=1)

    def eval_surrogate(self, z: complex) -> np.ndarray:
        """
        u~(z) = n(z) / d(z)

        Returns the stored sample itself at an (active) node.

        Raises:
            PoleProximityError: If z is numerically a pole of the surrogate
        """
        index = self.node_index(z)
        if index is not None:
            return self.values[index]

        terms = self.weights * self._inverse_distances(z)
        denominator = np.sum(terms)
        if denominator == 0 or not np.isfinite(denominator):
            raise PoleProximityError(z)
        with np.errstate(over='ignore', invalid='ignore'):
            result = np.tensordot(terms, self.values, axes=1) / denominator
        if not np.all(np.isfinite(result)):
            raise PoleProximityError(z)
        return result

    def denominator_grid(self, points: np.ndarray) -> np.ndarray:
        """Vectorized d(z) over many points; infinite at active nodes"""
        points = np.asarray(points, dtype=complex).ravel()
        with np.errstate(divide='ignore', invalid='ignore'):
            inverse = 1.0 / (points[:, None] - self.nodes[None, :])
        inverse[:, ~self.active] = np.where(np.isfinite(inverse[:, ~self.active]), inverse[:, ~self.active], 0.0)
        distances = np.abs(points[:, None] - self.nodes[None, :])
        at_node = np.any((distances <= self.coincidence_radius) & self.active[None, :], axis=1)

        denominator = np.empty(points.size, dtype=complex)
        finite_rows = ~at_node
        denominator[finite_rows] = inverse[finite_rows] @ self.weights
        denominator[at_node] = np.inf
        return denominator


def build_surrogate(samples: SampleSet, mode: NormalizationMode = 'euclidean') -> BarycentricSurrogate:
    """
    Build the minimal rational interpolant of a sample set

    Args:
        samples: Sampled solution blocks
        mode: Weight normalization (see ``mri_weights``)

    Returns:
        The barycentric surrogate, carrying the weight flags
    """
    result = mri_weights(build_gramian(samples), mode, samples=samples)
    if result.weight_ambiguous:
        logger.warning(f"Smallest Gramian eigenvalue is not isolated (S={samples.size}); weights are ambiguous")

    return BarycentricSurrogate(
        samples.nodes,
        result.weights,
        samples.values,
        normalization_mode=result.mode,
        robust_fallback=result.robust_fallback,
        weight_ambiguous=result.weight_ambiguous,
        sum_degenerate=result.sum_degenerate,
    )
