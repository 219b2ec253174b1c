"""
Nonlinear eigenproblem providers

A provider exposes T(z) only through its action and its inverse action:
apply_T(z, X) = T(z) X and solve(z, B) = T(z)^-1 B. Nothing else of the
problem is visible to the solver.
"""
from abc import ABC, abstractmethod
from typing import Optional, Sequence
import logging

import numpy as np
import scipy.linalg

from nepmri.cache import OperatorCache
from nepmri.config import OPERATOR_CACHE_SIZE
from nepmri.errors import ConfigError, SolveError
from nepmri.models import RhsConfig

logger = logging.getLogger(__name__)


def as_block(X: np.ndarray) -> np.ndarray:
    """View vectors as single-column blocks"""
    X = np.asarray(X)
    return X[:, None] if X.ndim == 1 else X


class NEPProblem(ABC):
    """Matrix-valued function T(z) of a nonlinear eigenproblem T(lambda) w = 0"""

    name = "abstract"

    @abstractmethod
    def dim(self) -> int:
        """Problem dimension n"""

    @abstractmethod
    def apply_T(self, z: complex, X: np.ndarray) -> np.ndarray:
        """T(z) X for an n x m block X"""

    @abstractmethod
    def solve(self, z: complex, B: np.ndarray) -> np.ndarray:
        """
        T(z)^-1 B for an n x m block B

        Raises:
            SolveError: If T(z) is singular
        """

    def analyticity_hint(self) -> Optional[str]:
        """Description of points where T is not analytic, if any"""
        return None

    def inlet_load(self) -> np.ndarray:
        raise ConfigError(f"Problem '{self.name}' has no inlet load")

    def make_rhs(self, rhs: RhsConfig) -> np.ndarray:
        """
        Build the right-hand side block V described by the configuration

        Returns:
            Complex n x m array
        """
        n, m = self.dim(), rhs.columns
        if rhs.kind == 'ones':
            return np.ones((n, m), dtype=complex)
        if rhs.kind == 'gaussian':
            return np.random.default_rng(rhs.seed).standard_normal((n, m)).astype(complex)
        if m != 1:
            raise ConfigError("The inlet load is a single right-hand side; set rhs.columns to 1")
        return as_block(self.inlet_load()).astype(complex)


class DiagRationalProblem(NEPProblem):
    """
    T(z) = diag(z - p_1, ..., z - p_K, 1, ..., 1)

    With v = (1, ..., 1, 0, ..., 0), u(z) has simple poles exactly at p_j
    with residues e_j, which makes it an oracle with known eigenpairs.
    """

    name = "diag_rational"

    def __init__(self, poles: Sequence[complex], dim: Optional[int] = None):
        poles = np.asarray(poles, dtype=complex).ravel()
        if poles.size == 0:
            raise ValueError("At least one pole is required")
        if np.unique(poles).size != poles.size:
            raise ValueError("Poles must be distinct")
        dim = poles.size if dim is None else dim
        if dim < poles.size:
            raise ValueError(f"Dimension {dim} is smaller than the number of poles {poles.size}")

        self.poles = poles
        self._dim = dim

    def dim(self) -> int:
        return self._dim

    def _diagonal(self, z: complex) -> np.ndarray:
        diagonal = np.ones(self._dim, dtype=complex)
        diagonal[:self.poles.size] = z - self.poles
        return diagonal

    def apply_T(self, z, X):
        return self._diagonal(z)[:, None] * as_block(X)

    def solve(self, z, B):
        diagonal = self._diagonal(z)
        if np.any(diagonal == 0):
            raise SolveError(z)
        return as_block(B) / diagonal[:, None]

    def pole_rhs(self) -> np.ndarray:
        """v = (1, ..., 1, 0, ..., 0), ones on the pole rows"""
        v = np.zeros((self._dim, 1), dtype=complex)
        v[:self.poles.size] = 1
        return v

    def analyticity_hint(self):
        return "entire"


class LinearPencilProblem(NEPProblem):
    """Affine pencil T(z) = T0 + z T1 with cached LU factorizations"""

    name = "linear_pencil"

    def __init__(self, T0: np.ndarray, T1: np.ndarray, cache_size: int = OPERATOR_CACHE_SIZE):
        T0 = np.asarray(T0, dtype=complex)
        T1 = np.asarray(T1, dtype=complex)
        if T0.ndim != 2 or T0.shape[0] != T0.shape[1] or T0.shape != T1.shape:
            raise ValueError(f"Pencil matrices must be square and of equal shape, got {T0.shape} and {T1.shape}")
        self.T0 = T0
        self.T1 = T1
        self.cache = OperatorCache(max_size=cache_size)

    @classmethod
    def random(cls, dim: int, seed: int = 0, shift: complex = 2.0, spread: float = 0.5) -> 'LinearPencilProblem':
        """
        Well-conditioned random pencil

        T0 = shift I + spread G0 and T1 = I + 0.1 G1 with complex Gaussian
        G0, G1 of unit expected column norm, so the eigenvalues cluster
        around -shift.
        """
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(2 * dim)

        def gaussian():
            return (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) * scale

        identity = np.eye(dim)
        return cls(shift * identity + spread * gaussian(), identity + 0.1 * gaussian())

    def dim(self) -> int:
        return self.T0.shape[0]

    def assemble(self, z: complex) -> np.ndarray:
        return self.T0 + z * self.T1

    @staticmethod
    def _factorize(matrix: np.ndarray):
        lu, pivots = scipy.linalg.lu_factor(matrix, check_finite=False)
        if np.any(np.diag(lu) == 0):
            raise SolveError(complex('nan'), "zero pivot in LU factorization")
        return lu, pivots

    def apply_T(self, z, X):
        return self.cache.matrix(z, self.assemble) @ as_block(X)

    def solve(self, z, B):
        try:
            factorization = self.cache.factorization(z, self.assemble, self._factorize)
        except SolveError as e:
            raise SolveError(z, e.reason) from e
        return scipy.linalg.lu_solve(factorization, as_block(B).astype(complex))

    def analyticity_hint(self):
        return "entire"


class ScalarSinProblem(NEPProblem):
    """
    T(z) = sin(z) I

    Every vector is an eigenvector at every multiple of pi, the collinear
    case that minimal rational interpolation cannot resolve fully.
    """

    name = "scalar_sin"

    # sin(k pi) is not exactly zero in floating point
    _SINGULAR_TOL = 1e-12

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("Dimension must be positive")
        self._dim = dim

    def dim(self) -> int:
        return self._dim

    def apply_T(self, z, X):
        return np.sin(complex(z)) * as_block(X)

    def solve(self, z, B):
        factor = np.sin(complex(z))
        if abs(factor) < self._SINGULAR_TOL:
            raise SolveError(z, "z is a multiple of pi")
        return as_block(B) / factor

    def analyticity_hint(self):
        return "entire"


def make_diag_rational(poles: Sequence[complex], dim: Optional[int] = None) -> DiagRationalProblem:
    return DiagRationalProblem(poles, dim)


def make_linear_pencil(T0: np.ndarray, T1: np.ndarray) -> LinearPencilProblem:
    return LinearPencilProblem(T0, T1)


def make_scalar_sin(dim: int) -> ScalarSinProblem:
    return ScalarSinProblem(dim)
