"""
Exception hierarchy for the eigensolver
"""
from typing import Optional


class NepMriError(Exception):
    """Base class for all solver errors"""


class EigenDecompositionError(NepMriError):
    """Hermitian eigensolver failed to converge"""


class NearSingularError(NepMriError):
    """Hermitian solve refused because the matrix is numerically singular"""

    def __init__(self, rcond: float):
        super().__init__(f"Matrix is numerically singular (rcond={rcond:.3e})")
        self.rcond = rcond


class DegeneratePencilError(NepMriError):
    """Arrowhead pencil has all-zero weights"""


class NodeCoincidenceError(NepMriError):
    """Evaluation point coincides with an interpolation node"""

    def __init__(self, index: int, z: complex):
        super().__init__(f"Point {z} coincides with node {index}")
        self.index = index
        self.z = z


class PoleProximityError(NepMriError):
    """Evaluation point sits on a surrogate pole"""

    def __init__(self, z: complex):
        super().__init__(f"Point {z} is numerically a pole of the surrogate")
        self.z = z


class ResidueError(NepMriError):
    """Residue cannot be computed with the requested formula"""


class ContourError(NepMriError):
    """Quadrature circle encloses something other than the target pole"""

    def __init__(self, message: str, suggested_radius: float):
        super().__init__(f"{message} (try radius <= {suggested_radius:.3e})")
        self.suggested_radius = suggested_radius


class SolveError(NepMriError):
    """Linear solve with T(z) failed"""

    def __init__(self, z: complex, reason: str = "singular operator"):
        super().__init__(f"Solve failed at z={z}: {reason}")
        self.z = z
        self.reason = reason


class DomainError(NepMriError):
    """Problem cannot be assembled at the requested point"""


class SamplingError(NepMriError):
    """Greedy loop cannot place another sample"""

    def __init__(self, message: str, partial: Optional[object] = None):
        super().__init__(message)
        self.partial = partial


class ConfigError(NepMriError):
    """Run configuration is inconsistent"""
