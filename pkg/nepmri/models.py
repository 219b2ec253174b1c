from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, field_validator, model_validator
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple
from pathlib import Path
import numpy as np

from nepmri.config import (
    DEFAULT_BUDGET, DEFAULT_CANDIDATE_COUNT, DEFAULT_NEWTON_TOL, DEFAULT_TOL_CLUSTER,
    DEFAULT_VALIDATION_POINTS, OUTPUT_DIR, REGION_RTOL,
)
from nepmri.utils import segment_distance


def _to_complex(value: Any) -> Any:
    """
    Accept complex numbers in the spellings a JSON config can carry:
    a number, a [re, im] pair, or a string such as "1+2j"
    """
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError("Complex pairs must have exactly two entries [re, im]")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    if isinstance(value, (int, float, np.number)):
        return complex(value)
    return value


ComplexValue = Annotated[
    complex,
    BeforeValidator(_to_complex),
    PlainSerializer(lambda z: [z.real, z.imag], return_type=List[float], when_used='json'),
]

NormalizationMode = Literal['euclidean', 'constrained_sum']
StepEvent = Literal['ok', 'offset', 'suspect']


class Region(BaseModel):
    """Segment of the complex plane searched for eigenvalues"""
    model_config = ConfigDict(frozen=True)

    kind: Literal['real_interval', 'complex_segment'] = 'real_interval'
    endpoints: Tuple[ComplexValue, ComplexValue]
    candidate_count: int = Field(default=DEFAULT_CANDIDATE_COUNT, ge=3, description="Points in the candidate grid")

    @model_validator(mode='after')
    def validate_endpoints(self) -> 'Region':
        start, end = self.endpoints
        if start == end:
            raise ValueError("Region endpoints must be distinct")
        if self.kind == 'real_interval' and (start.imag != 0 or end.imag != 0):
            raise ValueError("A real interval needs real endpoints")
        return self

    @property
    def length(self) -> float:
        return abs(self.endpoints[1] - self.endpoints[0])

    @property
    def candidates(self) -> np.ndarray:
        """Equispaced candidate grid, both endpoints included exactly"""
        start, end = self.endpoints
        grid = start + (end - start) * np.linspace(0.0, 1.0, self.candidate_count)
        grid[0], grid[-1] = start, end
        return grid.astype(complex)

    def grid(self, count: int) -> np.ndarray:
        """Equispaced grid of ``count`` points on the segment"""
        return self.model_copy(update={'candidate_count': count}).candidates

    def distance(self, z: complex) -> float:
        return segment_distance(complex(z), *self.endpoints)


class SampleRecord(BaseModel):
    """One problem solve that entered the sample set"""
    iteration: int = Field(..., ge=0, description="0 for initial samples, greedy iteration otherwise")
    z: ComplexValue
    u_norm: float
    indicator: Optional[float] = None  # Indicator value that selected z (None for initial samples)


class GreedyStep(BaseModel):
    """Per-iteration history of the greedy loop"""
    iteration: int = Field(..., ge=1)
    z: ComplexValue
    indicator: float
    u_norm: float
    solve_seconds: float
    event: StepEvent = 'ok'
    requested_z: Optional[ComplexValue] = None  # Point the indicator chose, when an offset moved it


class PoleReport(BaseModel):
    """A surrogate pole with its Laurent residues"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    pole: ComplexValue
    order: int = Field(..., ge=1)
    residues: List[np.ndarray] = []  # residues[k-1] multiplies (z - pole)^-k
    polish_displacement: float = 0.0
    cluster_members: List[ComplexValue] = []
    newton_converged: bool = True


class EigenpairEstimate(BaseModel):
    """Approximate eigenpair read off a pole-residue pair"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eigenvalue: ComplexValue
    eigenvector: np.ndarray
    residual: float = Field(..., ge=0)
    order_index: int = Field(..., ge=1, description="Which residue r_k produced the estimate")
    in_region: bool
    filtered: bool = False
    source_pole: PoleReport


class ProblemConfig(BaseModel):
    """Problem name from the registry plus its parameters"""
    name: str = Field(..., min_length=1)
    params: Dict[str, Any] = {}


class RhsConfig(BaseModel):
    """Right-hand side V of T(z) U = V"""
    kind: Literal['inlet', 'gaussian', 'ones'] = 'ones'
    seed: int = 0
    columns: int = Field(default=1, ge=1, description="Number of right-hand sides m")


class ToleranceConfig(BaseModel):
    cluster: float = Field(default=DEFAULT_TOL_CLUSTER, gt=0)
    region: Optional[float] = Field(default=None, gt=0, description="Absolute margin; defaults to 1e-8 times the segment length")
    newton: float = Field(default=DEFAULT_NEWTON_TOL, gt=0)


class RunConfig(BaseModel):
    """Request model for a solver run"""
    problem: ProblemConfig
    region: Region
    budget: int = Field(default=DEFAULT_BUDGET, ge=2, description="Total number of problem solves")
    initial_nodes: Optional[List[ComplexValue]] = None
    rhs: RhsConfig = RhsConfig()
    mode: NormalizationMode = 'euclidean'
    tolerances: ToleranceConfig = ToleranceConfig()
    validation_points: int = Field(default=DEFAULT_VALIDATION_POINTS, ge=2)
    filtering: bool = False
    early_stop_tol: Optional[float] = Field(default=None, gt=0)
    record_timing: bool = True
    dump_mesh: bool = False
    output_dir: Path = OUTPUT_DIR

    @field_validator('initial_nodes')
    @classmethod
    def validate_initial_nodes(cls, v: Optional[List[complex]]) -> Optional[List[complex]]:
        if v is None:
            return v
        if len(v) < 2:
            raise ValueError("At least two initial nodes are required")
        if len(set(v)) != len(v):
            raise ValueError("Initial nodes must be distinct")
        return v

    @model_validator(mode='after')
    def validate_budget(self) -> 'RunConfig':
        if self.budget < len(self.start_nodes):
            raise ValueError(f"Budget {self.budget} is smaller than the {len(self.start_nodes)} initial nodes")
        margin = REGION_RTOL * self.region.length
        outside = [z for z in self.start_nodes if self.region.distance(z) > margin]
        if outside:
            raise ValueError(f"Initial nodes {outside} lie outside the region segment")
        return self

    @property
    def start_nodes(self) -> List[complex]:
        """Initial sample points (region endpoints unless configured)"""
        if self.initial_nodes is not None:
            return list(self.initial_nodes)
        return list(self.region.endpoints)

    @property
    def tol_region(self) -> float:
        if self.tolerances.region is not None:
            return self.tolerances.region
        return REGION_RTOL * self.region.length


class GreedyTrace(BaseModel):
    """History of one greedy run plus the final surrogate"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    steps: List[GreedyStep] = []
    samples: List[SampleRecord] = []
    surrogate: Any = Field(default=None, exclude=True)
    status: Literal['complete', 'partial', 'converged'] = 'complete'
    suspects: List[ComplexValue] = []  # Points where the solve failed or blew up
    ambiguous_iterations: List[int] = []

    @property
    def initial_count(self) -> int:
        return sum(1 for record in self.samples if record.iteration == 0)

    @property
    def solve_count(self) -> int:
        """Problem solves that produced a sample"""
        return len(self.samples)
