"""
Named problem builders for configuration files
"""
from typing import Callable, Dict, List, NamedTuple, Optional, Type
import logging

from pydantic import BaseModel, Field, ValidationError

from nepmri.errors import ConfigError
from nepmri.helmholtz import ResonatorGeometry, make_helmholtz_resonator
from nepmri.models import ComplexValue, ProblemConfig
from nepmri.problems import LinearPencilProblem, NEPProblem, make_diag_rational, make_scalar_sin

logger = logging.getLogger(__name__)


class DiagRationalParams(BaseModel):
    poles: List[ComplexValue] = Field(..., min_length=1, description="Distinct poles p_1..p_K")
    dim: Optional[int] = Field(default=None, ge=1, description="Dimension n >= K (default K)")


class LinearPencilParams(BaseModel):
    dim: int = Field(default=8, ge=1)
    seed: int = 0
    shift: ComplexValue = Field(default=2.0, description="T0 = shift * I + spread * G0")
    spread: float = Field(default=0.5, ge=0)


class ScalarSinParams(BaseModel):
    dim: int = Field(default=4, ge=1)


class ProblemEntry(NamedTuple):
    params: Type[BaseModel]
    build: Callable[[BaseModel], NEPProblem]
    description: str


PROBLEM_REGISTRY: Dict[str, ProblemEntry] = {
    'diag_rational': ProblemEntry(
        DiagRationalParams,
        lambda p: make_diag_rational(p.poles, p.dim),
        "T(z) = diag(z - p_1, ..., z - p_K, 1, ..., 1), simple poles with canonical eigenvectors",
    ),
    'linear_pencil': ProblemEntry(
        LinearPencilParams,
        lambda p: LinearPencilProblem.random(p.dim, seed=p.seed, shift=p.shift, spread=p.spread),
        "Seeded random affine pencil T(z) = T0 + z T1",
    ),
    'scalar_sin': ProblemEntry(
        ScalarSinParams,
        lambda p: make_scalar_sin(p.dim),
        "T(z) = sin(z) I, collinear eigenvectors at every multiple of pi",
    ),
    'helmholtz_resonator': ProblemEntry(
        ResonatorGeometry,
        make_helmholtz_resonator,
        "Helmholtz resonator with a z-dependent neck, bilinear finite elements",
    ),
}


def build_problem(config: ProblemConfig) -> NEPProblem:
    """
    Instantiate a registered problem

    Raises:
        ConfigError: If the name is unknown or the parameters are invalid
    """
    entry = PROBLEM_REGISTRY.get(config.name)
    if entry is None:
        raise ConfigError(f"Unknown problem '{config.name}'; choose from {sorted(PROBLEM_REGISTRY)}")

    try:
        params = entry.params.model_validate(config.params)
        problem = entry.build(params)
    except (ValidationError, ValueError) as e:
        raise ConfigError(f"Invalid parameters for problem '{config.name}': {e}") from e

    logger.info(f"Built problem '{config.name}' of dimension {problem.dim()}")
    return problem


def describe_problems() -> List[dict]:
    """Registry entries with their parameter JSON schemas"""
    return [
        {'name': name, 'description': entry.description, 'params': entry.params.model_json_schema()}
        for name, entry in PROBLEM_REGISTRY.items()
    ]
