"""
Pydantic schemas for every JSON document hbl reads or writes.

These schemas are used both for:
1. Validating input documents (spaces, functions, forests) before they are built
2. Shaping run reports so every constant carries its provenance
"""
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from errors import SpaceParseError


# =============================================================================
# INPUT DOCUMENTS
# =============================================================================

class SpaceDocument(BaseModel):
    """A finite metric measure space, stored by edges (graphs) or by distance matrix."""
    name: str = ""
    points: list[str] = Field(min_length=1, description="Point ids, in index order")
    weights: list[float] = Field(description="Positive weight per point")
    edges: Optional[list[tuple[int, int]]] = Field(default=None, description="Index pairs")
    dist: Optional[list[list[float]]] = Field(default=None, description="Dense distance matrix")
    interior: Optional[list[str]] = Field(default=None, description="Ids off the truncation shell")

    @model_validator(mode="after")
    def check_shape(self):
        n = len(self.points)
        if len(set(self.points)) != n:
            raise ValueError("point ids must be unique")
        if len(self.weights) != n:
            raise ValueError(f"expected {n} weights, got {len(self.weights)}")
        if (self.edges is None) == (self.dist is None):
            raise ValueError("exactly one of 'edges' or 'dist' is required")
        if self.dist is not None and (len(self.dist) != n or any(len(row) != n for row in self.dist)):
            raise ValueError(f"dist must be a {n}x{n} matrix")
        return self


class FunctionDocument(BaseModel):
    """Point function; missing ids are 0."""
    values: dict[str, float] = Field(default_factory=dict)


class CubeDocument(BaseModel):
    center: str
    memberIds: list[str] = Field(min_length=1)
    parent: Optional[int] = None


class LevelDocument(BaseModel):
    k: int
    cubes: list[CubeDocument]


class ForestDocument(BaseModel):
    """Serialized dyadic forest."""
    delta: float = Field(gt=0, lt=1)
    kMin: int
    kMax: int
    realizedA0: float = Field(gt=0)
    realizedC1: float = Field(gt=0)
    levels: list[LevelDocument]

    @model_validator(mode="after")
    def check_levels(self):
        if [level.k for level in self.levels] != list(range(self.kMin, self.kMax + 1)):
            raise ValueError("levels must list every k from kMin to kMax in order")
        return self


def json_pointer(error: ValidationError) -> str:
    """JSON pointer of the first validation error location."""
    loc = error.errors()[0].get("loc", ())
    return "/" + "/".join(str(part) for part in loc) if loc else ""


def parse_document(model: type[BaseModel], doc: Any) -> BaseModel:
    """
    Validate a decoded JSON document against a schema.

    Raises:
        SpaceParseError: with the JSON pointer of the first mismatch.
    """
    try:
        return model.model_validate(doc)
    except ValidationError as e:
        first = e.errors()[0]
        raise SpaceParseError(first.get("msg", str(e)), json_pointer(e)) from e


# =============================================================================
# REPORT DOCUMENTS
# =============================================================================

class ProvenancedValue(BaseModel):
    """A reported constant with how it was obtained."""
    value: str = Field(description="Canonical decimal rendering")
    provenance: Literal["exact", "estimate"]


class Assertion(BaseModel):
    """One checked invariant of a run."""
    id: str = Field(description="Stable identifier, e.g. 'dyadic.forest'")
    suite: str
    hard: bool = Field(description="Hard failures change the exit code")
    passed: bool
    message: str = ""


class RunReport(BaseModel):
    """Complete run output; `timing` is excluded from determinism checks."""
    tool: str = "hbl"
    version: str
    config: dict
    suites: dict[str, Any] = Field(default_factory=dict)
    assertions: list[Assertion] = Field(default_factory=list)
    timing: dict[str, str] = Field(default_factory=dict)

    @property
    def hard_failures(self) -> list[Assertion]:
        return [a for a in self.assertions if a.hard and not a.passed]

    @property
    def soft_failures(self) -> list[Assertion]:
        return [a for a in self.assertions if not a.hard and not a.passed]

    @property
    def exit_code(self) -> int:
        return 1 if self.hard_failures else 0
