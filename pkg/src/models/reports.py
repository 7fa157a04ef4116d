"""
Result models returned by the pipeline, invariant and search services.
"""
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from src.algebra.coset import CosetStructure
from src.algebra.group import GSubset
from src.algebra.matrix import BlockedMatrix, Poset
from src.algebra.ring import GroupRingElem
from src.models.certificate import Certificate, ConjugacyStep

ScriptItem = Union[ConjugacyStep, Certificate]


class NormalFormResult(BaseModel):
    """A nondegenerate C1 matrix in M-zero form together with the script that produced it."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: BlockedMatrix
    poset: Poset
    cycles: List[int] = Field(default_factory=list, description="cycle components (0-based)")
    structure: Optional[CosetStructure] = None
    vertex_choices: List[int] = Field(default_factory=list)
    script: List[ScriptItem] = Field(default_factory=list)

    def is_empty(self) -> bool:
        return self.matrix.n == 0

    def certificates(self) -> List[Certificate]:
        return [item for item in self.script if isinstance(item, Certificate)]

    def positive_move_count(self) -> int:
        return sum(len(c.moves) for c in self.certificates())


class StabilizerReport(BaseModel):
    """Stabilizer data of one irreducible component of a G-SFT."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    component: List[int]
    index: int
    period: int
    stabilizer: GSubset = Field(..., description="H_C, the weights group at the chosen index")
    primitive_stabilizer: GSubset = Field(..., description="H0, the ratio group")
    stabilizer_coset: GSubset = Field(..., description="H1 = g H0 for a one-step weight g")
    witnesses: Dict[int, List[int]] = Field(default_factory=dict, description="element -> closed walk of vertices")


class DetTuple(BaseModel):
    """(det(I - A_1), ..., det(I - A_N)) over a commutative group ring."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: List[GroupRingElem]

    def __len__(self) -> int:
        return len(self.entries)

    def describe(self) -> List[str]:
        return [e.format() for e in self.entries]


class CensusReport(BaseModel):
    """Periodic components and non-periodic bi-infinite orbit counts."""

    components: List[List[int]]
    periods: List[int]
    finite: bool
    orbits: Optional[int] = Field(None, description="orbits leaving the minimal cycles of the base shift")
    lifted_orbits: Optional[int] = Field(None, description="the same count on the G-SFT itself")
    connections: Dict[str, int] = Field(default_factory=dict, description="'i->j' -> first-passage orbits between cycles")

    def describe(self) -> str:
        if not self.finite:
            return "infinite"
        return f"{self.orbits}"


class CounterWitness(BaseModel):
    """An invariant that separates two matrices."""

    invariant: str
    left: str
    right: str


class Unresolved(BaseModel):
    """A bounded search that ended without an answer."""

    reason: str
    explored: int = 0


class ConditionSearchResult(BaseModel):
    """Poset isomorphism, conjugating vector and the outcome of the bounded comparison."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    alpha: List[int]
    gamma: List[int]
    conjugated: BlockedMatrix
    outcome: Union[Certificate, CounterWitness, Unresolved]


OracleOutcome = Union[Certificate, CounterWitness, Unresolved]
