"""
Move scripts and certificates for positive equivalences of I - A.
"""
import hashlib
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.algebra.coset import CosetStructure
from src.algebra.matrix import Blocking, BlockedMatrix, ElementaryMatrix
from src.algebra.ring import GroupRingElem

Side = Literal["left", "right"]
Direction = Literal["forward", "backward"]
StepKind = Literal["out_split", "permutation", "diagonal", "restrict", "stabilize"]


def matrix_digest(a: BlockedMatrix) -> str:
    """Short stable digest of a matrix (entries and group labels, not the blocking)."""
    text = ";".join(a.group.names) + "|" + "\n".join(",".join(x.format() for x in row) for row in a.rows())
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class Move(BaseModel):
    """One elementary multiplication of I - A on the left or on the right."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    side: Side = Field(..., description="left multiplies rows, right multiplies columns")
    direction: Direction = Field(..., description="forward uses E_st(x), backward uses E_st(-x)")
    s: int = Field(..., ge=0)
    t: int = Field(..., ge=0)
    value: GroupRingElem = Field(..., description="x in E_st(x)")
    annotation: Literal["cut", "plumbing"] = "cut"

    @model_validator(mode="after")
    def check_position(self) -> "Move":
        if self.s == self.t:
            raise ValueError("Elementary moves need s != t")
        return self

    def signed_value(self) -> GroupRingElem:
        return self.value if self.direction == "forward" else -self.value

    def elementary(self, n: int) -> ElementaryMatrix:
        return ElementaryMatrix(n, self.s, self.t, self.signed_value())

    def apply(self, a: BlockedMatrix) -> BlockedMatrix:
        """The matrix B with I - B = E(I - A) (left) or (I - A)E (right)."""
        x = self.signed_value()
        s, t = self.s, self.t
        rows = [list(r) for r in a.rows()]
        if self.side == "left":
            rows[s] = [p + x * q if q else p for p, q in zip(rows[s], a.row(t))]
        else:
            for r in rows:
                if r[s]:
                    r[t] = r[t] + r[s] * x
        rows[s][t] = rows[s][t] - x
        return BlockedMatrix(a.group, rows, a.blocking)

    def inverse(self) -> "Move":
        flipped = "backward" if self.direction == "forward" else "forward"
        return self.model_copy(update={"direction": flipped})

    def star(self) -> "Move":
        """The same move seen on the conjugate transpose."""
        side = "right" if self.side == "left" else "left"
        return Move(side=side, direction=self.direction, s=self.t, t=self.s,
                    value=self.value.star(), annotation=self.annotation)

    def positivity_problem(self, before: BlockedMatrix, after: BlockedMatrix) -> Optional[str]:
        """Reason the move is not a basic positive move between the two matrices, or None."""
        if self.annotation != "cut" or not self.value.is_group_element():
            return "value is not a single group element"
        g = self.value.as_group_element()
        witness = before if self.direction == "forward" else after
        if witness[self.s, self.t].coeff(g) < 1:
            return f"{before.group.name(g)} is not a summand of entry ({self.s}, {self.t})"
        if not after.is_nonneg():
            return "result leaves Z+G"
        return None

    def block_problem(self, blocking: Optional[Blocking], structure: Optional[CosetStructure]) -> Optional[str]:
        if blocking is None:
            return None
        if not blocking.allows(self.s, self.t):
            return f"position ({self.s}, {self.t}) is outside the poset blocks"
        if structure is not None:
            allowed = structure[blocking.comp(self.s), blocking.comp(self.t)]
            if not self.value.supported_in(allowed):
                return f"value {self.value} is not supported in H[{blocking.comp(self.s)},{blocking.comp(self.t)}]"
        return None

    def describe(self) -> str:
        return f"{self.side} {self.direction} E[{self.s},{self.t}]({self.value.format()}) {self.annotation}"


def accumulate(start: BlockedMatrix, moves: List[Move]) -> Dict[str, BlockedMatrix]:
    """Replay moves from start; returns the end matrix and the factors U, V."""
    group, n = start.group, start.n
    u = BlockedMatrix.identity(group, n)
    v = BlockedMatrix.identity(group, n)
    current = start
    for move in moves:
        e = move.elementary(n)
        if move.side == "left":
            u = e.left_apply(u)
        else:
            v = e.right_apply(v)
        current = move.apply(current)
    return {"end": current, "u": u, "v": v}


class Certificate(BaseModel):
    """A replayable move script with accumulated factors: U (I - start) V = I - end."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    start: BlockedMatrix
    end: BlockedMatrix
    moves: List[Move] = Field(default_factory=list)
    u: BlockedMatrix
    v: BlockedMatrix
    positive: bool = Field(True, description="every move is a legal basic positive move")
    blocked: bool = Field(False, description="every move lies in the blocked elementary group")
    structure: Optional[CosetStructure] = None

    @classmethod
    def from_moves(
        cls,
        start: BlockedMatrix,
        moves: List[Move],
        positive: bool = True,
        blocked: bool = False,
        structure: Optional[CosetStructure] = None,
    ) -> "Certificate":
        acc = accumulate(start, moves)
        return cls(start=start, end=acc["end"].with_blocking(start.blocking), moves=list(moves),
                   u=acc["u"], v=acc["v"], positive=positive, blocked=blocked, structure=structure)

    @classmethod
    def empty(cls, a: BlockedMatrix, blocked: bool = False, structure: Optional[CosetStructure] = None) -> "Certificate":
        return cls.from_moves(a, [], blocked=blocked, structure=structure)

    @property
    def size(self) -> int:
        return self.start.n

    def is_empty(self) -> bool:
        return not self.moves and self.u.is_identity() and self.v.is_identity()

    def equation_holds(self) -> bool:
        return self.u @ self.start.one_minus() @ self.v == self.end.one_minus()

    def then(self, other: "Certificate") -> "Certificate":
        if self.end != other.start:
            raise ValueError("Certificates do not compose: end and start differ")
        return Certificate(
            start=self.start,
            end=other.end,
            moves=self.moves + other.moves,
            u=other.u @ self.u,
            v=self.v @ other.v,
            positive=self.positive and other.positive,
            blocked=self.blocked and other.blocked,
            structure=self.structure or other.structure,
        )

    def reversed(self) -> "Certificate":
        if not self.moves and not self.is_empty():
            raise ValueError("Only move scripts can be reversed")
        moves = [m.inverse() for m in reversed(self.moves)]
        return Certificate.from_moves(self.end.with_blocking(self.start.blocking), moves, self.positive,
                                      self.blocked, self.structure)

    def star(self) -> "Certificate":
        """Certificate between the conjugate transposes (left and right moves swap)."""
        return Certificate.from_moves(self.start.star(), [m.star() for m in self.moves],
                                      self.positive, False, None)

    def intermediates(self) -> List[BlockedMatrix]:
        out = [self.start]
        for move in self.moves:
            out.append(move.apply(out[-1]))
        return out

    def start_digest(self) -> str:
        return matrix_digest(self.start)

    def end_digest(self) -> str:
        return matrix_digest(self.end)


class ConjugacyStep(BaseModel):
    """A structural step (splitting, relabeling, diagonal conjugacy, trimming, padding)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: StepKind
    data: Dict[str, Any] = Field(default_factory=dict)
    before: BlockedMatrix
    after: BlockedMatrix

    def describe(self) -> str:
        return f"{self.kind} {self.data} ({self.before.n} -> {self.after.n})"


class VerificationReport(BaseModel):
    """Outcome of replaying a certificate or a script."""

    ok: bool
    equation_holds: bool
    positive: bool
    blocked: bool
    moves_checked: int = 0
    failed_at: Optional[int] = None
    reason: str = ""

    def summary(self) -> str:
        if self.ok:
            return (f"verified: {self.moves_checked} moves, equation holds, "
                    f"positive={self.positive}, blocked={self.blocked}")
        where = f" at move {self.failed_at}" if self.failed_at is not None else ""
        return f"FAILED{where}: {self.reason}"
