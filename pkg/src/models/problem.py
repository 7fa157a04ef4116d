"""
Problem files: a group, an optional poset, named matrices, a coset structure,
a certificate and a conjugacy script.
"""
from typing import Any, Dict, List, Literal, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.algebra.coset import CosetStructure
from src.algebra.group import FiniteGroup
from src.algebra.matrix import Blocking, BlockedMatrix, Poset
from src.exceptions import ValidationError
from src.models.certificate import Certificate, ConjugacyStep, Move
from src.models.reports import ScriptItem

EntryKind = Literal["out_split", "permutation", "diagonal", "restrict", "stabilize", "blocks", "certificate"]


class CertificateRecord(BaseModel):
    """A certificate as written in a file: named end matrices plus the move list."""

    model_config = ConfigDict(frozen=True)

    start: str = Field(..., description="name of the matrix section the moves start from")
    end: Optional[str] = Field(None, description="name of the claimed end matrix")
    positive: bool = True
    blocked: bool = False
    moves: List[Move] = Field(default_factory=list)


class ScriptEntry(BaseModel):
    """One line group of a script section: a structural step, a re-blocking or a certificate."""

    model_config = ConfigDict(frozen=True)

    kind: EntryKind
    data: Dict[str, Any] = Field(default_factory=dict, description="step parameters, as on ConjugacyStep")
    positive: bool = True
    blocked: bool = False
    coset: bool = Field(False, description="check the moves against the file's coset structure")
    moves: List[Move] = Field(default_factory=list)


class ScriptRecord(BaseModel):
    """A conjugacy script as written in a file; intermediate matrices are replayed, not stored."""

    model_config = ConfigDict(frozen=True)

    start: str = Field(..., description="name of the matrix section the script starts from")
    end: Optional[str] = Field(None, description="name of the claimed end matrix")
    entries: List[ScriptEntry] = Field(default_factory=list)


def _same_blocking(a: Optional[Blocking], b: Optional[Blocking]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return a == b


class ProblemFile(BaseModel):
    """Parsed contents of one text file."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    group: FiniteGroup
    poset: Optional[Poset] = None
    cycles: Optional[List[int]] = Field(None, description="cycle components (0-based)")
    matrices: Dict[str, BlockedMatrix] = Field(default_factory=dict)
    structure: Optional[CosetStructure] = None
    certificate: Optional[CertificateRecord] = None
    script: Optional[ScriptRecord] = None

    @field_validator("cycles")
    @classmethod
    def sort_cycles(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        return sorted(set(value)) if value is not None else None

    def validate_contents(self) -> "ProblemFile":
        """Cross-section checks; raises ValidationError naming the violated invariant."""
        for name, m in self.matrices.items():
            if m.group != self.group:
                raise ValidationError(f"Matrix {name} is over another group")
            if m.blocking is not None and self.poset is not None and m.blocking.poset != self.poset:
                raise ValidationError(f"Matrix {name} is blocked over another poset")
        if self.cycles is not None:
            if self.poset is None:
                raise ValidationError("Cycle components need a poset section")
            if any(not 0 <= i < self.poset.size for i in self.cycles):
                raise ValidationError(f"Cycle components {self.cycles} leave the poset")
        if self.structure is not None and self.poset is not None and self.structure.poset != self.poset:
            raise ValidationError("Coset structure and poset sections disagree")
        if self.certificate is not None:
            for name in (self.certificate.start, self.certificate.end):
                if name is not None and name not in self.matrices:
                    raise ValidationError(f"Certificate refers to a missing matrix section '{name}'")
            n = self.matrices[self.certificate.start].n
            for k, move in enumerate(self.certificate.moves):
                if move.s >= n or move.t >= n:
                    raise ValidationError(f"Move {k} refers to an index outside 0..{n - 1}")
        if self.script is not None:
            for name in (self.script.start, self.script.end):
                if name is not None and name not in self.matrices:
                    raise ValidationError(f"Script refers to a missing matrix section '{name}'")
            for k, entry in enumerate(self.script.entries):
                if entry.kind == "blocks" and entry.data.get("sizes") is not None and self.poset is None:
                    raise ValidationError(f"Script entry {k} re-blocks without a poset section")
                if entry.coset and self.structure is None:
                    raise ValidationError(f"Script entry {k} refers to a missing [coset] section")
        return self

    def matrix(self, name: Optional[str] = None) -> BlockedMatrix:
        """The named matrix, or the first one when no name is given."""
        if not self.matrices:
            raise ValidationError("The file has no matrix section")
        if name is None:
            return next(iter(self.matrices.values()))
        if name not in self.matrices:
            raise ValidationError(f"No matrix section named '{name}'")
        return self.matrices[name]

    def matrix_names(self) -> List[str]:
        return list(self.matrices)

    def certificate_object(self) -> Certificate:
        """Replay the recorded moves into a Certificate (its end is recomputed, not trusted)."""
        if self.certificate is None:
            raise ValidationError("The file has no certificate section")
        record = self.certificate
        return Certificate.from_moves(
            self.matrices[record.start],
            record.moves,
            positive=record.positive,
            blocked=record.blocked,
            structure=self.structure,
        )

    def claimed_end(self) -> Optional[BlockedMatrix]:
        if self.certificate is None or self.certificate.end is None:
            return None
        return self.matrices[self.certificate.end]

    @classmethod
    def from_matrices(
        cls,
        matrices: Dict[str, BlockedMatrix],
        cycles: Optional[Sequence[int]] = None,
        structure: Optional[CosetStructure] = None,
    ) -> "ProblemFile":
        first = next(iter(matrices.values()))
        poset = first.blocking.poset if first.blocking is not None else None
        return cls(
            group=first.group,
            poset=poset,
            cycles=list(cycles) if cycles is not None else None,
            matrices=dict(matrices),
            structure=structure,
        )

    @classmethod
    def from_certificate(
        cls, cert: Certificate, cycles: Optional[Sequence[int]] = None, extra: Optional[Dict[str, BlockedMatrix]] = None
    ) -> "ProblemFile":
        """A file holding a certificate with its start and end matrices."""
        matrices = {"start": cert.start, "end": cert.end}
        matrices.update(extra or {})
        base = cls.from_matrices(matrices, cycles, cert.structure)
        record = CertificateRecord(
            start="start", end="end", positive=cert.positive, blocked=cert.blocked, moves=list(cert.moves)
        )
        return base.model_copy(update={"certificate": record})

    @classmethod
    def from_script(
        cls,
        start: BlockedMatrix,
        items: Sequence[ScriptItem],
        end: BlockedMatrix,
        cycles: Optional[Sequence[int]] = None,
        structure: Optional[CosetStructure] = None,
        end_name: str = "end",
    ) -> "ProblemFile":
        """A file holding a conjugacy script with its start and end matrices.

        Blockings are written only where a step's input differs from what the replay
        of the previous item yields; they must all live over one poset.
        """
        poset = next((m.blocking.poset for m in (end, start) if m.blocking is not None), None)

        def check(blocking: Optional[Blocking]) -> None:
            if blocking is not None and blocking.poset != poset:
                raise ValidationError("Script matrices are blocked over more than one poset")

        check(start.blocking)
        check(end.blocking)
        entries: List[ScriptEntry] = []
        expected = start.blocking
        for item in items:
            before = item.before if isinstance(item, ConjugacyStep) else item.start
            if not _same_blocking(before.blocking, expected):
                check(before.blocking)
                sizes = list(before.blocking.sizes) if before.blocking is not None else None
                entries.append(ScriptEntry(kind="blocks", data={"sizes": sizes}))
            if isinstance(item, ConjugacyStep):
                entries.append(ScriptEntry(kind=item.kind, data=dict(item.data)))
                # a replayed permutation comes back unblocked
                expected = None if item.kind == "permutation" else item.after.blocking
                continue
            if not item.moves and not item.is_empty():
                raise ValidationError("Only certificates made of moves can be written to a script")
            entries.append(ScriptEntry(
                kind="certificate",
                positive=item.positive,
                blocked=item.blocked,
                coset=item.structure is not None and item.structure == structure,
                moves=list(item.moves),
            ))
            expected = item.start.blocking
        record = ScriptRecord(start="start", end=end_name, entries=entries)
        return cls(
            group=start.group,
            poset=poset,
            cycles=list(cycles) if cycles is not None else None,
            matrices={"start": start, end_name: end},
            structure=structure,
            script=record,
        )
