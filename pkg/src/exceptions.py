"""
Error hierarchy for the G-SFT toolkit.
"""
from typing import Optional


class GSFTError(Exception):
    """Base class for every error raised by the toolkit."""


# group_core

class GroupError(GSFTError):
    """Errors about finite groups and group rings."""


class GroupMismatch(GroupError):
    """Operands live over different group objects."""


class EmptySubset(GroupError):
    """A subset that must be nonempty is empty."""


class NotASubgroup(GroupError):
    """A subset expected to be a subgroup is not closed."""


class InvalidGroupTable(GroupError):
    """A multiplication table fails the group axioms."""


# matrix_core

class MatrixError(GSFTError):
    """Errors about matrices over ZG."""


class SizeMismatch(MatrixError):
    """Matrix dimensions are incompatible."""


class NotBlocked(MatrixError):
    """An operation needs poset blocking that is absent or violated."""


class NegativeEntry(MatrixError):
    """A matrix expected over Z+G has a negative coefficient."""


class ShrinkNotAllowed(MatrixError):
    """A stabilization target is smaller than the matrix."""


# coset

class CosetError(GSFTError):
    """Errors about coset structures."""


class BadVertexChoice(CosetError):
    """A chosen vertex is not in the irreducible core of its block."""


class NotACosetStructure(CosetError):
    """The composition law or nonemptiness fails."""


# moves

class MoveError(GSFTError):
    """Errors raised while applying positive moves."""


class IllegalCut(MoveError):
    """The cut element is not a summand of the entry."""


class BlockViolation(MoveError):
    """A move leaves the blocked elementary group."""


class SelfLoopPresent(MoveError):
    """A state with a self loop cannot be eliminated."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class BadSplit(MoveError):
    """Split rows do not add up to the original row."""


class DiagonalNotInG(MoveError):
    """A diagonal conjugator entry is not a single group element."""


class CosetViolation(MoveError):
    """A diagonal conjugator entry leaves its block subgroup."""


class NotAPermutation(MoveError):
    """The given map is not a permutation of the indices."""


class BadPartition(MoveError):
    """An out-edge partition does not cover the row exactly."""


# pipeline

class PipelineError(GSFTError):
    """Errors raised by composite constructions."""


class EmptyCore(PipelineError):
    """The matrix has no nondegenerate core."""


class NotInMo(PipelineError):
    """The matrix is not in the required M-zero class."""


class PositivizationStalled(PipelineError):
    """The positivization loop ran out of budget."""


class DegenerateInput(PipelineError):
    """The matrix has a zero row or column."""


class NotUnipotent(PipelineError):
    """A factor is not blocked unipotent."""


class NotPlusPlus(PipelineError):
    """A matrix is not in the M++ class."""


class EquationFails(PipelineError):
    """The claimed matrix equation does not hold."""


class HypothesisViolated(PipelineError):
    """The two-by-two factorization hypotheses fail."""


class ConditionsFail(PipelineError):
    """Conditions C1 or C2 are not met."""


# invariants

class InvariantError(GSFTError):
    """Errors raised while computing invariants."""


class NotIrreducible(InvariantError):
    """The matrix (or chosen index) is not irreducible."""


class NonAbelian(InvariantError):
    """The operation needs a commutative group ring."""


class ZeroDivisorDet(InvariantError):
    """A block determinant is a zero divisor in ZH."""


class NotRealizable(InvariantError):
    """A matrix fails one of the realizability clauses."""

    def __init__(self, message: str, clause: str = ""):
        super().__init__(message)
        self.clause = clause


class NotNormalForm(InvariantError):
    """The input is not a blocked normal-form matrix."""


# cli_io

class FormatError(GSFTError):
    """Errors about the text format."""


class ParseError(FormatError):
    """Malformed text; carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ValidationError(FormatError):
    """Well-formed text whose content violates an invariant."""
