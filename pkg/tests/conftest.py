"""Shared fixtures: small groups and the standing counterexample over Z2 x Z2."""
from typing import Optional, Sequence

import pytest

from src.algebra.group import FiniteGroup
from src.algebra.matrix import BlockedMatrix, Blocking, Poset
from src.algebra.ring import GroupRingElem
from src.formats.text_format import parse_sum


def el(group: FiniteGroup, text: str) -> GroupRingElem:
    return parse_sum(group, text)


def mat(group: FiniteGroup, rows: Sequence[Sequence[str]], blocking: Optional[Blocking] = None) -> BlockedMatrix:
    return BlockedMatrix(group, [[el(group, x) for x in row] for row in rows], blocking)


@pytest.fixture
def trivial():
    return FiniteGroup.trivial()


@pytest.fixture
def z2():
    return FiniteGroup.cyclic(2)


@pytest.fixture
def z3():
    return FiniteGroup.cyclic(3)


@pytest.fixture
def z6():
    return FiniteGroup.cyclic(6)


@pytest.fixture
def s3():
    return FiniteGroup.symmetric(3)


@pytest.fixture
def klein():
    return FiniteGroup.direct_product(FiniteGroup.cyclic(2), FiniteGroup.cyclic(2))


@pytest.fixture
def counterexample_blocking():
    return Blocking(Poset.chain(3), [1, 2, 1])


@pytest.fixture
def counterexample(klein, counterexample_blocking):
    """A, B over Z2 x Z2 with (I - A) U = I - B for the integral U below."""
    a = mat(klein, [
        ["g_e", "e", "e", "0"],
        ["0", "e", "0", "e"],
        ["0", "0", "e", "e"],
        ["0", "0", "0", "e_g"],
    ], counterexample_blocking)
    b = mat(klein, [
        ["g_e", "3*e", "2*e", "0"],
        ["0", "e", "0", "e"],
        ["0", "0", "e", "e"],
        ["0", "0", "0", "e_g"],
    ], counterexample_blocking)
    u = BlockedMatrix(klein, [
        [1, 0, 0, 0],
        [0, 2, 1, 0],
        [0, 1, 1, 0],
        [0, 0, 0, 1],
    ], counterexample_blocking)
    return a, b, u
