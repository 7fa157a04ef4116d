"""
Elements of the integral group ring ZG with exact integer coefficients.
"""
from typing import Dict, Iterable, Iterator, List, Mapping, Tuple, Union

from src.algebra.group import FiniteGroup, GSubset, nonempty


class GroupRingElem:
    """A finitely supported integer combination of group elements."""

    __slots__ = ("group", "_coeffs", "_key")

    def __init__(self, group: FiniteGroup, coeffs: Mapping[int, int] = None):
        self.group = group
        clean: Dict[int, int] = {}
        for g, c in (coeffs or {}).items():
            c = int(c)
            if c:
                if not 0 <= g < group.order:
                    raise ValueError(f"Element index {g} outside group of order {group.order}")
                clean[int(g)] = clean.get(int(g), 0) + c
        self._coeffs: Dict[int, int] = {g: c for g, c in clean.items() if c}
        self._key: Tuple[Tuple[int, int], ...] = tuple(sorted(self._coeffs.items()))

    # constructors

    @classmethod
    def zero(cls, group: FiniteGroup) -> "GroupRingElem":
        return cls(group)

    @classmethod
    def one(cls, group: FiniteGroup) -> "GroupRingElem":
        return cls(group, {0: 1})

    @classmethod
    def of(cls, group: FiniteGroup, g: int, coefficient: int = 1) -> "GroupRingElem":
        return cls(group, {g: coefficient})

    @classmethod
    def sum_of(cls, subset: GSubset) -> "GroupRingElem":
        """The element sum of all members of a subset (the delta of that set)."""
        return cls(subset.group, {g: 1 for g in subset.members})

    @classmethod
    def from_elements(cls, group: FiniteGroup, elements: Iterable[int]) -> "GroupRingElem":
        coeffs: Dict[int, int] = {}
        for g in elements:
            coeffs[g] = coeffs.get(g, 0) + 1
        return cls(group, coeffs)

    # access

    @property
    def coeffs(self) -> Dict[int, int]:
        return dict(self._coeffs)

    def items(self) -> Tuple[Tuple[int, int], ...]:
        return self._key

    def coeff(self, g: int) -> int:
        return self._coeffs.get(g, 0)

    def support(self) -> List[int]:
        return [g for g, _ in self._key]

    def summands(self) -> Iterator[int]:
        """Group elements with multiplicity; only meaningful for nonnegative elements."""
        for g, c in self._key:
            for _ in range(max(c, 0)):
                yield g

    def is_zero(self) -> bool:
        return not self._coeffs

    def __bool__(self) -> bool:
        return bool(self._coeffs)

    def is_group_element(self) -> bool:
        return len(self._key) == 1 and self._key[0][1] == 1

    def as_group_element(self) -> int:
        if not self.is_group_element():
            raise ValueError(f"{self} is not a single group element")
        return self._key[0][0]

    # predicates

    def augment(self) -> int:
        return sum(self._coeffs.values())

    def is_nonneg(self) -> bool:
        return all(c > 0 for c in self._coeffs.values())

    def is_g_positive(self) -> bool:
        return len(self._coeffs) == self.group.order and self.is_nonneg()

    def is_positive_on(self, subset: GSubset) -> bool:
        """Coefficients positive exactly on the subset and zero elsewhere."""
        return set(self._coeffs) == set(subset.members) and self.is_nonneg()

    def supported_in(self, subset: GSubset) -> bool:
        return all(g in subset for g in self._coeffs)

    def dominates(self, other: "GroupRingElem") -> bool:
        """Coefficientwise self >= other."""
        return all(self.coeff(g) >= c for g, c in other._coeffs.items()) and all(
            c >= 0 for g, c in self._coeffs.items() if g not in other._coeffs
        )

    # arithmetic

    def _coerce(self, other: Union["GroupRingElem", int]) -> "GroupRingElem":
        if isinstance(other, int):
            return GroupRingElem(self.group, {0: other})
        self.group.check_same(other.group)
        return other

    def __add__(self, other: Union["GroupRingElem", int]) -> "GroupRingElem":
        other = self._coerce(other)
        coeffs = dict(self._coeffs)
        for g, c in other._coeffs.items():
            coeffs[g] = coeffs.get(g, 0) + c
        return GroupRingElem(self.group, coeffs)

    __radd__ = __add__

    def __neg__(self) -> "GroupRingElem":
        return GroupRingElem(self.group, {g: -c for g, c in self._coeffs.items()})

    def __sub__(self, other: Union["GroupRingElem", int]) -> "GroupRingElem":
        return self + (-self._coerce(other))

    def __rsub__(self, other: int) -> "GroupRingElem":
        return self._coerce(other) - self

    def __mul__(self, other: Union["GroupRingElem", int]) -> "GroupRingElem":
        if isinstance(other, int):
            return GroupRingElem(self.group, {g: c * other for g, c in self._coeffs.items()})
        self.group.check_same(other.group)
        mul = self.group.mul
        coeffs: Dict[int, int] = {}
        for a, x in self._key:
            for b, y in other._key:
                ab = mul(a, b)
                coeffs[ab] = coeffs.get(ab, 0) + x * y
        return GroupRingElem(self.group, coeffs)

    def __rmul__(self, other: int) -> "GroupRingElem":
        return self * other

    def left(self, g: int) -> "GroupRingElem":
        """g * self for a group element g."""
        mul = self.group.mul
        return GroupRingElem(self.group, {mul(g, a): c for a, c in self._key})

    def right(self, g: int) -> "GroupRingElem":
        """self * g for a group element g."""
        mul = self.group.mul
        return GroupRingElem(self.group, {mul(a, g): c for a, c in self._key})

    def star(self) -> "GroupRingElem":
        """The involution g -> g^-1 extended linearly."""
        inv = self.group.inv
        return GroupRingElem(self.group, {inv(g): c for g, c in self._key})

    def project(self, subset: GSubset) -> "GroupRingElem":
        return GroupRingElem(self.group, {g: c for g, c in self._key if g in subset})

    # comparison / display

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int):
            return self._key == (((0, other),) if other else ())
        if not isinstance(other, GroupRingElem):
            return NotImplemented
        return self._key == other._key and self.group == other.group

    def __hash__(self) -> int:
        return hash(self._key)

    def format(self) -> str:
        """Canonical formal-sum text, e.g. '2*a + b - c'; zero is '0'."""
        if not self._key:
            return "0"
        parts: List[str] = []
        for k, (g, c) in enumerate(self._key):
            name = self.group.name(g)
            mag = abs(c)
            term = name if mag == 1 else f"{mag}*{name}"
            if k == 0:
                parts.append(term if c > 0 else f"-{term}")
            else:
                parts.append(("+ " if c > 0 else "- ") + term)
        return " ".join(parts)

    def __str__(self) -> str:
        return self.format()

    def __repr__(self) -> str:
        return f"GroupRingElem({self.format()})"


def ring_add(a: GroupRingElem, b: GroupRingElem) -> GroupRingElem:
    return a + b


def ring_mul(a: GroupRingElem, b: GroupRingElem) -> GroupRingElem:
    return a * b


def augment(a: GroupRingElem) -> int:
    return a.augment()


def is_g_positive(a: GroupRingElem) -> bool:
    return a.is_g_positive()


def is_nonneg(a: GroupRingElem) -> bool:
    return a.is_nonneg()


def element_order(group: FiniteGroup, g: int) -> int:
    return group.element_order(g)


def project(subset: GSubset, a: GroupRingElem) -> GroupRingElem:
    """pi_D: zero every coefficient outside the (nonempty) subset D."""
    nonempty(subset)
    return a.project(subset)


def cyclic_delta(group: FiniteGroup, g: int) -> GroupRingElem:
    """1 + g + ... + g^(k-1) for k the order of g."""
    return GroupRingElem.from_elements(group, [group.power(g, m) for m in range(group.element_order(g))])


def regular_matrix(a: GroupRingElem) -> List[List[int]]:
    """Integer matrix of left multiplication in the regular representation: R(a)[g][k] = a(g^-1 k)."""
    group = a.group
    n = group.order
    rows = [[0] * n for _ in range(n)]
    for g in range(n):
        for h, c in a.items():
            rows[g][group.mul(g, h)] += c
    return rows
