"""
Finite groups given by multiplication tables, and subsets of them.

Element indices are canonical within one group object; index 0 is always
the identity ``e``.
"""
import random
from itertools import permutations, product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

from sympy.combinatorics import Permutation

from src.exceptions import EmptySubset, GroupMismatch, InvalidGroupTable, NotASubgroup

EXHAUSTIVE_ASSOCIATIVITY_LIMIT = 16
SAMPLED_ASSOCIATIVITY_TRIPLES = 4096


class FiniteGroup:
    """A finite group presented by its multiplication table."""

    __slots__ = ("_names", "_table", "_inv", "_index", "_orders", "_label")

    def __init__(self, names: Sequence[str], table: Sequence[Sequence[int]], label: str = "table"):
        n = len(names)
        if n == 0:
            raise InvalidGroupTable("A group needs at least one element")
        if len(set(names)) != n:
            raise InvalidGroupTable("Element names must be distinct")
        if len(table) != n or any(len(row) != n for row in table):
            raise InvalidGroupTable(f"Product table must be {n}x{n}")
        self._names: Tuple[str, ...] = tuple(names)
        self._table: Tuple[Tuple[int, ...], ...] = tuple(tuple(int(x) for x in row) for row in table)
        self._label = label
        self._index: Dict[str, int] = {name: k for k, name in enumerate(self._names)}
        self._validate()
        self._inv: Tuple[int, ...] = tuple(
            next(b for b in range(n) if self._table[a][b] == 0) for a in range(n)
        )
        self._orders: Tuple[int, ...] = tuple(self._compute_order(g) for g in range(n))

    def _validate(self) -> None:
        n = len(self._names)
        full = set(range(n))
        for a in range(n):
            if set(self._table[a]) != full:
                raise InvalidGroupTable(f"Row {self._names[a]} of the product table is not a permutation")
            if {self._table[b][a] for b in range(n)} != full:
                raise InvalidGroupTable(f"Column {self._names[a]} of the product table is not a permutation")
        if any(self._table[0][g] != g or self._table[g][0] != g for g in range(n)):
            raise InvalidGroupTable("Element 0 must be the identity")
        if n <= EXHAUSTIVE_ASSOCIATIVITY_LIMIT:
            triples: Iterable[Tuple[int, int, int]] = product(range(n), repeat=3)
        else:
            rng = random.Random(n)
            triples = [
                (rng.randrange(n), rng.randrange(n), rng.randrange(n))
                for _ in range(SAMPLED_ASSOCIATIVITY_TRIPLES)
            ]
        t = self._table
        for a, b, c in triples:
            if t[t[a][b]][c] != t[a][t[b][c]]:
                raise InvalidGroupTable(
                    f"Associativity fails for ({self._names[a]}, {self._names[b]}, {self._names[c]})"
                )

    def _compute_order(self, g: int) -> int:
        k, x = 1, g
        while x != 0:
            x = self._table[x][g]
            k += 1
        return k

    # basic data

    @property
    def order(self) -> int:
        return len(self._names)

    @property
    def identity(self) -> int:
        return 0

    @property
    def names(self) -> Tuple[str, ...]:
        return self._names

    @property
    def table(self) -> Tuple[Tuple[int, ...], ...]:
        return self._table

    @property
    def label(self) -> str:
        return self._label

    def elements(self) -> range:
        return range(len(self._names))

    def mul(self, a: int, b: int) -> int:
        return self._table[a][b]

    def inv(self, a: int) -> int:
        return self._inv[a]

    def power(self, g: int, k: int) -> int:
        if k < 0:
            g, k = self._inv[g], -k
        x = 0
        for _ in range(k % self._orders[g]):
            x = self._table[x][g]
        return x

    def product(self, items: Iterable[int]) -> int:
        x = 0
        for g in items:
            x = self._table[x][g]
        return x

    def element_order(self, g: int) -> int:
        """Least k > 0 with g^k = e."""
        return self._orders[g]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"Unknown element name '{name}'") from None

    def name(self, g: int) -> str:
        return self._names[g]

    def is_abelian(self) -> bool:
        t = self._table
        return all(t[a][b] == t[b][a] for a in self.elements() for b in self.elements())

    def full(self) -> "GSubset":
        return GSubset(self, self.elements())

    def trivial_subgroup(self) -> "GSubset":
        return GSubset(self, [0])

    def check_same(self, other: "FiniteGroup") -> None:
        if self is not other and self != other:
            raise GroupMismatch("Operands are defined over different groups")

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, FiniteGroup):
            return NotImplemented
        return self._names == other._names and self._table == other._table

    def __hash__(self) -> int:
        return hash((self._names, self._table))

    def __repr__(self) -> str:
        return f"FiniteGroup({self._label}, order={self.order})"

    # constructors

    @classmethod
    def cyclic(cls, n: int) -> "FiniteGroup":
        """Cyclic group Z_n with elements e, g, g2, ..., g{n-1}."""
        if n < 1:
            raise InvalidGroupTable("Cyclic group order must be positive")
        names = ["e"] + ["g" if k == 1 else f"g{k}" for k in range(1, n)]
        table = [[(a + b) % n for b in range(n)] for a in range(n)]
        return cls(names, table, label=f"cyclic {n}")

    @classmethod
    def trivial(cls) -> "FiniteGroup":
        return cls.cyclic(1)

    @classmethod
    def symmetric(cls, n: int) -> "FiniteGroup":
        """Symmetric group on n points, multiplied as sympy permutations."""
        if not 1 <= n <= 5:
            raise InvalidGroupTable("Symmetric groups are supported for 1 <= n <= 5")
        perms = [Permutation(list(p)) for p in permutations(range(n))]
        position = {tuple(p.array_form): k for k, p in enumerate(perms)}
        table = [[position[tuple((a * b).array_form)] for b in perms] for a in perms]
        names = [_permutation_name(p) for p in perms]
        return cls(names, table, label=f"symmetric {n}")

    @classmethod
    def direct_product(cls, left: "FiniteGroup", right: "FiniteGroup") -> "FiniteGroup":
        """Direct product; element (a, b) has index a*|right| + b and name a_b."""
        m = right.order
        pairs = [(a, b) for a in left.elements() for b in right.elements()]
        names = ["e" if (a, b) == (0, 0) else f"{left.name(a)}_{right.name(b)}" for a, b in pairs]
        table = [
            [left.mul(a, c) * m + right.mul(b, d) for (c, d) in pairs]
            for (a, b) in pairs
        ]
        return cls(names, table, label=f"product({left.label}, {right.label})")


def _permutation_name(p: Permutation) -> str:
    cycles = [c for c in p.cyclic_form if len(c) > 1]
    if not cycles:
        return "e"
    return "".join("c" + "".join(str(x) for x in cycle) for cycle in cycles)


class GSubset:
    """An immutable subset of a finite group."""

    __slots__ = ("group", "_members")

    def __init__(self, group: FiniteGroup, members: Iterable[int]):
        self.group = group
        ms = frozenset(int(x) for x in members)
        if any(x < 0 or x >= group.order for x in ms):
            raise ValueError("Subset member outside the group")
        self._members: FrozenSet[int] = ms

    @property
    def members(self) -> FrozenSet[int]:
        return self._members

    def sorted(self) -> List[int]:
        return sorted(self._members)

    def names(self) -> List[str]:
        return [self.group.name(g) for g in self.sorted()]

    def __contains__(self, g: int) -> bool:
        return g in self._members

    def __iter__(self) -> Iterator[int]:
        return iter(self.sorted())

    def __len__(self) -> int:
        return len(self._members)

    def __bool__(self) -> bool:
        return bool(self._members)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GSubset):
            return NotImplemented
        return self._members == other._members and self.group == other.group

    def __hash__(self) -> int:
        return hash(self._members)

    def __le__(self, other: "GSubset") -> bool:
        return self._members <= other._members

    def __repr__(self) -> str:
        return "{" + ", ".join(self.names()) + "}"

    def min(self) -> int:
        return min(self._members)

    def union(self, other: "GSubset") -> "GSubset":
        self.group.check_same(other.group)
        return GSubset(self.group, self._members | other._members)

    def intersection(self, other: "GSubset") -> "GSubset":
        self.group.check_same(other.group)
        return GSubset(self.group, self._members & other._members)

    def product(self, other: "GSubset") -> "GSubset":
        """The product set {ab : a in self, b in other}."""
        self.group.check_same(other.group)
        g = self.group
        return GSubset(g, {g.mul(a, b) for a in self._members for b in other._members})

    def left(self, x: int) -> "GSubset":
        g = self.group
        return GSubset(g, {g.mul(x, a) for a in self._members})

    def right(self, x: int) -> "GSubset":
        g = self.group
        return GSubset(g, {g.mul(a, x) for a in self._members})

    def inverse(self) -> "GSubset":
        g = self.group
        return GSubset(g, {g.inv(a) for a in self._members})

    def conjugate(self, x: int) -> "GSubset":
        """x^-1 S x."""
        return self.left(self.group.inv(x)).right(x)

    def is_subgroup(self) -> bool:
        g = self.group
        if 0 not in self._members:
            return False
        return all(g.mul(a, b) in self._members for a in self._members for b in self._members)

    def require_subgroup(self) -> "GSubset":
        if not self.is_subgroup():
            raise NotASubgroup(f"{self!r} is not a subgroup")
        return self


def subgroup_generated(subset: GSubset) -> GSubset:
    """Smallest subgroup containing the subset (closure of a finite semigroup)."""
    g = subset.group
    members = {0} | set(subset.members)
    frontier = list(members)
    while frontier:
        fresh = []
        for a in frontier:
            for b in list(members):
                for c in (g.mul(a, b), g.mul(b, a)):
                    if c not in members:
                        members.add(c)
                        fresh.append(c)
        frontier = fresh
    return GSubset(g, members)


def double_coset(h: GSubset, x: int, k: GSubset) -> GSubset:
    """The double coset HxK."""
    h.require_subgroup()
    k.require_subgroup()
    return h.product(GSubset(h.group, [x])).product(k)


def double_cosets(h: GSubset, k: GSubset, within: Optional[GSubset] = None) -> List[GSubset]:
    """Partition of G (or of a union of double cosets) into (H, K) double cosets, ordered by least element."""
    h.require_subgroup()
    k.require_subgroup()
    group = h.group
    pool = set(within.members) if within is not None else set(group.elements())
    cells: List[GSubset] = []
    while pool:
        x = min(pool)
        cell = double_coset(h, x, k)
        cells.append(cell)
        pool -= cell.members
    return cells


def nonempty(subset: GSubset) -> GSubset:
    if not subset:
        raise EmptySubset("Subset must be nonempty")
    return subset
