"""
Square matrices over ZG with optional poset blocking.
"""
from itertools import product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.algebra.group import FiniteGroup, GSubset
from src.algebra.ring import GroupRingElem, regular_matrix
from src.exceptions import NegativeEntry, NotBlocked, ShrinkNotAllowed, SizeMismatch


class Poset:
    """A partial order on {0..N-1} compatible with the natural order."""

    __slots__ = ("size", "_less")

    def __init__(self, size: int, relations: Iterable[Tuple[int, int]] = ()):
        self.size = int(size)
        pairs = set()
        for i, j in relations:
            if not (0 <= i < self.size and 0 <= j < self.size):
                raise NotBlocked(f"Poset relation ({i}, {j}) outside 0..{self.size - 1}")
            if i == j:
                continue
            if i > j:
                raise NotBlocked(f"Poset relation {i} < {j} violates the index order")
            pairs.add((i, j))
        # transitive closure; i < j always, so one sweep in increasing middle index suffices
        for k in range(self.size):
            for i in range(k):
                if (i, k) in pairs:
                    for j in range(k + 1, self.size):
                        if (k, j) in pairs:
                            pairs.add((i, j))
        self._less: FrozenSet[Tuple[int, int]] = frozenset(pairs)

    @classmethod
    def chain(cls, size: int) -> "Poset":
        return cls(size, [(i, i + 1) for i in range(size - 1)])

    @classmethod
    def antichain(cls, size: int) -> "Poset":
        return cls(size)

    def less(self, i: int, j: int) -> bool:
        return (i, j) in self._less

    def leq(self, i: int, j: int) -> bool:
        return i == j or (i, j) in self._less

    def pairs(self) -> List[Tuple[int, int]]:
        """Strict relations i < j, sorted."""
        return sorted(self._less)

    def covering_pairs(self) -> List[Tuple[int, int]]:
        return [
            (i, j) for (i, j) in self.pairs()
            if not any(self.less(i, k) and self.less(k, j) for k in range(i + 1, j))
        ]

    def between(self, i: int, j: int) -> List[int]:
        return [k for k in range(i + 1, j) if self.less(i, k) and self.less(k, j)]

    def restrict(self, keep: Sequence[int]) -> "Poset":
        """Induced order on the kept elements, renumbered in increasing order."""
        keep = sorted(keep)
        where = {c: k for k, c in enumerate(keep)}
        return Poset(len(keep), [(where[i], where[j]) for (i, j) in self._less if i in where and j in where])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Poset):
            return NotImplemented
        return self.size == other.size and self._less == other._less

    def __hash__(self) -> int:
        return hash((self.size, self._less))

    def __repr__(self) -> str:
        return f"Poset({self.size}, {self.pairs()})"


class Blocking:
    """Poset plus size vector; index s of the matrix belongs to component i(s)."""

    __slots__ = ("poset", "sizes", "_comp", "_starts")

    def __init__(self, poset: Poset, sizes: Sequence[int]):
        if len(sizes) != poset.size:
            raise NotBlocked(f"Size vector has {len(sizes)} entries for a poset on {poset.size} elements")
        if any(s < 0 for s in sizes):
            raise NotBlocked("Block sizes must be nonnegative")
        self.poset = poset
        self.sizes: Tuple[int, ...] = tuple(int(s) for s in sizes)
        self._starts: List[int] = []
        self._comp: List[int] = []
        offset = 0
        for i, size in enumerate(self.sizes):
            self._starts.append(offset)
            self._comp.extend([i] * size)
            offset += size

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def count(self) -> int:
        return self.poset.size

    def comp(self, s: int) -> int:
        return self._comp[s]

    def indices(self, i: int) -> range:
        return range(self._starts[i], self._starts[i] + self.sizes[i])

    def start(self, i: int) -> int:
        return self._starts[i]

    def allows(self, s: int, t: int) -> bool:
        return self.poset.leq(self._comp[s], self._comp[t])

    def insert(self, i: int, extra: int = 1) -> "Blocking":
        sizes = list(self.sizes)
        sizes[i] += extra
        return Blocking(self.poset, sizes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Blocking):
            return NotImplemented
        return self.poset == other.poset and self.sizes == other.sizes

    def __hash__(self) -> int:
        return hash((self.poset, self.sizes))

    def __repr__(self) -> str:
        return f"Blocking({self.poset!r}, sizes={list(self.sizes)})"


Entry = Union[GroupRingElem, int]


class BlockedMatrix:
    """An immutable n x n matrix over ZG, optionally carrying a blocking."""

    __slots__ = ("group", "_rows", "blocking", "_hash")

    def __init__(
        self,
        group: FiniteGroup,
        rows: Sequence[Sequence[Entry]],
        blocking: Optional[Blocking] = None,
    ):
        self.group = group
        n = len(rows)
        built = []
        for row in rows:
            if len(row) != n:
                raise SizeMismatch(f"Matrix rows must have length {n}")
            built.append(tuple(self._entry(x) for x in row))
        self._rows: Tuple[Tuple[GroupRingElem, ...], ...] = tuple(built)
        if blocking is not None and blocking.n != n:
            raise SizeMismatch(f"Blocking sizes sum to {blocking.n}, matrix has size {n}")
        self.blocking = blocking
        self._hash: Optional[int] = None

    def _entry(self, x: Entry) -> GroupRingElem:
        if isinstance(x, GroupRingElem):
            self.group.check_same(x.group)
            return x
        return GroupRingElem(self.group, {0: int(x)})

    # constructors

    @classmethod
    def zeros(cls, group: FiniteGroup, n: int, blocking: Optional[Blocking] = None) -> "BlockedMatrix":
        zero = GroupRingElem.zero(group)
        return cls(group, [[zero] * n for _ in range(n)], blocking)

    @classmethod
    def identity(cls, group: FiniteGroup, n: int, blocking: Optional[Blocking] = None) -> "BlockedMatrix":
        zero, one = GroupRingElem.zero(group), GroupRingElem.one(group)
        return cls(group, [[one if s == t else zero for t in range(n)] for s in range(n)], blocking)

    @classmethod
    def from_entries(
        cls,
        group: FiniteGroup,
        n: int,
        entries: Mapping[Tuple[int, int], Entry],
        blocking: Optional[Blocking] = None,
    ) -> "BlockedMatrix":
        zero = GroupRingElem.zero(group)
        rows = [[zero] * n for _ in range(n)]
        for (s, t), x in entries.items():
            rows[s][t] = x
        return cls(group, rows, blocking)

    # access

    @property
    def n(self) -> int:
        return len(self._rows)

    def __getitem__(self, key: Tuple[int, int]) -> GroupRingElem:
        s, t = key
        return self._rows[s][t]

    def row(self, s: int) -> Tuple[GroupRingElem, ...]:
        return self._rows[s]

    def column(self, t: int) -> Tuple[GroupRingElem, ...]:
        return tuple(row[t] for row in self._rows)

    def rows(self) -> Tuple[Tuple[GroupRingElem, ...], ...]:
        return self._rows

    def nonzero_positions(self) -> Iterator[Tuple[int, int]]:
        for s, row in enumerate(self._rows):
            for t, x in enumerate(row):
                if x:
                    yield s, t

    def require_blocking(self) -> Blocking:
        if self.blocking is None:
            raise NotBlocked("Operation needs a blocked matrix")
        return self.blocking

    def comp(self, s: int) -> int:
        return self.require_blocking().comp(s)

    def block(self, i: int, j: int) -> List[List[GroupRingElem]]:
        b = self.require_blocking()
        return [[self._rows[s][t] for t in b.indices(j)] for s in b.indices(i)]

    def diagonal_block(self, i: int) -> "BlockedMatrix":
        b = self.require_blocking()
        return self.principal(list(b.indices(i)), keep_blocking=False)

    # updates (return new matrices)

    def with_entries(self, updates: Mapping[Tuple[int, int], GroupRingElem]) -> "BlockedMatrix":
        rows = [list(r) for r in self._rows]
        for (s, t), x in updates.items():
            rows[s][t] = x
        return BlockedMatrix(self.group, rows, self.blocking)

    def with_blocking(self, blocking: Optional[Blocking]) -> "BlockedMatrix":
        return BlockedMatrix(self.group, self._rows, blocking)

    def principal(self, keep: Sequence[int], keep_blocking: bool = True) -> "BlockedMatrix":
        """Principal submatrix on the kept indices (in the given order when unblocked)."""
        keep = list(keep)
        rows = [[self._rows[s][t] for t in keep] for s in keep]
        blocking = None
        if keep_blocking and self.blocking is not None:
            keep = sorted(keep)
            rows = [[self._rows[s][t] for t in keep] for s in keep]
            sizes = [sum(1 for s in keep if self.blocking.comp(s) == i) for i in range(self.blocking.count)]
            present = [i for i, size in enumerate(sizes) if size > 0]
            blocking = Blocking(self.blocking.poset.restrict(present), [sizes[i] for i in present])
        return BlockedMatrix(self.group, rows, blocking)

    def permuted(self, order: Sequence[int], blocking: Optional[Blocking] = None) -> "BlockedMatrix":
        """B(s,t) = A(order[s], order[t])."""
        if sorted(order) != list(range(self.n)):
            raise SizeMismatch("Reordering must be a permutation of the indices")
        rows = [[self._rows[p][q] for q in order] for p in order]
        return BlockedMatrix(self.group, rows, blocking)

    def insert_zero_index(self, position: int, component: Optional[int] = None) -> "BlockedMatrix":
        """0-stabilization by one index placed at `position`."""
        zero = GroupRingElem.zero(self.group)
        rows = [list(r) for r in self._rows]
        for r in rows:
            r.insert(position, zero)
        rows.insert(position, [zero] * (self.n + 1))
        blocking = None
        if self.blocking is not None:
            if component is None:
                component = self.blocking.comp(position) if position < self.n else self.blocking.count - 1
            blocking = self.blocking.insert(component)
        return BlockedMatrix(self.group, rows, blocking)

    # arithmetic

    def _check(self, other: "BlockedMatrix") -> None:
        self.group.check_same(other.group)
        if self.n != other.n:
            raise SizeMismatch(f"Sizes {self.n} and {other.n} differ")

    def __add__(self, other: "BlockedMatrix") -> "BlockedMatrix":
        self._check(other)
        rows = [[a + b for a, b in zip(r, q)] for r, q in zip(self._rows, other._rows)]
        return BlockedMatrix(self.group, rows, self.blocking)

    def __sub__(self, other: "BlockedMatrix") -> "BlockedMatrix":
        self._check(other)
        rows = [[a - b for a, b in zip(r, q)] for r, q in zip(self._rows, other._rows)]
        return BlockedMatrix(self.group, rows, self.blocking)

    def __neg__(self) -> "BlockedMatrix":
        return BlockedMatrix(self.group, [[-a for a in r] for r in self._rows], self.blocking)

    def __matmul__(self, other: "BlockedMatrix") -> "BlockedMatrix":
        self._check(other)
        n = self.n
        zero = GroupRingElem.zero(self.group)
        cols = [other.column(t) for t in range(n)]
        rows = []
        for r in self._rows:
            out = []
            for col in cols:
                acc = zero
                for a, b in zip(r, col):
                    if a and b:
                        acc = acc + a * b
                out.append(acc)
            rows.append(out)
        return BlockedMatrix(self.group, rows, self.blocking or other.blocking)

    def scaled(self, k: int) -> "BlockedMatrix":
        return BlockedMatrix(self.group, [[a * k for a in r] for r in self._rows], self.blocking)

    def one_minus(self) -> "BlockedMatrix":
        """I - A."""
        return BlockedMatrix.identity(self.group, self.n, self.blocking) - self

    def star(self) -> "BlockedMatrix":
        """Conjugate transpose: A*(s,t) = A(t,s)* (reverses a blocking's order)."""
        n = self.n
        rows = [[self._rows[t][s].star() for t in range(n)] for s in range(n)]
        return BlockedMatrix(self.group, rows)

    # predicates

    def is_nonneg(self) -> bool:
        return all(x.is_nonneg() for r in self._rows for x in r)

    def require_nonneg(self) -> "BlockedMatrix":
        if not self.is_nonneg():
            raise NegativeEntry("Matrix must have entries in Z+G")
        return self

    def is_blocked_form(self) -> bool:
        b = self.require_blocking()
        return all(b.allows(s, t) for s, t in self.nonzero_positions())

    def is_upper_unitriangular(self) -> bool:
        return all(
            (self._rows[s][t] == (1 if s == t else 0)) if s >= t else True
            for s in range(self.n) for t in range(self.n)
        )

    def is_identity(self) -> bool:
        return all(self._rows[s][t] == (1 if s == t else 0) for s in range(self.n) for t in range(self.n))

    def augment(self) -> np.ndarray:
        return np.array([[x.augment() for x in r] for r in self._rows], dtype=object).reshape(self.n, self.n)

    def lift(self) -> np.ndarray:
        """Integer matrix of the regular lift: block (s,t) is R(A(s,t))."""
        k = self.group.order
        big = np.zeros((self.n * k, self.n * k), dtype=np.int64)
        for s, t in self.nonzero_positions():
            big[s * k:(s + 1) * k, t * k:(t + 1) * k] = np.array(regular_matrix(self._rows[s][t]), dtype=np.int64)
        return big

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BlockedMatrix):
            return NotImplemented
        return self._rows == other._rows and self.group == other.group

    def same_as(self, other: "BlockedMatrix") -> bool:
        """Equality including the blocking."""
        return self == other and self.blocking == other.blocking

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._rows)
        return self._hash

    def format(self) -> str:
        width = max((len(x.format()) for r in self._rows for x in r), default=1)
        return "\n".join("  ".join(x.format().rjust(width) for x in r) for r in self._rows)

    def __repr__(self) -> str:
        return f"BlockedMatrix(n={self.n}, group={self.group.label})"


class ElementaryMatrix:
    """E_st(x): the identity except for the off-diagonal entry x at (s, t)."""

    __slots__ = ("n", "s", "t", "value")

    def __init__(self, n: int, s: int, t: int, value: GroupRingElem):
        if s == t:
            raise ValueError("Elementary matrices need s != t")
        if not (0 <= s < n and 0 <= t < n):
            raise SizeMismatch(f"Position ({s}, {t}) outside a {n}x{n} matrix")
        self.n, self.s, self.t, self.value = n, s, t, value

    def inverse(self) -> "ElementaryMatrix":
        return ElementaryMatrix(self.n, self.s, self.t, -self.value)

    def matrix(self, blocking: Optional[Blocking] = None) -> BlockedMatrix:
        ident = BlockedMatrix.identity(self.value.group, self.n, blocking)
        return ident.with_entries({(self.s, self.t): self.value})

    def left_apply(self, m: BlockedMatrix) -> BlockedMatrix:
        """E @ m without a full product: row s += value * row t."""
        rows = [list(r) for r in m.rows()]
        x = self.value
        rows[self.s] = [a + x * b if b else a for a, b in zip(rows[self.s], m.row(self.t))]
        return BlockedMatrix(m.group, rows, m.blocking)

    def right_apply(self, m: BlockedMatrix) -> BlockedMatrix:
        """m @ E: column t += column s * value."""
        rows = [list(r) for r in m.rows()]
        x = self.value
        for r in rows:
            if r[self.s]:
                r[self.t] = r[self.t] + r[self.s] * x
        return BlockedMatrix(m.group, rows, m.blocking)


def mat_mul(a: BlockedMatrix, b: BlockedMatrix) -> BlockedMatrix:
    return a @ b


def mat_identity(group: FiniteGroup, n: int) -> BlockedMatrix:
    return BlockedMatrix.identity(group, n)


def mat_power(a: BlockedMatrix, k: int) -> BlockedMatrix:
    if k < 0:
        raise ValueError("Only nonnegative powers are defined")
    result = BlockedMatrix.identity(a.group, a.n, a.blocking)
    base = a
    while k:
        if k & 1:
            result = result @ base
        base = base @ base
        k >>= 1
    return result


def augment_matrix(a: BlockedMatrix) -> np.ndarray:
    return a.augment()


def _target_sizes(a: BlockedMatrix, m: Union[int, Sequence[int]]) -> List[int]:
    if a.blocking is None:
        if not isinstance(m, int):
            raise NotBlocked("Unblocked matrices stabilize to a single size")
        if m < a.n:
            raise ShrinkNotAllowed(f"Target size {m} is smaller than {a.n}")
        return [m]
    sizes = [m] if isinstance(m, int) and a.blocking.count == 1 else list(m)
    if len(sizes) != a.blocking.count:
        raise SizeMismatch("Target size vector must match the number of components")
    for have, want in zip(a.blocking.sizes, sizes):
        if want < have:
            raise ShrinkNotAllowed(f"Target block size {want} is smaller than {have}")
    return sizes


def _stabilize(a: BlockedMatrix, m: Union[int, Sequence[int]], fill_diagonal: int) -> BlockedMatrix:
    sizes = _target_sizes(a, m)
    group = a.group
    if a.blocking is None:
        old_to_new = list(range(a.n))
        n = sizes[0]
        blocking = None
    else:
        old_to_new = []
        offset = 0
        for i, size in enumerate(a.blocking.sizes):
            old_to_new.extend(range(offset, offset + size))
            offset += sizes[i]
        n = offset
        blocking = Blocking(a.blocking.poset, sizes)
    zero = GroupRingElem.zero(group)
    rows = [[zero] * n for _ in range(n)]
    old = set(old_to_new)
    for s in range(n):
        if s not in old:
            rows[s][s] = GroupRingElem(group, {0: fill_diagonal})
    for s, t in product(range(a.n), repeat=2):
        rows[old_to_new[s]][old_to_new[t]] = a[s, t]
    return BlockedMatrix(group, rows, blocking)


def stabilize0(a: BlockedMatrix, m: Union[int, Sequence[int]]) -> BlockedMatrix:
    """Pad with zero rows/columns (new indices go to the end of each block)."""
    return _stabilize(a, m, 0)


def stabilize1(m_matrix: BlockedMatrix, m: Union[int, Sequence[int]]) -> BlockedMatrix:
    """Pad with identity rows/columns (new indices go to the end of each block)."""
    return _stabilize(m_matrix, m, 1)


def stabilization_map(a: BlockedMatrix, m: Union[int, Sequence[int]]) -> List[int]:
    """Old index -> new index under stabilize0/stabilize1 to the given sizes."""
    sizes = _target_sizes(a, m)
    if a.blocking is None:
        return list(range(a.n))
    out: List[int] = []
    offset = 0
    for i, size in enumerate(a.blocking.sizes):
        out.extend(range(offset, offset + size))
        offset += sizes[i]
    return out


def entries_in(a: BlockedMatrix, supports: Mapping[Tuple[int, int], GSubset]) -> bool:
    """Every entry A(s,t) is supported in the subset attached to (i(s), i(t))."""
    b = a.require_blocking()
    for s, t in a.nonzero_positions():
        key = (b.comp(s), b.comp(t))
        if key not in supports or not a[s, t].supported_in(supports[key]):
            return False
    return True
