"""
Seeded random instances: groups, posets, blocked matrices over Z+G and diagonal vectors.

Entries are drawn independently: a position is nonzero with probability `density`, and a
nonzero entry gets each group element with coefficient uniform in 0..max_entry (at least one
coefficient is made positive).
"""
from typing import List, Optional, Sequence

import numpy as np

from src.algebra.group import FiniteGroup
from src.algebra.matrix import Blocking, BlockedMatrix, Poset
from src.algebra.ring import GroupRingElem
from src.config.settings import random_settings

GROUPS = {
    "trivial": lambda: FiniteGroup.trivial(),
    "z2": lambda: FiniteGroup.cyclic(2),
    "z3": lambda: FiniteGroup.cyclic(3),
    "z4": lambda: FiniteGroup.cyclic(4),
    "z6": lambda: FiniteGroup.cyclic(6),
    "s3": lambda: FiniteGroup.symmetric(3),
    "z2xz2": lambda: FiniteGroup.direct_product(FiniteGroup.cyclic(2), FiniteGroup.cyclic(2)),
    "z2xz4": lambda: FiniteGroup.direct_product(FiniteGroup.cyclic(2), FiniteGroup.cyclic(4)),
}


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    return np.random.default_rng(random_settings.seed if seed is None else seed)


def named_group(name: str) -> FiniteGroup:
    if name not in GROUPS:
        raise KeyError(f"Unknown group '{name}'; choose from {sorted(GROUPS)}")
    return GROUPS[name]()


def random_group(rng: np.random.Generator, names: Sequence[str] = ("z2", "z3", "z6", "s3")) -> FiniteGroup:
    return named_group(str(rng.choice(list(names))))


def random_element(
    rng: np.random.Generator,
    group: FiniteGroup,
    max_entry: Optional[int] = None,
    support: Optional[Sequence[int]] = None,
    sparse: bool = True,
) -> GroupRingElem:
    """A nonzero element of Z+G supported in `support` (all of G by default)."""
    top = random_settings.max_entry if max_entry is None else max_entry
    elements = list(group.elements()) if support is None else list(support)
    coeffs = {g: int(rng.integers(0, top + 1)) for g in elements}
    if sparse:
        # keep a single summand most of the time
        keep = int(rng.choice(elements))
        coeffs = {g: c for g, c in coeffs.items() if g == keep or rng.random() < 0.25}
    if not any(coeffs.values()):
        coeffs[int(rng.choice(elements))] = 1
    return GroupRingElem(group, coeffs)


def random_poset(rng: np.random.Generator, size: int, p: float = 0.5) -> Poset:
    return Poset(size, [(i, j) for i in range(size) for j in range(i + 1, size) if rng.random() < p])


def random_matrix(
    rng: np.random.Generator,
    group: FiniteGroup,
    n: int,
    density: Optional[float] = None,
    max_entry: Optional[int] = None,
    blocking: Optional[Blocking] = None,
) -> BlockedMatrix:
    """Nonnegative matrix; with a blocking only positions allowed by the poset are filled."""
    p = random_settings.density if density is None else density
    entries = {}
    for s in range(n):
        for t in range(n):
            if blocking is not None and not blocking.allows(s, t):
                continue
            if rng.random() < p:
                entries[(s, t)] = random_element(rng, group, max_entry)
    return BlockedMatrix.from_entries(group, n, entries, blocking)


def random_irreducible(
    rng: np.random.Generator,
    group: FiniteGroup,
    n: int,
    density: Optional[float] = None,
    max_entry: Optional[int] = None,
) -> BlockedMatrix:
    """Random matrix plus a Hamiltonian cycle 0 -> 1 -> ... -> n-1 -> 0 with random labels."""
    base = random_matrix(rng, group, n, density, max_entry)
    updates = {}
    for s in range(n):
        t = (s + 1) % n
        label = GroupRingElem.of(group, int(rng.integers(0, group.order)))
        updates[(s, t)] = base[s, t] + label
    return base.with_entries(updates)


def random_blocked(
    rng: np.random.Generator,
    group: FiniteGroup,
    poset: Poset,
    sizes: Sequence[int],
    density: Optional[float] = None,
    max_entry: Optional[int] = None,
    irreducible_blocks: bool = True,
) -> BlockedMatrix:
    """Blocked-form matrix whose diagonal blocks are irreducible when asked."""
    blocking = Blocking(poset, sizes)
    a = random_matrix(rng, group, blocking.n, density, max_entry, blocking)
    if not irreducible_blocks:
        return a
    updates = {}
    for i in range(poset.size):
        block = list(blocking.indices(i))
        for k, s in enumerate(block):
            t = block[(k + 1) % len(block)]
            label = GroupRingElem.of(group, int(rng.integers(0, group.order)))
            updates[(s, t)] = a[s, t] + label
    for i, j in poset.covering_pairs():
        s, t = blocking.start(i), blocking.start(j)
        if not a[s, t]:
            updates[(s, t)] = GroupRingElem.of(group, int(rng.integers(0, group.order)))
    return a.with_entries(updates)


def random_diagonal(rng: np.random.Generator, group: FiniteGroup, n: int) -> List[int]:
    return [int(rng.integers(0, group.order)) for _ in range(n)]


def random_permutation(rng: np.random.Generator, n: int) -> List[int]:
    return [int(x) for x in rng.permutation(n)]
