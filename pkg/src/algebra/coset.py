"""
Coset structures: nonempty subsets H_ij of G attached to the relations i <= j of a poset.
"""
from typing import Dict, Iterator, List, Mapping, Sequence, Tuple

from src.algebra.group import FiniteGroup, GSubset
from src.algebra.matrix import Poset
from src.exceptions import NotACosetStructure


class CosetStructure:
    """A map (i <= j) -> H_ij with H_ij H_jk inside H_ik."""

    __slots__ = ("group", "poset", "_sets")

    def __init__(self, group: FiniteGroup, poset: Poset, sets: Mapping[Tuple[int, int], GSubset], check: bool = True):
        self.group = group
        self.poset = poset
        self._sets: Dict[Tuple[int, int], GSubset] = dict(sets)
        if check:
            self.validate()

    def validate(self) -> None:
        p = self.poset
        for i in range(p.size):
            for j in range(p.size):
                if p.leq(i, j):
                    cell = self._sets.get((i, j))
                    if cell is None or not cell:
                        raise NotACosetStructure(f"H[{i},{j}] is missing or empty")
                elif (i, j) in self._sets:
                    raise NotACosetStructure(f"H[{i},{j}] given for unrelated components")
        for i in range(p.size):
            for j in range(p.size):
                if not p.leq(i, j):
                    continue
                for k in range(p.size):
                    if p.leq(j, k) and not self[i, j].product(self[j, k]) <= self[i, k]:
                        raise NotACosetStructure(f"H[{i},{j}] H[{j},{k}] is not inside H[{i},{k}]")

    def __getitem__(self, key: Tuple[int, int]) -> GSubset:
        return self._sets[key]

    def diagonal(self, i: int) -> GSubset:
        return self._sets[(i, i)]

    def items(self) -> Iterator[Tuple[Tuple[int, int], GSubset]]:
        for key in sorted(self._sets):
            yield key, self._sets[key]

    def as_dict(self) -> Dict[Tuple[int, int], GSubset]:
        return dict(self._sets)

    def conjugated(self, gamma: Sequence[int]) -> "CosetStructure":
        """The structure gamma_i^-1 H_ij gamma_j."""
        inv = self.group.inv
        return CosetStructure(
            self.group,
            self.poset,
            {(i, j): h.left(inv(gamma[i])).right(gamma[j]) for (i, j), h in self._sets.items()},
        )

    def relabeled(self, alpha: Sequence[int], poset: Poset) -> "CosetStructure":
        """Pull back along an order isomorphism: result[i, j] = self[alpha[i], alpha[j]]."""
        sets = {
            (i, j): self._sets[(alpha[i], alpha[j])]
            for i in range(poset.size) for j in range(poset.size) if poset.leq(i, j)
        }
        return CosetStructure(self.group, poset, sets)

    def describe(self) -> List[str]:
        return [f"({i},{j}) -> {{{', '.join(h.names())}}}" for (i, j), h in self.items()]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CosetStructure):
            return NotImplemented
        return self.poset == other.poset and self._sets == other._sets

    def __hash__(self) -> int:
        return hash((self.poset, tuple(sorted((k, v.members) for k, v in self._sets.items()))))

    def __repr__(self) -> str:
        return "CosetStructure(" + "; ".join(self.describe()) + ")"
