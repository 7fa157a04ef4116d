"""
Coset service: coset structures of blocked matrices, their cohomology,
the class conditions C1, C1+, C2 and the double-coset bookkeeping used by positivization.
"""
from itertools import product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from loguru import logger

from src.algebra.coset import CosetStructure
from src.algebra.graph import block_core, is_cycle_core, is_in_Mo, path_weights, scc_structure
from src.algebra.group import GSubset, double_cosets
from src.algebra.matrix import BlockedMatrix, Poset, entries_in, stabilize0
from src.algebra.ring import GroupRingElem
from src.exceptions import BadVertexChoice, NotACosetStructure, NotBlocked
from src.models.certificate import Certificate

PairSets = Dict[Tuple[int, int], List[GSubset]]
Triple = Tuple[int, int, GSubset]


class CosetService:
    """Service class for coset structures and the matrix classes they define."""

    def path_weights(self, a: BlockedMatrix, u: int, v: int) -> GSubset:
        """Weights of all paths of positive length from u to v (possibly empty)."""
        a.require_nonneg()
        return path_weights(a, u, v)

    def cores(self, a: BlockedMatrix) -> List[List[int]]:
        b = a.require_blocking()
        return [block_core(a, i) for i in range(b.count)]

    def default_vertex_choices(self, a: BlockedMatrix) -> List[int]:
        """Least core index of every block."""
        choices = []
        for i, core in enumerate(self.cores(a)):
            if not core:
                raise BadVertexChoice(f"Block {i} has an empty irreducible core")
            choices.append(core[0])
        return choices

    def coset_structure_of(self, a: BlockedMatrix, vertex_choices: Optional[Sequence[int]] = None) -> CosetStructure:
        """H_ij = weights of paths from v(i) to v(j), for i <= j."""
        try:
            b = a.require_blocking()
            a.require_nonneg()
            cores = self.cores(a)
            choices = list(vertex_choices) if vertex_choices is not None else self.default_vertex_choices(a)
            if len(choices) != b.count:
                raise BadVertexChoice(f"Expected {b.count} vertex choices, got {len(choices)}")
            for i, v in enumerate(choices):
                if v not in cores[i]:
                    raise BadVertexChoice(f"Vertex {v} is not in the irreducible core of block {i}")
            return self._structure_from(a, choices, {})
        except Exception as e:
            logger.error(f"Failed to compute coset structure: {e}")
            raise

    def _structure_from(
        self, a: BlockedMatrix, choices: Sequence[int], memo: Dict[Tuple[int, int], GSubset]
    ) -> CosetStructure:
        b = a.require_blocking()
        poset = b.poset
        sets = {}
        for i in range(poset.size):
            for j in range(poset.size):
                if poset.leq(i, j):
                    key = (choices[i], choices[j])
                    if key not in memo:
                        memo[key] = path_weights(a, *key)
                    if not memo[key]:
                        raise NotACosetStructure(f"No path from block {i} to block {j}")
                    sets[(i, j)] = memo[key]
        return CosetStructure(a.group, poset, sets)

    def all_vertex_choices(self, a: BlockedMatrix) -> List[Tuple[List[int], CosetStructure]]:
        """Every distinct structure realized by some vertex choice, with its first choice."""
        cores = self.cores(a)
        memo: Dict[Tuple[int, int], GSubset] = {}
        seen: Dict[CosetStructure, List[int]] = {}
        for choice in product(*cores):
            try:
                h = self._structure_from(a, choice, memo)
            except NotACosetStructure:
                continue
            seen.setdefault(h, list(choice))
        return [(choice, h) for h, choice in seen.items()]

    def cohomologous(
        self, h: CosetStructure, h2: CosetStructure, alpha: Optional[Sequence[int]] = None
    ) -> Optional[List[int]]:
        """Lexicographically first gamma with H[i,j] = gamma_i^-1 H2[alpha(i), alpha(j)] gamma_j."""
        h.group.check_same(h2.group)
        n = h.poset.size
        alpha = list(alpha) if alpha is not None else list(range(n))
        if h2.poset.size != n:
            return None
        for i in range(n):
            for j in range(n):
                if h.poset.leq(i, j) != h2.poset.leq(alpha[i], alpha[j]):
                    return None
        group = h.group
        candidates = []
        for i in range(n):
            target = h.diagonal(i)
            other = h2.diagonal(alpha[i])
            if len(target) != len(other):
                return None
            options = [g for g in group.elements() if other.conjugate(g) == target]
            if not options:
                return None
            candidates.append(options)
        gamma: List[int] = []

        def fits(i: int, gi: int) -> bool:
            for k in range(i):
                if h.poset.less(k, i):
                    moved = h2[alpha[k], alpha[i]].left(group.inv(gamma[k])).right(gi)
                    if moved != h[k, i]:
                        return False
            return True

        def search(i: int) -> bool:
            if i == n:
                return True
            for gi in candidates[i]:
                if fits(i, gi):
                    gamma.append(gi)
                    if search(i + 1):
                        return True
                    gamma.pop()
            return False

        return list(gamma) if search(0) else None

    def cycle_components(self, a: BlockedMatrix) -> List[int]:
        """Components whose irreducible core is a cycle."""
        b = a.require_blocking()
        out = []
        for i in range(b.count):
            core = block_core(a, i)
            if core and len(scc_structure(a, list(b.indices(i))).components) == 1 and is_cycle_core(a, core):
                out.append(i)
        return out

    def in_MoPCNH(self, a: BlockedMatrix, cycles: Sequence[int], structure: CosetStructure) -> bool:
        """Membership of A in M-zero(C, n, H)."""
        b = a.blocking
        if b is None:
            raise NotBlocked("in_MoPCNH needs a blocked matrix")
        if structure.poset != b.poset:
            return False
        if not a.is_nonneg() or not is_in_Mo(a):
            return False
        if sorted(cycles) != self.cycle_components(a):
            return False
        if not entries_in(a, structure.as_dict()):
            return False
        cores = self.cores(a)
        memo: Dict[Tuple[int, int], GSubset] = {}
        for choice in product(*cores):
            try:
                if self._structure_from(a, choice, memo) == structure:
                    return True
            except NotACosetStructure:
                return False
        return False

    def check_C1(self, a: BlockedMatrix, cycles: Sequence[int]) -> bool:
        """n_i = 1 exactly for the cycle components."""
        b = a.require_blocking()
        chosen = set(cycles)
        return all((size == 1) == (i in chosen) for i, size in enumerate(b.sizes))

    def special_indices(self, m: BlockedMatrix, cycles: Sequence[int]) -> Optional[Dict[int, int]]:
        """The index s_i of every cycle component when C1+ holds, else None."""
        b = m.require_blocking()
        out = {}
        for i in cycles:
            block = list(b.indices(i))
            active = [
                s for s in block
                if any(m[s, t] for t in range(m.n)) or any(m[r, s] for r in range(m.n))
            ]
            if len(active) > 1:
                return None
            s_i = active[0] if active else block[0]
            if any(m[s, t] and (s, t) != (s_i, s_i) for s in block for t in block):
                return None
            out[i] = s_i
        return out

    def check_C1plus(self, m: BlockedMatrix, cycles: Sequence[int]) -> bool:
        return self.special_indices(m, cycles) is not None

    def ensure_C2(self, a: BlockedMatrix, cycles: Optional[Sequence[int]] = None) -> BlockedMatrix:
        """0-stabilization adding two indices to every noncycle component."""
        b = a.require_blocking()
        chosen = set(self.cycle_components(a) if cycles is None else cycles)
        sizes = [size if i in chosen else size + 2 for i, size in enumerate(b.sizes)]
        out = stabilize0(a, sizes)
        logger.debug(f"Stabilized block sizes {list(b.sizes)} -> {sizes}")
        return out

    def _visible_identity_summand(self, a: BlockedMatrix, i: int) -> bool:
        b = a.require_blocking()
        block = list(b.indices(i))
        free = [s for s in block if not any(a[s, t] for t in block) and not any(a[r, s] for r in block)]
        return len(free) >= 2

    def check_C2(
        self, a: BlockedMatrix, cycles: Optional[Sequence[int]] = None, via: Optional[Certificate] = None
    ) -> Optional[bool]:
        """True when every noncycle block visibly splits off a 2x2 identity from I - A_i
        (directly, or at the start of a verified blocked certificate ending at A); None otherwise."""
        b = a.require_blocking()
        chosen = set(self.cycle_components(a) if cycles is None else cycles)
        noncycle = [i for i in range(b.count) if i not in chosen]
        if all(self._visible_identity_summand(a, i) for i in noncycle):
            return True
        if via is not None and via.end == a and via.start.blocking == b:
            from src.services.move_service import move_service

            if all(self._visible_identity_summand(via.start, i) for i in noncycle):
                report = move_service.verify_certificate(via)
                if report.ok and report.blocked:
                    return True
        logger.warning("Condition C2 is not visible; the bounded check is inconclusive")
        return None

    def double_cosets_of(self, h: CosetStructure, i: int, j: int) -> List[GSubset]:
        return double_cosets(h.diagonal(i), h.diagonal(j), within=h[i, j])

    def R_sets(self, h: CosetStructure, cycles: Sequence[int]) -> Tuple[PairSets, PairSets, List[Triple]]:
        """D_ij, the non-extendable R_ij, and R^C for every i < j."""
        poset = h.poset
        chosen = set(cycles)
        d_sets: PairSets = {}
        r_sets: PairSets = {}
        rc: List[Triple] = []
        for i, j in poset.pairs():
            cells = self.double_cosets_of(h, i, j)
            d_sets[(i, j)] = cells
            through = [h[i, k].product(h[k, j]) for k in poset.between(i, j)]
            r_sets[(i, j)] = [cell for cell in cells if all(not cell.intersection(p) for p in through)]
            rc.extend((i, j, cell) for cell in r_sets[(i, j)] if i in chosen or j in chosen)
        return d_sets, r_sets, rc

    def deltas(
        self, h: CosetStructure, cycles: Sequence[int]
    ) -> Tuple[Dict[Tuple[int, int], GroupRingElem], Dict[int, GroupRingElem]]:
        """delta_ij = sum of H_ij (i < j); delta_i = sum of <g_i> = H_i on cycles, 1 elsewhere."""
        chosen = set(cycles)
        pair = {(i, j): GroupRingElem.sum_of(h[i, j]) for i, j in h.poset.pairs()}
        single = {
            i: GroupRingElem.sum_of(h.diagonal(i)) if i in chosen else GroupRingElem.one(h.group)
            for i in range(h.poset.size)
        }
        return pair, single

    def rho(self, poset: Poset) -> Dict[Tuple[int, int], int]:
        """rho(i,j) = m for (i,j) in S_m \\ S_(m-1)."""
        pending = set(poset.pairs())
        done: Dict[Tuple[int, int], int] = {}
        m = 0
        while pending:
            m += 1
            level = {
                (i, j) for (i, j) in pending
                if all((i, k) in done and (k, j) in done for k in poset.between(i, j))
            }
            for pair in level:
                done[pair] = m
            pending -= level
        return done

    def is_plusplus(self, m: BlockedMatrix, cycles: Sequence[int], h: CosetStructure) -> bool:
        """M in M++(C, n, H), with M = A - I."""
        return not self.plusplus_problems(m, cycles, h)

    def plusplus_problems(self, m: BlockedMatrix, cycles: Sequence[int], h: CosetStructure) -> List[str]:
        b = m.require_blocking()
        group = m.group
        problems: List[str] = []
        a = m + BlockedMatrix.identity(group, m.n)
        if not a.is_nonneg():
            problems.append("M + I leaves Z+G")
        if not a.is_blocked_form() or not entries_in(a, h.as_dict()):
            problems.append("entries leave the blocks of the coset structure")
        chosen = set(cycles)
        for i in range(b.count):
            block = list(b.indices(i))
            if i in chosen:
                if len(block) != 1 or not a[block[0], block[0]].is_group_element():
                    problems.append(f"cycle block {i} is not of the form (g - 1)")
                continue
            hi = h.diagonal(i)
            for s in block:
                for t in block:
                    if not m[s, t].is_positive_on(hi):
                        problems.append(f"entry ({s},{t}) of block {i} is not H_{i}-positive")
        _, _, rc = self.R_sets(h, cycles)
        rc_keys = {(i, j, cell) for i, j, cell in rc}
        for i, j in b.poset.pairs():
            for cell in self.double_cosets_of(h, i, j):
                strict = (i, j, cell) not in rc_keys
                for s in b.indices(i):
                    for t in b.indices(j):
                        part = m[s, t].project(cell)
                        if strict and not part.is_positive_on(cell):
                            problems.append(f"entry ({s},{t}) is not D-positive on {cell!r}")
                        if not strict and (not part or not part.is_nonneg()):
                            problems.append(f"entry ({s},{t}) vanishes on {cell!r}")
        return problems

    def iter_targets(self, h: CosetStructure, cycles: Sequence[int]) -> Iterator[Tuple[int, int, GSubset, bool]]:
        """(i, j, D, in R^C) for every i < j in increasing rho order."""
        ranks = self.rho(h.poset)
        _, _, rc = self.R_sets(h, cycles)
        rc_keys = {(i, j, cell) for i, j, cell in rc}
        for i, j in sorted(h.poset.pairs(), key=lambda p: (ranks[p], p)):
            for cell in self.double_cosets_of(h, i, j):
                yield i, j, cell, (i, j, cell) in rc_keys


# Global coset service instance
coset_service = CosetService()
