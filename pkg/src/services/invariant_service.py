"""
Invariant service: stabilizer data of irreducible matrices, orbit counts,
determinant tuples with the kappa reduction, and realization of M++ classes.
"""
from collections import deque
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import sympy
from loguru import logger

from src.algebra.coset import CosetStructure
from src.algebra.graph import digraph, is_irreducible, lift_regular, path_weights, period, recurrent_states, weighted_walk
from src.algebra.group import FiniteGroup, GSubset, subgroup_generated
from src.algebra.matrix import BlockedMatrix, entries_in, stabilize0
from src.algebra.ring import GroupRingElem
from src.exceptions import (
    GSFTError,
    InvariantError,
    NonAbelian,
    NotIrreducible,
    NotNormalForm,
    NotRealizable,
    ZeroDivisorDet,
)
from src.models.certificate import Certificate
from src.models.reports import CensusReport, DetTuple, StabilizerReport
from src.services.coset_service import coset_service
from src.services.move_service import MoveScript, diagonal_conjugate


def ring_det(m: BlockedMatrix) -> GroupRingElem:
    """Determinant over a commutative group ring by Laplace expansion along rows."""
    n = m.n
    group = m.group
    memo: Dict[Tuple[int, ...], GroupRingElem] = {}

    def minor(cols: Tuple[int, ...]) -> GroupRingElem:
        if not cols:
            return GroupRingElem.one(group)
        if cols in memo:
            return memo[cols]
        row = n - len(cols)
        acc = GroupRingElem.zero(group)
        for k, c in enumerate(cols):
            x = m[row, c]
            if not x:
                continue
            term = x * minor(cols[:k] + cols[k + 1:])
            acc = acc + term if k % 2 == 0 else acc - term
        memo[cols] = acc
        return acc

    return minor(tuple(range(n)))


def restricted_lift(m: BlockedMatrix, subgroup: GSubset) -> List[List[int]]:
    """Integer matrix of m over Z[subgroup]: row (r, a), column (t, b) holds m(r,t)(a^-1 b)."""
    group = m.group
    members = subgroup.sorted()
    size = len(members)
    out = [[0] * (m.n * size) for _ in range(m.n * size)]
    for r, t in m.nonzero_positions():
        if not m[r, t].supported_in(subgroup):
            raise NotNormalForm(f"Entry ({r},{t}) leaves the subgroup {subgroup!r}")
        for a, x in enumerate(members):
            for b, y in enumerate(members):
                out[r * size + a][t * size + b] = m[r, t].coeff(group.mul(group.inv(x), y))
    return out


class InvariantService:
    """Service class for G-flow equivalence invariants and realizability."""

    # stabilizers

    def _require_recurrent(self, a: BlockedMatrix, i: int) -> None:
        if not 0 <= i < a.n or i not in recurrent_states(a):
            raise NotIrreducible(f"Index {i} does not lie on a cycle of the matrix")

    def weights_group(self, a: BlockedMatrix, i: int) -> GSubset:
        """W_i: weights of closed walks at i."""
        a.require_nonneg()
        self._require_recurrent(a, i)
        return path_weights(a, i, i).require_subgroup()

    def ratio_group(self, a: BlockedMatrix, i: int) -> GSubset:
        """Delta_i: ratios g h^-1 of weights of closed walks at i with equal lengths."""
        a.require_nonneg()
        self._require_recurrent(a, i)
        group = a.group
        k = group.order
        step = (a.lift() > 0).astype(np.int64)
        # row (i, e) of the k-th power of the lift lists the weights of length-k walks from i
        vec = step[i * k].copy()
        seen = set()
        ratios = set()
        while vec.tobytes() not in seen:
            seen.add(vec.tobytes())
            here = [g for g in range(k) if vec[i * k + g]]
            ratios.update(group.mul(g, group.inv(h)) for g in here for h in here)
            vec = ((vec @ step) > 0).astype(np.int64)
        return GSubset(group, ratios).require_subgroup()

    def stabilizer_data(self, a: BlockedMatrix, i: int) -> StabilizerReport:
        try:
            a.require_nonneg()
            if not is_irreducible(a):
                raise NotIrreducible("Stabilizer data needs an irreducible matrix")
            group = a.group
            h = self.weights_group(a, i)
            h0 = self.ratio_group(a, i)
            if not all(h0.conjugate(x) == h0 for x in h):
                raise InvariantError(f"Ratio group {h0!r} is not normal in {h!r}")
            lifted = nx.DiGraph(lift_regular(a).graph)
            root = (i, group.identity)
            component = next(c for c in nx.strongly_connected_components(lifted) if root in c)
            sub = lifted.subgraph(component)
            p = period(sub)
            level = nx.single_source_shortest_path_length(sub, root)
            # the base period moves C0 to the class of the stabilizer coset
            shift = period(digraph(a)) % p
            h1 = GSubset(group, [x for x in h if level[(i, x)] % p == shift])
            if not h1 or h1 != h0.left(h1.min()):
                raise InvariantError(f"Stabilizer coset {h1!r} is not a coset of {h0!r}")
            witnesses = {}
            for x in h:
                walk = weighted_walk(a, i, i, x)
                witnesses[x] = [i] + [s for s, _ in walk]
            logger.info(f"Stabilizer data at {i}: |H| = {len(h)}, |H0| = {len(h0)}, period {p}")
            return StabilizerReport(
                component=list(range(a.n)),
                index=i,
                period=p,
                stabilizer=h,
                primitive_stabilizer=h0,
                stabilizer_coset=h1,
                witnesses=witnesses,
            )
        except GSFTError:
            raise
        except Exception as e:
            logger.error(f"Failed to compute stabilizer data: {e}")
            raise

    def reduce_to_weights_group(self, a: BlockedMatrix, i: int) -> Tuple[List[int], BlockedMatrix]:
        """Diagonal entries d and B = D A D^-1 with every entry supported in W_i."""
        a.require_nonneg()
        if not is_irreducible(a):
            raise NotIrreducible("The reduction needs an irreducible matrix")
        group = a.group
        h = self.weights_group(a, i)
        d = []
        for s in range(a.n):
            # any element of H w, w a path weight from i to s, works; prefer the least one
            w = group.identity if s == i else path_weights(a, i, s).min()
            d.append(h.right(w).min())
        b = diagonal_conjugate(a, [group.inv(x) for x in d])
        if not all(b[s, t].supported_in(h) for s, t in b.nonzero_positions()):
            raise InvariantError("Conjugated matrix leaves the weights group")
        return d, b

    # orbit counts

    def orbit_census(self, a: BlockedMatrix) -> CensusReport:
        """Periodic components and the orbits that leave the minimal cycles.

        Counts are finite when every strongly connected component is a single cycle;
        a non-periodic orbit is then determined by its first passage between two cycles.
        """
        a.require_nonneg()
        components, periods, finite, orbits, connections = _first_passages(a.augment())
        if not finite:
            logger.info("Orbit census: some component is not a cycle, counts are infinite")
            return CensusReport(components=components, periods=periods, finite=False)
        _, _, _, lifted, _ = _first_passages(a.lift())
        report = CensusReport(
            components=components,
            periods=periods,
            finite=True,
            orbits=orbits,
            lifted_orbits=lifted,
            connections={f"{i}->{j}": c for (i, j), c in sorted(connections.items())},
        )
        logger.info(f"Orbit census: {len(components)} cycles, {orbits} orbits ({lifted} lifted)")
        return report

    # determinants

    def _require_abelian(self, a: BlockedMatrix) -> None:
        if not a.group.is_abelian():
            raise NonAbelian(f"{a.group.label} is not abelian")

    def det_tuple(self, a: BlockedMatrix) -> DetTuple:
        b = a.require_blocking()
        self._require_abelian(a)
        return DetTuple(entries=[ring_det(a.diagonal_block(i).one_minus()) for i in range(b.count)])

    def _block_subgroup(self, a: BlockedMatrix, i: int) -> GSubset:
        block = a.diagonal_block(i)
        support = {g for s, t in block.nonzero_positions() for g in block[s, t].support()}
        return subgroup_generated(GSubset(a.group, support))

    def _lattice(self, a: BlockedMatrix, i: int, subgroup: GSubset) -> Tuple[sympy.Matrix, int]:
        lift = sympy.Matrix(restricted_lift(a.diagonal_block(i).one_minus(), subgroup))
        det = lift.det()
        if det == 0:
            raise ZeroDivisorDet(f"det(I - A_{i}) is a zero divisor in Z{subgroup!r}")
        return lift, abs(int(det))

    def kappa_index(self, a: BlockedMatrix, i: int, structure: Optional[CosetStructure] = None) -> int:
        """Index of the row image of I - A_i in (Z H_i)^(n_i)."""
        a.require_blocking()
        self._require_abelian(a)
        subgroup = structure.diagonal(i) if structure is not None else self._block_subgroup(a, i)
        return self._lattice(a, i, subgroup)[1]

    def bounded_reduce(
        self, a: BlockedMatrix, structure: Optional[CosetStructure] = None
    ) -> Tuple[BlockedMatrix, Certificate]:
        """Left multiplications putting every off-diagonal coefficient of A into [0, kappa_j)."""
        try:
            b = a.require_blocking()
            self._require_abelian(a)
            h = structure if structure is not None else coset_service.coset_structure_of(a)
            if not entries_in(a, h.as_dict()):
                raise NotNormalForm("Entries leave the coset structure")
            poset = b.poset
            lattices: Dict[int, Tuple[sympy.Matrix, int]] = {}
            for j in range(b.count):
                if any(poset.less(i, j) for i in range(j)):
                    lattices[j] = self._lattice(a, j, h.diagonal(j))
            script = MoveScript(a, h)
            for j in sorted(lattices):
                lift, kappa = lattices[j]
                for i in range(j):
                    if poset.less(i, j):
                        for s in b.indices(i):
                            self._reduce_row(script, s, list(b.indices(j)), h.diagonal(j), h[i, j], lift, kappa)
            cert = script.seal()
            logger.info(f"Bounded reduction with {len(cert.moves)} moves, kappas {[k for _, k in lattices.values()]}")
            return script.current, cert
        except GSFTError:
            raise
        except Exception as e:
            logger.error(f"Failed to reduce matrix: {e}")
            raise

    def _reduce_row(
        self,
        script: MoveScript,
        s: int,
        block: Sequence[int],
        hj: GSubset,
        hij: GSubset,
        lift: sympy.Matrix,
        kappa: int,
    ) -> None:
        group = script.group
        members = hj.sorted()
        size = len(members)
        reps = sorted({hj.left(g).min() for g in hij})
        for rep in reps:
            current = script.current
            shifts = [current[s, t].coeff(group.mul(rep, y)) // kappa for t in block for y in members]
            if not any(shifts):
                continue
            # z M = kappa * shifts on the coset rep H_j of I - A; kappa M^-1 is integral
            z = lift.T.LUsolve(sympy.Matrix([q * kappa for q in shifts]))
            for pos, r in enumerate(block):
                coeffs = {}
                for k, y in enumerate(members):
                    value = z[pos * size + k]
                    if not value.is_integer:
                        raise InvariantError(f"Reduction coefficient {value} is not an integer")
                    coeffs[group.mul(rep, y)] = int(value)
                x = GroupRingElem(group, coeffs)
                if x:
                    script.plumb("left", s, r, x)

    # realizability

    def _realizability_problem(
        self, b: BlockedMatrix, cycles: Sequence[int], h: CosetStructure
    ) -> Optional[Tuple[str, str]]:
        blocking = b.require_blocking()
        group = b.group
        chosen = set(cycles)
        if h.poset != blocking.poset:
            return "shape", "coset structure and blocking use different posets"
        for i, size in enumerate(blocking.sizes):
            if (size == 1) != (i in chosen):
                return "shape", f"block {i} has size {size}; cycle blocks and only they have size 1"
        if not b.is_blocked_form() or not entries_in(b, h.as_dict()):
            return "shape", "entries leave the coset structure"
        for i in sorted(chosen):
            s = blocking.start(i)
            loop = b[s, s]
            if not loop.is_group_element():
                return "2a", f"cycle block {i} is {loop.format()}, not a group element"
            generated = subgroup_generated(GSubset(group, [loop.as_group_element()]))
            if generated != h.diagonal(i):
                return "2a", f"H_{i} = {h.diagonal(i)!r} is not generated by {loop.format()}"
        _, r_sets, _ = coset_service.R_sets(h, cycles)
        for (i, j), cells in sorted(r_sets.items()):
            if i not in chosen or j not in chosen:
                continue
            entry = b[blocking.start(i), blocking.start(j)]
            for cell in cells:
                total = sum(entry.coeff(g) for g in cell)
                if total <= 0:
                    return "2b", f"entry ({i},{j}) sums to {total} on {cell!r}"
        return None

    def realizable_check(self, b: BlockedMatrix, cycles: Sequence[int], h: CosetStructure) -> bool:
        problem = self._realizability_problem(b, cycles, h)
        if problem:
            logger.info(f"Not realizable ({problem[0]}): {problem[1]}")
        return problem is None

    def realize(
        self, b: BlockedMatrix, cycles: Sequence[int], h: CosetStructure
    ) -> Tuple[BlockedMatrix, Certificate]:
        """A in M++(C, m, H) with I - A blocked-equivalent to the 0-stabilization of I - B.

        Sizes are m_i = 1 on cycles and n_i + 1 elsewhere; the certificate starts at the
        0-stabilization of B.
        """
        try:
            problem = self._realizability_problem(b, cycles, h)
            if problem:
                raise NotRealizable(problem[1], clause=problem[0])
            blocking = b.require_blocking()
            chosen = set(cycles)
            sizes = [1 if i in chosen else size + 1 for i, size in enumerate(blocking.sizes)]
            script = MoveScript(stabilize0(b, sizes), h)
            count = blocking.count
            for i in range(count):
                if i not in chosen:
                    self._positive_diagonal(script, i, h.diagonal(i))
            poset = blocking.poset
            for i in reversed(range(count)):
                if i in chosen:
                    continue
                for j in sorted(chosen):
                    if poset.less(i, j):
                        self._lift_from_columns(script, i, j, h[i, j])
            for j in reversed(range(count)):
                if j in chosen:
                    continue
                for i in range(j):
                    if poset.less(i, j):
                        self._lift_from_rows(script, i, j, h[i, j])
            _, r_sets, _ = coset_service.R_sets(h, cycles)
            pairs = [(i, j) for i, j in poset.pairs() if i in chosen and j in chosen]
            for i, j in sorted(pairs, key=lambda p: (-p[0], p[1])):
                self._fix_cycle_pair(script, i, j, h, chosen, r_sets[(i, j)])
            out = script.current
            problems = coset_service.plusplus_problems(out - BlockedMatrix.identity(out.group, out.n), cycles, h)
            if problems:
                raise NotRealizable(f"Construction did not reach M++: {problems[0]}", clause="construction")
            cert = script.seal()
            logger.info(f"Realized sizes {list(blocking.sizes)} -> {sizes} with {len(cert.moves)} moves")
            return out, cert
        except GSFTError:
            raise
        except Exception as e:
            logger.error(f"Failed to realize matrix: {e}")
            raise

    def _positive_diagonal(self, script: MoveScript, i: int, hi: GSubset) -> None:
        """Make the diagonal block H_i-positive using its extra index k (zero row and column)."""
        group = script.group
        m = script.current
        block = list(m.require_blocking().indices(i))
        k = block[-1]
        old = block[:-1]
        delta = GroupRingElem.sum_of(hi)
        one = BlockedMatrix.identity(group, m.n)
        bound = 1 + max(sum(abs(c) for _, c in (m[s, t] - one[s, t]).items()) for s in old for t in old)
        for t in old:
            script.plumb("right", k, t, delta * -2)
        for s in old:
            script.plumb("left", s, k, delta * bound)
        script.plumb("right", old[0], k, delta)

    def _lift_from_columns(self, script: MoveScript, i: int, j: int, hij: GSubset) -> None:
        """Right multiplication by the H_i-positive block i makes block (i, j) positive on H_ij."""
        m = script.current
        blocking = m.require_blocking()
        t = blocking.start(j)
        low = min(m[r, t].coeff(g) for r in blocking.indices(i) for g in hij)
        if low >= 1:
            return
        script.plumb("right", blocking.start(i), t, GroupRingElem.sum_of(hij) * (1 - low))

    def _lift_from_rows(self, script: MoveScript, i: int, j: int, hij: GSubset) -> None:
        """Left multiplication by the H_j-positive block j makes block (i, j) positive on H_ij."""
        blocking = script.current.require_blocking()
        t0 = blocking.start(j)
        for s in blocking.indices(i):
            m = script.current
            low = min(m[s, c].coeff(g) for c in blocking.indices(j) for g in hij)
            if low < 1:
                script.plumb("left", s, t0, GroupRingElem.sum_of(hij) * (1 - low))

    def _fix_cycle_pair(
        self,
        script: MoveScript,
        i: int,
        j: int,
        h: CosetStructure,
        cycles: set,
        r_cells: Sequence[GSubset],
    ) -> None:
        """Both ends are cycles: concentrate each non-extendable cell, fill every other cell."""
        group = script.group
        blocking = script.current.require_blocking()
        s, t = blocking.start(i), blocking.start(j)
        gi = script.current[s, s].as_group_element()
        gj = script.current[t, t].as_group_element()
        for cell in coset_service.double_cosets_of(h, i, j):
            target = cell.min()
            if cell not in r_cells:
                self._boost(script, i, j, h, cycles, cell)
            entry = script.current[s, t]
            for z in cell:
                n = entry.coeff(z)
                if z == target or n == 0:
                    continue
                if n > 0:
                    self._push(script, s, t, gi, gj, cell, z, target, n)
                else:
                    self._push(script, s, t, gi, gj, cell, target, z, -n)
            if cell not in r_cells:
                for z in cell:
                    if z != target:
                        self._push(script, s, t, gi, gj, cell, target, z, 1)

    def _boost(self, script: MoveScript, i: int, j: int, h: CosetStructure, cycles: set, cell: GSubset) -> None:
        """Add at least |D| + 1 to the coefficient sum of an extendable cell through an intermediate block."""
        group = script.group
        m = script.current
        blocking = m.require_blocking()
        s, t = blocking.start(i), blocking.start(j)
        size = len(cell) + sum(abs(m[s, t].coeff(z)) for z in cell) + 1
        for k in h.poset.between(i, j):
            if not cell.intersection(h[i, k].product(h[k, j])):
                continue
            u = blocking.start(k)
            for w in h[i, k]:
                for v in m[u, t].support():
                    if group.mul(w, v) in cell:
                        value = GroupRingElem.of(group, w, size)
                        if k in cycles:
                            value = value * GroupRingElem.sum_of(h.diagonal(k))
                        script.plumb("left", s, u, value)
                        return
        raise NotRealizable(f"No intermediate block reaches {cell!r} in entry ({i},{j})", clause="construction")

    def _push(
        self, script: MoveScript, s: int, t: int, gi: int, gj: int, cell: GSubset, source: int, target: int, amount: int
    ) -> None:
        """Move `amount` of the coefficient at source to target inside one cell of entry (s, t)."""
        group = script.group
        for side, z in _cell_path(group, cell, source, target, gi, gj):
            script.plumb(side, s, t, GroupRingElem.of(group, z, amount))


def _cell_path(group: FiniteGroup, cell: GSubset, source: int, target: int, gi: int, gj: int) -> List[Tuple[str, int]]:
    """Steps z -> z gj (left moves) and z -> gi z (right moves) from source to target."""
    parent: Dict[int, Optional[Tuple[str, int]]] = {source: None}
    queue: deque = deque([source])
    while queue:
        z = queue.popleft()
        if z == target:
            break
        for side, nxt in (("left", group.mul(z, gj)), ("right", group.mul(gi, z))):
            if nxt in cell and nxt not in parent:
                parent[nxt] = (side, z)
                queue.append(nxt)
    if target not in parent:
        raise NotRealizable(f"{group.name(target)} is not reachable inside {cell!r}", clause="construction")
    steps: List[Tuple[str, int]] = []
    z = target
    while parent[z] is not None:
        side, prev = parent[z]
        steps.append((side, prev))
        z = prev
    return list(reversed(steps))


def _first_passages(
    adjacency: np.ndarray,
) -> Tuple[List[List[int]], List[int], bool, Optional[int], Dict[Tuple[int, int], int]]:
    """Cycle components of a nonnegative integer matrix and first-passage path counts between them."""
    adj = np.asarray(adjacency, dtype=np.int64)
    n = adj.shape[0]
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n))
    for s, t in zip(*np.nonzero(adj)):
        graph.add_edge(int(s), int(t), count=int(adj[s, t]))
    components = sorted(
        (sorted(c) for c in nx.strongly_connected_components(graph)
         if len(c) > 1 or graph.has_edge(next(iter(c)), next(iter(c)))),
        key=lambda c: c[0],
    )
    flags = [all(sum(int(adj[s, t]) for t in comp) == 1 for s in comp) for comp in components]
    periods = [len(comp) if flag else period(graph.subgraph(comp)) for comp, flag in zip(components, flags)]
    if not all(flags):
        return components, periods, False, None, {}
    cycle_of = {s: k for k, comp in enumerate(components) for s in comp}
    transient = [s for s in range(n) if s not in cycle_of]
    arrivals: Dict[int, Dict[int, int]] = {}
    for v in reversed(list(nx.topological_sort(graph.subgraph(transient)))):
        out: Dict[int, int] = {}
        for u in graph.successors(v):
            mult = graph[v][u]["count"]
            reached = {cycle_of[u]: 1} if u in cycle_of else arrivals[u]
            for k, c in reached.items():
                out[k] = out.get(k, 0) + mult * c
        arrivals[v] = out
    connections: Dict[Tuple[int, int], int] = {}
    for k, comp in enumerate(components):
        for s in comp:
            for u in graph.successors(s):
                if cycle_of.get(u) == k:
                    continue
                mult = graph[s][u]["count"]
                reached = {cycle_of[u]: 1} if u in cycle_of else arrivals[u]
                for target, c in reached.items():
                    connections[(k, target)] = connections.get((k, target), 0) + mult * c
    minimal = [
        k for k, comp in enumerate(components)
        if not any(cycle_of.get(x, k) != k for x in nx.ancestors(graph, comp[0]))
    ]
    orbits = sum(c for (k, _), c in connections.items() if k in minimal)
    return components, periods, True, orbits, connections


# Global invariant service instance
invariant_service = InvariantService()
