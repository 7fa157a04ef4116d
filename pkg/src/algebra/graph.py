"""
Graph views of matrices over Z+G: cores, strongly connected structure,
reachability between blocks, the regular lift and its primitivity.
"""
from collections import deque
from functools import reduce
from math import gcd
from typing import Dict, List, NamedTuple, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from src.algebra.group import GSubset
from src.algebra.matrix import BlockedMatrix
from src.exceptions import NegativeEntry, NotBlocked


def digraph(a: BlockedMatrix, within: Optional[Sequence[int]] = None) -> nx.DiGraph:
    """Directed graph of the nonzero pattern; edge attribute `count` is the augmentation."""
    nodes = list(range(a.n)) if within is None else list(within)
    allowed = set(nodes)
    graph = nx.DiGraph()
    graph.add_nodes_from(nodes)
    for s, t in a.nonzero_positions():
        if s in allowed and t in allowed:
            graph.add_edge(s, t, count=a[s, t].augment())
    return graph


def nondegenerate_core(a: BlockedMatrix) -> Tuple[BlockedMatrix, List[int]]:
    """Iteratively drop indices with a zero row or zero column."""
    keep = list(range(a.n))
    changed = True
    while changed:
        changed = False
        alive = set(keep)
        survivors = [
            s for s in keep
            if any(a[s, t] for t in alive) and any(a[r, s] for r in alive)
        ]
        if len(survivors) != len(keep):
            keep = survivors
            changed = True
    return a.principal(keep), keep


def recurrent_states(a: BlockedMatrix, within: Optional[Sequence[int]] = None) -> List[int]:
    """Indices s with a path of positive length from s to s."""
    graph = digraph(a, within)
    out: Set[int] = set()
    for comp in nx.strongly_connected_components(graph):
        if len(comp) > 1 or any(graph.has_edge(s, s) for s in comp):
            out |= comp
    return sorted(out)


def transition_states(a: BlockedMatrix, within: Optional[Sequence[int]] = None) -> List[int]:
    rec = set(recurrent_states(a, within))
    nodes = range(a.n) if within is None else within
    return sorted(s for s in nodes if s not in rec)


class SccStructure(NamedTuple):
    """Nontrivial strongly connected components in a deterministic topological order."""

    components: List[List[int]]
    order: Set[Tuple[int, int]]
    cycle_flags: List[bool]
    transitions: List[int]

    def component_of(self) -> Dict[int, int]:
        return {s: k for k, comp in enumerate(self.components) for s in comp}


def is_cycle_core(a: BlockedMatrix, comp: Sequence[int]) -> bool:
    """The augmentation restricted to the component is a cyclic permutation matrix."""
    members = set(comp)
    return all(sum(a[s, t].augment() for t in members) == 1 for s in comp)


def scc_structure(a: BlockedMatrix, within: Optional[Sequence[int]] = None) -> SccStructure:
    graph = digraph(a, within)
    rec = set(recurrent_states(a, within))
    comps = [sorted(c) for c in nx.strongly_connected_components(graph) if set(c) <= rec and c & rec]
    condensed = nx.condensation(graph)
    mapping = condensed.graph["mapping"]
    # components ordered topologically, ties broken by least index
    node_key = {k: min(condensed.nodes[k]["members"]) for k in condensed.nodes}
    topo = list(nx.lexicographical_topological_sort(condensed, key=lambda k: node_key[k]))
    rank = {k: r for r, k in enumerate(topo)}
    comps.sort(key=lambda c: rank[mapping[c[0]]])
    position = {mapping[c[0]]: k for k, c in enumerate(comps)}
    order: Set[Tuple[int, int]] = set()
    for k, c in enumerate(comps):
        for d in nx.descendants(condensed, mapping[c[0]]):
            if d in position:
                order.add((k, position[d]))
    flags = [is_cycle_core(a, c) for c in comps]
    nodes = range(a.n) if within is None else within
    transitions = sorted(s for s in nodes if s not in rec)
    return SccStructure(comps, order, flags, transitions)


def block_core(a: BlockedMatrix, i: int) -> List[int]:
    """Recurrent indices of the diagonal block i (its irreducible core when essentially irreducible)."""
    b = a.require_blocking()
    return recurrent_states(a, list(b.indices(i)))


def is_essentially_irreducible(a: BlockedMatrix, within: Sequence[int]) -> bool:
    return len(scc_structure(a, within).components) == 1


def is_irreducible(a: BlockedMatrix) -> bool:
    if a.n == 0:
        return False
    graph = digraph(a)
    return nx.is_strongly_connected(graph) and (a.n > 1 or graph.has_edge(0, 0))


def reaches(a: BlockedMatrix, sources: Sequence[int], targets: Sequence[int]) -> bool:
    """Some path of positive length from a source to a target."""
    graph = digraph(a)
    goal = set(targets)
    for s in sources:
        for t in graph.successors(s):
            if t in goal or goal & nx.descendants(graph, t):
                return True
    return False


def is_in_Mo(a: BlockedMatrix) -> bool:
    """Membership in M-zero: essentially irreducible diagonal blocks, core-to-core paths along the order."""
    if a.blocking is None:
        raise NotBlocked("is_in_Mo needs a blocked matrix")
    b = a.blocking
    if not a.is_nonneg() or not a.is_blocked_form():
        return False
    cores = []
    for i in range(b.count):
        if not is_essentially_irreducible(a, list(b.indices(i))):
            return False
        cores.append(block_core(a, i))
    return all(reaches(a, cores[i], cores[j]) for i, j in b.poset.pairs())


class LiftedGraph:
    """The skew-product graph on n|G| vertices (s, g) with edges (s, g) -> (t, gh)."""

    def __init__(self, a: BlockedMatrix):
        a.require_nonneg()
        group = a.group
        self.n = a.n
        self.order = group.order
        self.graph = nx.MultiDiGraph()
        self.graph.add_nodes_from((s, g) for s in range(a.n) for g in group.elements())
        for s, t in a.nonzero_positions():
            for h, c in a[s, t].items():
                for g in group.elements():
                    for _ in range(c):
                        self.graph.add_edge((s, g), (t, group.mul(g, h)), label=h)
        self.adjacency: np.ndarray = a.lift()

    def index(self, s: int, g: int) -> int:
        return s * self.order + g

    def edge_count(self) -> int:
        return self.graph.number_of_edges()


def lift_regular(a: BlockedMatrix) -> LiftedGraph:
    if not a.is_nonneg():
        raise NegativeEntry("lift_regular needs a matrix over Z+G")
    return LiftedGraph(a)


def is_primitive_integer(m: np.ndarray) -> bool:
    """Primitivity of a nonnegative integer matrix through the Wielandt exponent (k-1)^2 + 1."""
    k = m.shape[0]
    if k == 0:
        return False
    pattern = (m > 0).astype(np.int64)
    exponent = (k - 1) ** 2 + 1
    result = np.eye(k, dtype=np.int64)
    base = pattern
    e = exponent
    while e:
        if e & 1:
            result = np.minimum(result @ base, 1)
        base = np.minimum(base @ base, 1)
        e >>= 1
    return bool(np.all(result > 0))


def is_G_primitive(a: BlockedMatrix) -> bool:
    if not a.is_nonneg():
        raise NegativeEntry("is_G_primitive needs a matrix over Z+G")
    return is_primitive_integer(a.lift())


def path_weights(a: BlockedMatrix, u: int, v: int) -> GSubset:
    """Weights of all paths of positive length from u to v."""
    group = a.group
    seen: Set[Tuple[int, int]] = set()
    queue: deque = deque()
    for t in range(a.n):
        for h in a[u, t].support():
            if a[u, t].coeff(h) > 0 and (t, h) not in seen:
                seen.add((t, h))
                queue.append((t, h))
    while queue:
        s, w = queue.popleft()
        for t in range(a.n):
            entry = a[s, t]
            if not entry:
                continue
            for h, c in entry.items():
                if c > 0:
                    nxt = (t, group.mul(w, h))
                    if nxt not in seen:
                        seen.add(nxt)
                        queue.append(nxt)
    return GSubset(group, [w for (s, w) in seen if s == v])


def weighted_walk(
    a: BlockedMatrix, u: int, v: int, weight: int, avoid: Sequence[int] = ()
) -> Optional[List[Tuple[int, int]]]:
    """Shortest walk u -> v of the given weight, as (vertex, prefix weight) states; interior avoids `avoid`."""
    group = a.group
    blocked = set(avoid)
    parent: Dict[Tuple[int, int], Optional[Tuple[int, int]]] = {}
    queue: deque = deque()
    for t in range(a.n):
        for h in a[u, t].support():
            state = (t, h)
            if state not in parent:
                parent[state] = None
                queue.append(state)
    goal = (v, weight)
    while queue:
        state = queue.popleft()
        if state == goal:
            walk = [state]
            while parent[walk[-1]] is not None:
                walk.append(parent[walk[-1]])
            return list(reversed(walk))
        s, w = state
        if s in blocked:
            continue
        for t in range(a.n):
            for h in a[s, t].support():
                nxt = (t, group.mul(w, h))
                if nxt not in parent:
                    parent[nxt] = state
                    queue.append(nxt)
    return None


def period(graph: nx.DiGraph) -> int:
    """Period of a strongly connected digraph (gcd of cycle lengths)."""
    if graph.number_of_nodes() == 0 or graph.number_of_edges() == 0:
        return 0
    root = next(iter(graph.nodes))
    level = nx.single_source_shortest_path_length(graph, root)
    diffs = [level[u] + 1 - level[v] for u, v in graph.edges() if u in level and v in level]
    return reduce(gcd, (abs(d) for d in diffs), 0)
