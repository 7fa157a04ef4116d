"""
Pipeline service: the normal form, positivization into M++, higher block
presentations, cross sections, and the constructive factorizations.
"""
from collections import Counter, deque
from typing import Dict, List, Optional, Sequence, Tuple, Union

from loguru import logger

from src.algebra.coset import CosetStructure
from src.algebra.graph import (
    block_core,
    is_in_Mo,
    nondegenerate_core,
    path_weights,
    recurrent_states,
    scc_structure,
)
from src.algebra.group import FiniteGroup, GSubset
from src.algebra.matrix import Blocking, BlockedMatrix, Poset, entries_in, stabilization_map, stabilize0, stabilize1
from src.algebra.ring import GroupRingElem
from src.config.settings import search_settings
from src.exceptions import (
    ConditionsFail,
    DegenerateInput,
    EmptyCore,
    EquationFails,
    HypothesisViolated,
    MoveError,
    NotInMo,
    NotPlusPlus,
    NotUnipotent,
    PipelineError,
    PositivizationStalled,
)
from src.models.certificate import Certificate, ConjugacyStep, Move
from src.models.reports import NormalFormResult, ScriptItem, Unresolved
from src.services.coset_service import coset_service
from src.services.move_service import MoveScript, isolated_indices, move_service


class _Planter:
    """Adds copies of group elements to entries of one row without removing anything else.

    An expansion at (s, r) runs the row cuts with w, w h, ..., w h^(k-1) where h is a
    summand of the loop at r of order k; row s gains w(1 + h + ... + h^(k-1)) A(r, .)
    and keeps its copy of w.
    """

    def __init__(self, script: MoveScript, budget: int):
        self.script = script
        self.budget = budget
        self.spent = 0

    @property
    def current(self) -> BlockedMatrix:
        return self.script.current

    def spend(self) -> None:
        self.spent += 1
        if self.spent > self.budget:
            raise PositivizationStalled(f"Plant budget of {self.budget} exhausted")

    def pivot(self, r: int) -> int:
        loop = self.current[r, r]
        return 0 if loop.coeff(0) > 0 else loop.support()[0]

    def expand(self, s: int, r: int, w: int) -> None:
        group = self.script.group
        h = self.pivot(r)
        x = w
        for _ in range(group.element_order(h)):
            self.script.row_cut(s, r, x)
            x = group.mul(x, h)

    def _row_search(self, s: int, t: int, x: int) -> Optional[List[Tuple[int, int]]]:
        """Expansions (r, w) that, run in order from row s, produce a new copy of x at (s, t)."""
        m = self.current
        group = m.group
        parent: Dict[Tuple[int, int], Optional[Tuple[int, int]]] = {}
        queue: deque = deque()
        for r in range(m.n):
            if r != s:
                for w in m[s, r].support():
                    parent[(r, w)] = None
                    queue.append((r, w))
        while queue:
            state = queue.popleft()
            r, w = state
            loop = m[r, r]
            if not loop:
                continue
            h = self.pivot(r)
            powers = [group.power(h, k) for k in range(group.element_order(h))]
            rest = loop - GroupRingElem.of(group, h)
            for q in range(m.n):
                entry = rest if q == r else m[r, q]
                for a in entry.support():
                    for p in powers:
                        nxt = (q, group.mul(group.mul(w, p), a))
                        if nxt == (t, x):
                            path = [state]
                            while parent[path[-1]] is not None:
                                path.append(parent[path[-1]])
                            return list(reversed(path))
                        if q != s and nxt not in parent:
                            parent[nxt] = state
                            queue.append(nxt)
        return None

    def plant(self, s: int, t: int, x: int, depth: int = 3) -> bool:
        path = self._row_search(s, t, x)
        if path is not None:
            for r, w in path:
                self.expand(s, r, w)
            return True
        if depth == 0:
            return False
        m = self.current
        group = m.group
        for r in range(m.n):
            if r in (s, t) or not m[r, r]:
                continue
            for w in m[s, r].support():
                y = group.mul(group.inv(w), x)
                if y not in path_weights(m, r, t):
                    continue
                if m[r, t].coeff(y) == 0 and not self.plant(r, t, y, depth - 1):
                    continue
                self.expand(s, r, w)
                return True
        return False


class PipelineService:
    """Service class for the composite constructions built from positive moves."""

    # normal form

    def normal_form(self, a: BlockedMatrix) -> NormalFormResult:
        """Nondegenerate C1 matrix in M-zero form, G-flow equivalent to A, with its script."""
        try:
            a.require_nonneg()
            items: List[ScriptItem] = []
            plain = a.with_blocking(None)
            core, keep = nondegenerate_core(plain)
            if core.n == 0:
                logger.warning("Matrix has an empty nondegenerate core; the normal form is empty")
                empty = BlockedMatrix.zeros(a.group, 0, Blocking(Poset(0), []))
                return NormalFormResult(matrix=empty, poset=Poset(0))
            if len(keep) != a.n:
                items.append(ConjugacyStep(kind="restrict", data={"keep": keep}, before=plain, after=core))
            current = self._split_transitions(core, items)
            current = self._order_components(current, items)
            cycles = coset_service.cycle_components(current)
            current = self._isolate_and_trim(current, cycles, items)
            current = self._widen_singletons(current, cycles, items)
            current, choices = self._normalize_weights(current, items)
            structure = coset_service.coset_structure_of(current, choices)
            result = NormalFormResult(
                matrix=current,
                poset=current.blocking.poset,
                cycles=cycles,
                structure=structure,
                vertex_choices=choices,
                script=items,
            )
            logger.info(
                f"Normal form: size {a.n} -> {current.n}, blocks {list(current.blocking.sizes)}, "
                f"cycles {cycles}, {result.positive_move_count()} positive moves"
            )
            return result
        except Exception as e:
            logger.error(f"Failed to compute normal form: {e}")
            raise

    def _split_transitions(self, current: BlockedMatrix, items: List[ScriptItem]) -> BlockedMatrix:
        """Out-split transition states until each has a single out-edge."""
        group = current.group
        while True:
            rec = set(recurrent_states(current))
            busy = {
                s for s in range(current.n)
                if s not in rec and sum(x.augment() for x in current.row(s)) > 1
            }
            if not busy:
                return current
            # a busy state none of whose successors is busy
            s = min(u for u in busy if not any(current[u, t] for t in busy))
            cells = [
                {t: GroupRingElem.of(group, g)}
                for t in range(current.n) for g in current[s, t].summands()
            ]
            current, step = move_service.out_split(current, s, cells)
            items.append(step)

    def _order_components(self, current: BlockedMatrix, items: List[ScriptItem]) -> BlockedMatrix:
        """Relabel so that components appear in topological order; returns a blocked matrix."""
        n = current.n
        scc = scc_structure(current)
        comp_of = scc.component_of()
        assign = dict(comp_of)
        for s in scc.transitions:
            t = s
            while t not in comp_of:
                t = next(u for u in range(n) if current[t, u])
            assign[s] = comp_of[t]
        count = len(scc.components)
        order = [s for k in range(count) for s in range(n) if assign[s] == k]
        blocking = Blocking(Poset(count, scc.order), [sum(1 for s in range(n) if assign[s] == k) for k in range(count)])
        if order != list(range(n)):
            big, target, cert = move_service.perm_sim_script(current, order)
            if big.n != n:
                items.append(ConjugacyStep(kind="stabilize", data={"sizes": [big.n]}, before=current, after=big))
            items.append(cert)
            current = target
            if big.n != n:
                current, step = move_service.trim_isolated(target, list(range(n)))
                items.append(step)
        blocked = current.with_blocking(blocking)
        if not is_in_Mo(blocked):
            raise NotInMo("Component ordering did not produce an M-zero matrix")
        return blocked

    def _isolate_cycles(self, script: MoveScript, cycles: Sequence[int]) -> None:
        """Eliminate every index of a cycle block except its least cycle vertex."""
        for i in cycles:
            m = script.current
            block = list(m.blocking.indices(i))
            if len(block) == 1:
                continue
            core = recurrent_states(m, block)
            head = min(core)
            walk = [head]
            while True:
                nxt = next(t for t in core if m[walk[-1], t])
                if nxt == head:
                    break
                walk.append(nxt)
            for u in block:
                if u not in core and not script.is_isolated(u):
                    script.eliminate(u)
            for u in walk[1:]:
                script.eliminate(u)

    def _isolate_and_trim(self, current: BlockedMatrix, cycles: Sequence[int], items: List[ScriptItem]) -> BlockedMatrix:
        script = MoveScript(current)
        self._isolate_cycles(script, cycles)
        if script.moves:
            items.append(script.seal())
        current = script.current
        if isolated_indices(current):
            current, step = move_service.trim_isolated(current)
            items.append(step)
        return current

    def _widen_singletons(self, current: BlockedMatrix, cycles: Sequence[int], items: List[ScriptItem]) -> BlockedMatrix:
        """Out-split the loop of every single-index noncycle block into two states."""
        chosen = set(cycles)
        group = current.group
        while True:
            b = current.blocking
            lonely = [i for i in range(b.count) if i not in chosen and b.sizes[i] == 1]
            if not lonely:
                return current
            s = b.start(lonely[0])
            loop = current[s, s]
            h = loop.support()[0]
            first = {s: GroupRingElem.of(group, h)}
            second = {t: current[s, t] for t in range(current.n) if current[s, t]}
            second[s] = loop - GroupRingElem.of(group, h)
            current, step = move_service.out_split(current, s, [first, second])
            items.append(step)

    def _normalize_weights(
        self, current: BlockedMatrix, items: List[ScriptItem]
    ) -> Tuple[BlockedMatrix, List[int]]:
        """Diagonal conjugation B = D A D^-1 with d_s a path weight from v(i) to s."""
        b = current.blocking
        group = current.group
        choices = coset_service.default_vertex_choices(current)
        d = [group.identity] * current.n
        for i in range(b.count):
            v = choices[i]
            core = set(block_core(current, i))
            for s in b.indices(i):
                if s == v:
                    continue
                if s in core:
                    d[s] = path_weights(current, v, s).min()
                else:
                    d[s] = group.inv(path_weights(current, s, v).min())
        entries = [group.inv(x) for x in d]
        if all(g == group.identity for g in entries):
            return current, choices
        big, target, cert = move_service.diag_conj_script(current, entries)
        if big.n != current.n:
            items.append(ConjugacyStep(kind="stabilize", data={"sizes": list(big.blocking.sizes)},
                                       before=current, after=big))
        items.append(cert)
        if big.n != current.n:
            target, step = move_service.trim_isolated(target, stabilization_map(current, big.blocking.sizes))
            items.append(step)
        return target, choices

    # positivization

    def structure_for(self, a: BlockedMatrix) -> CosetStructure:
        """A coset structure of A in whose sets every entry is supported."""
        h = coset_service.coset_structure_of(a)
        if entries_in(a, h.as_dict()):
            return h
        for _, candidate in coset_service.all_vertex_choices(a):
            if entries_in(a, candidate.as_dict()):
                return candidate
        raise NotInMo("Entries are not supported in any coset structure of the matrix; normalize it first")

    def positivize(
        self,
        a: BlockedMatrix,
        cycles: Optional[Sequence[int]] = None,
        structure: Optional[CosetStructure] = None,
        force: bool = False,
    ) -> Tuple[BlockedMatrix, Certificate]:
        """A' with A' - I in M++ (C1 and C2 by construction) and a blocked certificate.

        The certificate runs from the C2 padding of A to A' plus the isolated indices
        left over from the cycle blocks (both are 0-stabilizations of its ends).
        """
        try:
            b = a.require_blocking()
            a.require_nonneg()
            if a.n == 0:
                raise EmptyCore("Cannot positivize an empty matrix")
            if not is_in_Mo(a):
                raise NotInMo("Matrix is not in M-zero for its blocking")
            cycles = sorted(coset_service.cycle_components(a) if cycles is None else cycles)
            h = structure if structure is not None else self.structure_for(a)
            identity = BlockedMatrix.identity(a.group, a.n, b)
            if not force and coset_service.check_C1(a, cycles) and coset_service.is_plusplus(a - identity, cycles, h):
                logger.info("Matrix already satisfies C1 and lies in M++; positivization is empty")
                return a, Certificate.empty(a, blocked=True, structure=h)
            script = MoveScript(coset_service.ensure_C2(a, cycles), h)
            self._isolate_cycles(script, cycles)
            exponent = search_settings.positivize_budget_exponent
            for i in range(b.count):
                if i in cycles:
                    continue
                hi = h.diagonal(i)
                size = script.current.blocking.sizes[i]
                planter = _Planter(script, (size * len(hi)) ** exponent)
                self._loop_every_vertex(planter, i, hi)
                self._positive_block(planter, i, hi)
            planter = _Planter(script, (script.n * a.group.order) ** exponent)
            for i, j, cell, in_rc in coset_service.iter_targets(h, cycles):
                self._positive_pair(planter, i, j, cell, in_rc, cycles)
            cert = script.seal()
            end = script.current
            keep = [s for s in range(end.n) if s not in set(isolated_indices(end))]
            result = end.principal(keep)
            problems = coset_service.plusplus_problems(
                result - BlockedMatrix.identity(a.group, result.n, result.blocking), cycles, h
            )
            if problems:
                raise PositivizationStalled(f"Positivized matrix is not in M++: {problems[0]}")
            logger.info(f"Positivized a {a.n}x{a.n} matrix to {result.n}x{result.n} with {len(cert.moves)} moves")
            return result, cert
        except Exception as e:
            logger.error(f"Failed to positivize: {e}")
            raise

    def _loop_every_vertex(self, planter: _Planter, i: int, hi: GSubset) -> None:
        """Eliminate loopless indices of block i, then absorb every isolated index of the block."""
        script = planter.script
        group = script.group
        block = list(script.current.blocking.indices(i))
        while True:
            m = script.current
            active = [u for u in block if not script.is_isolated(u)]
            loopless = [u for u in active if not m[u, u]]
            if not loopless or len(active) < 2:
                break
            script.eliminate(loopless[0])
        zero = GroupRingElem.zero(group)
        for z in [u for u in block if script.is_isolated(u)]:
            active = [u for u in block if not script.is_isolated(u)]
            r = active[0]
            if script.current[r, r].augment() < 2:
                planter.spend()
                if not any(planter.plant(r, r, x) for x in hi.sorted()):
                    raise PositivizationStalled(f"Cannot enlarge the loop at index {r}")
            h = script.current[r, r].support()[0]
            row2 = [zero] * script.n
            row2[r] = GroupRingElem.of(group, h)
            move_service._split_into(script, r, z, row2)

    def _positive_block(self, planter: _Planter, i: int, hi: GSubset) -> None:
        """Every entry of the diagonal block of A - I positive on H_i."""
        script = planter.script
        e = script.group.identity
        block = list(script.current.blocking.indices(i))
        for s in block:
            for t in block:
                for x in hi.sorted():
                    need = 2 if s == t and x == e else 1
                    while script.current[s, t].coeff(x) < need:
                        planter.spend()
                        if not planter.plant(s, t, x):
                            raise PositivizationStalled(f"Cannot reach {script.group.name(x)} at ({s},{t})")

    def _positive_pair(self, planter: _Planter, i: int, j: int, cell: GSubset, in_rc: bool, cycles: Sequence[int]) -> None:
        script = planter.script
        blocking = script.current.blocking
        sources = [s for s in blocking.indices(i) if not script.is_isolated(s)]
        targets = [t for t in blocking.indices(j) if not script.is_isolated(t)]
        for s in sources:
            for t in targets:
                if in_rc:
                    if script.current[s, t].project(cell):
                        continue
                    planter.spend()
                    if not any(self._plant_between(planter, s, t, x, i in cycles, j in cycles) for x in cell.sorted()):
                        raise PositivizationStalled(f"Entry ({s},{t}) vanishes on {cell!r}")
                    continue
                for x in cell.sorted():
                    if script.current[s, t].coeff(x) == 0:
                        planter.spend()
                        if not self._plant_between(planter, s, t, x, i in cycles, j in cycles):
                            raise PositivizationStalled(f"Cannot reach {script.group.name(x)} at ({s},{t})")

    def _plant_between(self, planter: _Planter, s: int, t: int, x: int, s_cycle: bool, t_cycle: bool) -> bool:
        """Plant g^-p x h^-q, then rotate it into x with q row cuts and p column cuts at (s, t)."""
        script = planter.script
        group = script.group
        m = script.current
        g = m[s, s].as_group_element() if s_cycle else group.identity
        h = m[t, t].as_group_element() if t_cycle else group.identity
        for p in range(group.element_order(g) if s_cycle else 1):
            for q in range(group.element_order(h) if t_cycle else 1):
                z = group.mul(group.inv(group.power(g, p)), group.mul(x, group.inv(group.power(h, q))))
                if not planter.plant(s, t, z):
                    continue
                y = z
                for _ in range(q):
                    script.row_cut(s, t, y)
                    y = group.mul(y, h)
                for _ in range(p):
                    script.col_cut(s, t, y)
                    y = group.mul(g, y)
                return True
        return False

    # higher block presentations and cross sections

    def higher_block(self, a: BlockedMatrix, k: int) -> Tuple[BlockedMatrix, Certificate]:
        """k rounds of complete out-splitting; every entry of the result is 0 or one group element."""
        try:
            a.require_nonneg()
            if k < 0:
                raise PipelineError(f"Block depth must be nonnegative, got {k}")
            for s in range(a.n):
                if not any(a.row(s)) or not any(a.column(s)):
                    raise DegenerateInput(f"Index {s} has a zero row or column")
            if k == 0:
                return a, Certificate.empty(a, blocked=a.blocking is not None)
            final = a
            for _ in range(k):
                final = _edge_matrix(final)
            sizes = list(final.blocking.sizes) if a.blocking is not None else final.n
            script = MoveScript(stabilize0(a, sizes))
            where = set(stabilization_map(a, sizes))
            pads: Dict[int, List[int]] = {}
            for z in range(script.n):
                if z not in where:
                    key = script.start.blocking.comp(z) if a.blocking is not None else 0
                    pads.setdefault(key, []).append(z)
            for _ in range(k):
                self._split_round(script, pads)
            if any(pads.values()):
                raise PipelineError("Higher block construction left unused indices")
            cert = script.seal()
            logger.info(f"Higher block presentation: {a.n} -> {script.n} states after {k} rounds")
            return script.current, cert
        except Exception as e:
            logger.error(f"Failed to build higher block presentation: {e}")
            raise

    def _split_round(self, script: MoveScript, pads: Dict[int, List[int]]) -> None:
        m = script.current
        group = m.group
        zero = GroupRingElem.zero(group)
        active = [s for s in range(m.n) if not script.is_isolated(s)]
        edges = {s: [(t, g) for t in active for g in m[s, t].summands()] for s in active}
        copies = {s: [s] for s in active}
        for s in active:
            key = m.blocking.comp(s) if m.blocking is not None else 0
            for t, g in edges[s][1:]:
                z = pads[key].pop(0)
                row2 = [zero] * script.n
                for c in copies[t]:
                    row2[c] = GroupRingElem.of(group, g)
                move_service._split_into(script, s, z, row2)
                copies[s].append(z)

    def restrict_to_states(self, a: BlockedMatrix, keep: Sequence[int]) -> Tuple[BlockedMatrix, Certificate]:
        """Eliminate the complement of `keep` in ascending order and return the kept principal part."""
        try:
            a.require_nonneg()
            kept = sorted(set(int(s) for s in keep))
            if any(not 0 <= s < a.n for s in kept):
                raise PipelineError(f"Kept indices {kept} fall outside 0..{a.n - 1}")
            script = MoveScript(a)
            for u in range(a.n):
                if u not in kept:
                    script.eliminate(u)
            cert = script.seal()
            logger.info(f"Restricted {a.n} states to {len(kept)} with {len(cert.moves)} moves")
            return script.current.principal(kept), cert
        except Exception as e:
            logger.error(f"Failed to restrict to states {list(keep)}: {e}")
            raise

    # factorizations

    def factor_2x2(
        self,
        a: BlockedMatrix,
        s: int,
        t: int,
        left: GroupRingElem,
        right: GroupRingElem,
        structure: Optional[CosetStructure] = None,
    ) -> Certificate:
        """Extendable positive script with E_st(left) (I - A) E_st(right) = I - B."""
        try:
            if s == t:
                raise HypothesisViolated("The two-by-two case needs distinct indices")
            if not left.is_nonneg() or not right.is_nonneg():
                raise HypothesisViolated("Both factors must have entries in Z+G")
            if a.blocking is not None and not a.blocking.allows(s, t):
                raise HypothesisViolated(f"Position ({s},{t}) lies outside the blocks")
            script = MoveScript(a, structure)
            self._factor_position(script, s, t, left, right)
            cert = script.seal()
            logger.debug(f"Two-by-two factorization at ({s},{t}): {len(cert.moves)} moves")
            return cert
        except Exception as e:
            logger.error(f"Failed to factor at ({s},{t}): {e}")
            raise

    def _factor_position(
        self, script: MoveScript, s: int, t: int, left: GroupRingElem, right: GroupRingElem
    ) -> None:
        """Apply the left moves E_st(w), w in `left`, and right moves E_st(w), w in `right`."""
        try:
            group = script.group
            m = script.current
            a_loop, d_loop = m[s, s], m[t, t]
            target = m[s, t] + left * (d_loop - 1) + (a_loop - 1) * right
            start = script.mark()
            pending_left = Counter(dict(left.items()))
            pending_right = Counter(dict(right.items()))
            while +pending_left or +pending_right:
                progressed = False
                for w in sorted(+pending_left):
                    while pending_left[w] > 0 and self._apply_single(script, s, t, w, "left", d_loop):
                        pending_left[w] -= 1
                        progressed = True
                for w in sorted(+pending_right):
                    while pending_right[w] > 0 and self._apply_single(script, s, t, w, "right", a_loop):
                        pending_right[w] -= 1
                        progressed = True
                if not progressed:
                    self._detour(script, s, t, pending_left, pending_right, a_loop, d_loop)
            if script.current[s, t] != target:
                raise HypothesisViolated(f"Entry ({s},{t}) ended at {script.current[s, t]}, expected {target}")
            self._check_extendable(script.moves[start:], left, right, group)
        except MoveError as e:
            raise HypothesisViolated(str(e)) from e

    def _apply_single(self, script: MoveScript, s: int, t: int, w: int, side: str, loop: GroupRingElem) -> bool:
        cut = script.row_cut if side == "left" else script.col_cut
        if script.current[s, t].coeff(w) > 0:
            cut(s, t, w)
            return True
        if loop.coeff(script.group.identity) < 1:
            return False
        mark = script.mark()
        try:
            self._plant_direct(script, s, t, w)
        except HypothesisViolated:
            return False
        prep = list(script.moves[mark:])
        cut(s, t, w)
        script.extend([mv.inverse() for mv in reversed(prep)])
        return True

    def _side_options(self, loop: GroupRingElem, group: FiniteGroup) -> List[Tuple[int, str, int]]:
        """(element, mode, steps) reachable on one side of an entry with moves at that entry."""
        e = group.identity
        options = [(e, "none", 0)]
        if loop.is_group_element() and loop.as_group_element() != e:
            g = loop.as_group_element()
            options.extend((group.power(g, p), "rotate", p) for p in range(1, group.element_order(g)))
        elif loop.coeff(e) >= 1:
            options.extend((k, "once", 1) for k in (loop - 1).support())
        return options

    def _plant_direct(self, script: MoveScript, s: int, t: int, w0: int) -> None:
        """Create a copy of w0 at (s, t) as prefix * x * suffix using only moves at (s, t)."""
        group = script.group
        m = script.current
        prefixes = self._side_options(m[s, s], group)
        suffixes = self._side_options(m[t, t], group)
        candidates = []
        for x in m[s, t].support():
            for b, smode, sq in suffixes:
                for pre, pmode, pp in prefixes:
                    if group.mul(pre, group.mul(x, b)) == w0:
                        candidates.append((sq + pp, x, b, smode, sq, pre, pmode, pp))
        if not candidates:
            raise HypothesisViolated(f"No copy of {group.name(w0)} can be created at ({s},{t})")
        _, x, b, smode, sq, pre, pmode, pp = min(candidates)
        y = x
        if smode == "rotate":
            h = m[t, t].as_group_element()
            for _ in range(sq):
                script.row_cut(s, t, y)
                y = group.mul(y, h)
        elif smode == "once":
            script.row_cut(s, t, y)
            y = group.mul(y, b)
        if pmode == "rotate":
            g = m[s, s].as_group_element()
            for _ in range(pp):
                script.col_cut(s, t, y)
                y = group.mul(g, y)
        elif pmode == "once":
            script.col_cut(s, t, y)

    def _detour(
        self,
        script: MoveScript,
        s: int,
        t: int,
        pending_left: Counter,
        pending_right: Counter,
        a_loop: GroupRingElem,
        d_loop: GroupRingElem,
    ) -> None:
        """Plant w0, walk w -> w h (left) or w -> g w (right) through pending moves back to w0, unplant."""
        group = script.group
        budget = sum((+pending_left).values()) + sum((+pending_right).values())
        for w0 in sorted(set(+pending_left) | set(+pending_right)):
            mark = script.mark()
            try:
                self._plant_direct(script, s, t, w0)
            except HypothesisViolated:
                continue
            prep = list(script.moves[mark:])
            used_left: Counter = Counter()
            used_right: Counter = Counter()
            w = w0
            for _ in range(budget):
                if pending_left[w] - used_left[w] > 0 and d_loop.is_group_element():
                    script.row_cut(s, t, w)
                    used_left[w] += 1
                    w = group.mul(w, d_loop.as_group_element())
                elif pending_right[w] - used_right[w] > 0 and a_loop.is_group_element():
                    script.col_cut(s, t, w)
                    used_right[w] += 1
                    w = group.mul(a_loop.as_group_element(), w)
                else:
                    break
                if w == w0:
                    break
            if w != w0 or not (used_left or used_right):
                script.rollback(mark)
                continue
            script.extend([mv.inverse() for mv in reversed(prep)])
            pending_left.subtract(used_left)
            pending_right.subtract(used_right)
            return
        raise HypothesisViolated(f"Moves at ({s},{t}) are stuck: no closed walk through the pending elements")

    def _check_extendable(self, moves: Sequence[Move], left: GroupRingElem, right: GroupRingElem, group: FiniteGroup) -> None:
        """Every prefix of the left moves and of the right moves sums to an element of Z+G."""
        totals = {"left": GroupRingElem.zero(group), "right": GroupRingElem.zero(group)}
        for k, mv in enumerate(moves):
            totals[mv.side] = totals[mv.side] + mv.signed_value()
            if not totals[mv.side].is_nonneg():
                raise HypothesisViolated(f"Prefix {k} of the {mv.side} moves leaves Z+G")
        if totals["left"] != left or totals["right"] != right:
            raise HypothesisViolated("Applied moves do not add up to the requested factors")

    def factor_unipotent(
        self,
        u: BlockedMatrix,
        v: BlockedMatrix,
        b: BlockedMatrix,
        b_prime: BlockedMatrix,
        cycles: Sequence[int],
        structure: CosetStructure,
    ) -> Certificate:
        """Positive blocked certificate from B to B' (both A - I) for unipotent U, V with U B V = B'."""
        try:
            blocking = b.require_blocking()
            group = b.group
            n = b.n
            u, v = u.with_blocking(blocking), v.with_blocking(blocking)
            for name, x in (("U", u), ("V", v)):
                problem = _unipotent_problem(x, blocking, structure)
                if problem:
                    raise NotUnipotent(f"{name}: {problem}")
            for name, x in (("B", b), ("B'", b_prime)):
                problems = coset_service.plusplus_problems(x.with_blocking(blocking), cycles, structure)
                if problems:
                    raise NotPlusPlus(f"{name}: {problems[0]}")
            if u @ b @ v != b_prime:
                raise EquationFails("U B V differs from B'")
            identity = BlockedMatrix.identity(group, n, blocking)
            left_script = MoveScript((b + identity).with_blocking(blocking), structure)
            right_script = MoveScript((b_prime + identity).with_blocking(blocking), structure)
            pair_delta, single_delta = coset_service.deltas(structure, cycles)
            ranks = coset_service.rho(blocking.poset)
            for i, j in sorted(blocking.poset.pairs(), key=lambda p: (ranks[p], p)):
                delta = single_delta[i] * pair_delta[(i, j)] * single_delta[j]
                positions = [(p, q) for p in blocking.indices(i) for q in blocking.indices(j)]
                pad = _padding_constant(delta, [u[p, q] for p, q in positions] + [v[p, q] for p, q in positions])
                if pad == 0 and all(not u[p, q] and not v[p, q] for p, q in positions):
                    continue
                w_block = {pq: u[pq] + delta * pad for pq in positions}
                x_block = {pq: v[pq] + delta * pad for pq in positions}
                for p, q in positions:
                    self._factor_position(left_script, p, q, w_block[(p, q)], x_block[(p, q)])
                for p, q in positions:
                    self._factor_position(right_script, p, q, delta * pad, delta * pad)
                p_mat = _block_unipotent(identity, {pq: delta * pad for pq in positions})
                w_inv = _block_unipotent(identity, {pq: -x for pq, x in w_block.items()})
                x_inv = _block_unipotent(identity, {pq: -x for pq, x in x_block.items()})
                u = p_mat @ u @ w_inv
                v = x_inv @ v @ p_mat
                logger.debug(f"Pair ({i},{j}): padding {pad}, {left_script.mark()} + {right_script.mark()} moves")
            if not (u.is_identity() and v.is_identity()):
                raise NotUnipotent("The ordered sweep did not reduce U and V to the identity")
            if left_script.current != right_script.current:
                raise EquationFails("The two move scripts do not meet")
            cert = left_script.seal().then(right_script.seal().reversed())
            logger.info(f"Unipotent factorization: {len(cert.moves)} positive moves")
            return cert
        except Exception as e:
            logger.error(f"Failed to factor unipotent pair: {e}")
            raise

    def factor_general(
        self,
        u: BlockedMatrix,
        v: BlockedMatrix,
        a: BlockedMatrix,
        a_prime: BlockedMatrix,
        cycles: Optional[Sequence[int]] = None,
        structure: Optional[CosetStructure] = None,
        depth: Optional[int] = None,
        entry_cap: Optional[int] = None,
        seconds: Optional[float] = None,
    ) -> Union[Certificate, Unresolved]:
        """Positive certificate between (stabilizations of) A and A' given U (I - A) V = I - A'."""
        try:
            blocking = a.require_blocking()
            a_prime = a_prime.with_blocking(blocking) if a_prime.blocking is None else a_prime
            cycles = sorted(coset_service.cycle_components(a) if cycles is None else cycles)
            for name, x in (("A", a), ("A'", a_prime)):
                if not coset_service.check_C1(x, cycles):
                    raise ConditionsFail(f"{name} violates C1")
                if coset_service.check_C2(x, cycles) is None:
                    logger.warning(f"C2 for {name} is assumed, not verified")
            if u @ a.one_minus() @ v != a_prime.one_minus():
                raise EquationFails("U (I - A) V differs from I - A'")
            h = structure if structure is not None else self.structure_for(a)
            u, v = u.with_blocking(blocking), v.with_blocking(blocking)
            m0 = a - BlockedMatrix.identity(a.group, a.n, blocking)
            m1 = a_prime - BlockedMatrix.identity(a.group, a.n, blocking)
            unipotent = not _unipotent_problem(u, blocking, h) and not _unipotent_problem(v, blocking, h)
            plus = coset_service.is_plusplus(m0, cycles, h) and coset_service.is_plusplus(m1, cycles, h)
            if unipotent and plus:
                return self.factor_unipotent(u, v, m0, m1, cycles, h)
            try:
                p0, c0 = self.positivize(a, cycles, h, force=not plus)
                p1, c1 = self.positivize(a_prime, cycles, h, force=not plus)
            except PositivizationStalled as e:
                return Unresolved(reason=f"positivization stalled: {e}")
            middle = self._lifted_unipotent(u, v, c0, c1, cycles, h)
            explored = 0
            if middle is None:
                middle, explored = move_service.bounded_path(
                    c0.end, c1.end,
                    depth if depth is not None else search_settings.factor_depth,
                    entry_cap if entry_cap is not None else search_settings.entry_cap,
                    seconds if seconds is not None else search_settings.seconds,
                    h,
                )
            if middle is None:
                return Unresolved(reason="positive move search exhausted its budget", explored=explored)
            cert = c0.then(middle).then(c1.reversed())
            logger.info(f"General factorization: {len(cert.moves)} positive moves")
            return cert
        except Exception as e:
            logger.error(f"Failed to factor equivalence: {e}")
            raise

    def _lifted_unipotent(
        self,
        u: BlockedMatrix,
        v: BlockedMatrix,
        c0: Certificate,
        c1: Certificate,
        cycles: Sequence[int],
        h: CosetStructure,
    ) -> Optional[Certificate]:
        """Unipotent factorization between the positivized ends when the transported U, V allow it."""
        if c0.start.n != c1.start.n or c0.start.n < u.n:
            return None
        sizes = list(c0.start.blocking.sizes)
        big_u = stabilize1(u, sizes) if c0.start.n != u.n else u
        big_v = stabilize1(v, sizes) if c0.start.n != v.n else v
        u2 = c1.u @ big_u @ c0.reversed().u
        v2 = c0.reversed().v @ big_v @ c1.v
        dropped = isolated_indices(c0.end)
        if dropped != isolated_indices(c1.end):
            return None
        keep = [s for s in range(c0.end.n) if s not in set(dropped)]
        for x in (u2, v2):
            for s in dropped:
                if any(x[s, t] != (1 if s == t else 0) or x[t, s] != (1 if s == t else 0) for t in range(x.n)):
                    return None
        e0, e1 = c0.end.principal(keep), c1.end.principal(keep)
        blocking = e0.blocking
        su, sv = u2.principal(keep, keep_blocking=False), v2.principal(keep, keep_blocking=False)
        if _unipotent_problem(su.with_blocking(blocking), blocking, h) or _unipotent_problem(
            sv.with_blocking(blocking), blocking, h
        ):
            return None
        identity = BlockedMatrix.identity(e0.group, e0.n, blocking)
        try:
            inner = self.factor_unipotent(su, sv, e0 - identity, e1 - identity, cycles, h)
        except (HypothesisViolated, NotUnipotent, NotPlusPlus, EquationFails) as e:
            logger.debug(f"Transported pair does not factor directly: {e}")
            return None
        moves = [mv.model_copy(update={"s": keep[mv.s], "t": keep[mv.t]}) for mv in inner.moves]
        return Certificate.from_moves(c0.end, moves, blocked=True, structure=h)


def _edge_matrix(a: BlockedMatrix) -> BlockedMatrix:
    """Complete out-splitting: one state per summand of each entry, ordered by block and source."""
    group = a.group
    edges = [(s, t, g) for s in range(a.n) for t in range(a.n) for g in a[s, t].summands()]
    if a.blocking is not None:
        edges.sort(key=lambda e: (a.blocking.comp(e[0]), e[0]))
    zero = GroupRingElem.zero(group)
    rows = [[zero] * len(edges) for _ in edges]
    for k, (_, t, g) in enumerate(edges):
        for l, (s2, _, _) in enumerate(edges):
            if s2 == t:
                rows[k][l] = GroupRingElem.of(group, g)
    blocking = None
    if a.blocking is not None:
        counts = Counter(a.blocking.comp(e[0]) for e in edges)
        blocking = Blocking(a.blocking.poset, [counts.get(i, 0) for i in range(a.blocking.count)])
    return BlockedMatrix(group, rows, blocking)


def _unipotent_problem(x: BlockedMatrix, blocking: Blocking, structure: Optional[CosetStructure]) -> Optional[str]:
    """Reason x is not in U_P(n, H), or None."""
    if x.n != blocking.n:
        return f"size {x.n} differs from {blocking.n}"
    for s in range(x.n):
        for t in range(x.n):
            entry = x[s, t]
            if blocking.comp(s) == blocking.comp(t):
                if entry != (1 if s == t else 0):
                    return f"diagonal block entry ({s},{t}) is {entry}"
            elif entry:
                if not blocking.allows(s, t):
                    return f"entry ({s},{t}) lies outside the blocks"
                if structure is not None and not entry.supported_in(structure[blocking.comp(s), blocking.comp(t)]):
                    return f"entry ({s},{t}) leaves H[{blocking.comp(s)},{blocking.comp(t)}]"
    return None


def _padding_constant(delta: GroupRingElem, entries: Sequence[GroupRingElem]) -> int:
    """Least M >= 0 with every entry + M * delta in Z+G."""
    pad = 0
    for entry in entries:
        for g, c in entry.items():
            if c < 0:
                weight = delta.coeff(g)
                if weight == 0:
                    raise NotUnipotent(f"Negative coefficient on {delta.group.name(g)} outside the padding support")
                pad = max(pad, (-c + weight - 1) // weight)
    return pad


def _block_unipotent(identity: BlockedMatrix, entries: Dict[Tuple[int, int], GroupRingElem]) -> BlockedMatrix:
    return identity.with_entries(entries)


# Global pipeline service instance
pipeline_service = PipelineService()
