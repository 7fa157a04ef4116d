"""
Move service: row and column cuts, state elimination, splittings,
diagonal and permutation scripts, and certificate verification.
"""
import time
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from loguru import logger

from src.algebra.coset import CosetStructure
from src.algebra.group import FiniteGroup
from src.algebra.matrix import Blocking, BlockedMatrix, Entry, Poset, stabilization_map, stabilize0
from src.algebra.ring import GroupRingElem
from src.exceptions import (
    BadPartition,
    BadSplit,
    BlockViolation,
    CosetViolation,
    DiagonalNotInG,
    IllegalCut,
    MoveError,
    NotAPermutation,
    SelfLoopPresent,
)
from src.models.certificate import Certificate, ConjugacyStep, Move, VerificationReport
from src.models.problem import ScriptEntry
from src.models.reports import ScriptItem


class MoveScript:
    """A working matrix that records every move applied to it."""

    def __init__(self, a: BlockedMatrix, structure: Optional[CosetStructure] = None):
        self.start = a
        self.current = a
        self.structure = structure
        self.moves: List[Move] = []
        self.positive = True

    @property
    def group(self) -> FiniteGroup:
        return self.start.group

    @property
    def n(self) -> int:
        return self.start.n

    def push(self, move: Move) -> BlockedMatrix:
        before = self.current
        after = move.apply(before)
        if move.annotation == "cut":
            problem = move.positivity_problem(before, after)
            if problem:
                raise IllegalCut(f"Move {len(self.moves)} ({move.describe()}): {problem}")
        else:
            self.positive = False
        problem = move.block_problem(before.blocking, self.structure)
        if problem:
            raise BlockViolation(f"Move {len(self.moves)} ({move.describe()}): {problem}")
        self.current = after
        self.moves.append(move)
        return after

    def _cut(self, side: str, direction: str, s: int, t: int, g: int) -> BlockedMatrix:
        value = GroupRingElem.of(self.group, g)
        return self.push(Move(side=side, direction=direction, s=s, t=t, value=value))

    def row_cut(self, s: int, t: int, g: int) -> BlockedMatrix:
        return self._cut("left", "forward", s, t, g)

    def row_uncut(self, s: int, t: int, g: int) -> BlockedMatrix:
        return self._cut("left", "backward", s, t, g)

    def col_cut(self, s: int, t: int, g: int) -> BlockedMatrix:
        return self._cut("right", "forward", s, t, g)

    def col_uncut(self, s: int, t: int, g: int) -> BlockedMatrix:
        return self._cut("right", "backward", s, t, g)

    def plumb(self, side: str, s: int, t: int, value: GroupRingElem, direction: str = "forward") -> BlockedMatrix:
        return self.push(Move(side=side, direction=direction, s=s, t=t, value=value, annotation="plumbing"))

    def extend(self, moves: Sequence[Move]) -> BlockedMatrix:
        for move in moves:
            self.push(move)
        return self.current

    def mark(self) -> int:
        return len(self.moves)

    def rollback(self, mark: int) -> None:
        """Undo every move after `mark` by replaying from the start."""
        self.moves = self.moves[:mark]
        current = self.start
        for move in self.moves:
            current = move.apply(current)
        self.current = current

    def seal(self) -> Certificate:
        return Certificate.from_moves(
            self.start,
            self.moves,
            positive=self.positive,
            blocked=self.start.blocking is not None,
            structure=self.structure,
        )

    # composite scripts

    def is_isolated(self, v: int) -> bool:
        m = self.current
        return not any(m[v, t] for t in range(m.n)) and not any(m[r, v] for r in range(m.n))

    def eliminate(self, u: int) -> BlockedMatrix:
        """Row-cut every edge into u, then column-cut every edge out of u."""
        m = self.current
        if m[u, u]:
            raise SelfLoopPresent(f"Index {u} carries the loop {m[u, u]}", index=u)
        for r in range(m.n):
            if r != u:
                for h in list(self.current[r, u].summands()):
                    self.row_cut(r, u, h)
        for t in range(m.n):
            if t != u:
                for h in list(self.current[u, t].summands()):
                    self.col_cut(u, t, h)
        return self.current

    def transfer(self, u: int, v: int, g: int) -> BlockedMatrix:
        """Move the role of u onto the isolated index v, conjugated by g; u ends isolated.

        Afterwards v has row g^-1 M(u, .), column M(., u) g and loop g^-1 M(u, u) g.
        """
        if u == v or not self.is_isolated(v):
            raise MoveError(f"Transfer target {v} must be a distinct isolated index")
        group = self.group
        ginv = group.inv(g)
        m = self.current
        loop = m[u, u]
        out_edges = {t: m[u, t] for t in range(m.n) if t not in (u, v) and m[u, t]}
        for c in loop.summands():
            self.col_uncut(v, u, group.mul(ginv, c))
        self.row_uncut(u, v, g)
        for x in list(self.current[v, u].summands()):
            self.row_cut(v, u, x)
        for s in range(m.n):
            if s not in (u, v):
                for x in list(self.current[s, u].summands()):
                    self.row_cut(s, u, x)
        for t in range(m.n):
            if t != u:
                for x in list(self.current[u, t].summands()):
                    self.col_cut(u, t, x)
        for t, b in out_edges.items():
            for x in b.summands():
                self.col_uncut(v, t, group.mul(ginv, x))
        return self.current


def summed(rows: Sequence[Sequence[GroupRingElem]], group: FiniteGroup) -> List[GroupRingElem]:
    zero = GroupRingElem.zero(group)
    if not rows:
        return []
    return [sum((row[t] for row in rows), zero) for t in range(len(rows[0]))]


def as_element(group: FiniteGroup, x: Union[int, str, GroupRingElem]) -> int:
    """A diagonal entry as a group element index."""
    if isinstance(x, GroupRingElem):
        if not x.is_group_element():
            raise DiagonalNotInG(f"Diagonal entry {x} is not a single group element")
        return x.as_group_element()
    if isinstance(x, str):
        return group.index(x)
    if not 0 <= int(x) < group.order:
        raise DiagonalNotInG(f"Diagonal entry {x} is outside the group")
    return int(x)


def diagonal_conjugate(a: BlockedMatrix, entries: Sequence[int]) -> BlockedMatrix:
    """D^-1 A D for D = diag(entries): B(s,t) = g_s^-1 A(s,t) g_t."""
    inv = a.group.inv
    rows = [[a[s, t].left(inv(entries[s])).right(entries[t]) for t in range(a.n)] for s in range(a.n)]
    return BlockedMatrix(a.group, rows, a.blocking)


def out_split_matrix(a: BlockedMatrix, s: int, cells: Sequence[Sequence[GroupRingElem]]) -> BlockedMatrix:
    """Copies s_0 = s, s_1 = s+1, ... of s, each owning one cell of row s; column s is duplicated."""
    m = len(cells)
    n = a.n
    old_to_new = [t if t <= s else t + m - 1 for t in range(n)]
    size = n + m - 1
    zero = GroupRingElem.zero(a.group)
    rows = [[zero] * size for _ in range(size)]
    copies = list(range(s, s + m))
    for r in range(n):
        if r == s:
            continue
        for t in range(n):
            targets = copies if t == s else [old_to_new[t]]
            for tt in targets:
                rows[old_to_new[r]][tt] = a[r, t]
    for c, cell in enumerate(cells):
        for t in range(n):
            targets = copies if t == s else [old_to_new[t]]
            for tt in targets:
                rows[s + c][tt] = cell[t]
    blocking = a.blocking.insert(a.blocking.comp(s), m - 1) if a.blocking is not None else None
    return BlockedMatrix(a.group, rows, blocking)


def normalize_row(a: BlockedMatrix, row: Union[Sequence[Entry], Mapping[int, Entry]]) -> List[GroupRingElem]:
    zero = GroupRingElem.zero(a.group)
    if isinstance(row, Mapping):
        out = [zero] * a.n
        for t, x in row.items():
            out[t] = x if isinstance(x, GroupRingElem) else GroupRingElem(a.group, {0: int(x)})
        return out
    if len(row) != a.n:
        raise BadSplit(f"Row has length {len(row)}, matrix has size {a.n}")
    return [x if isinstance(x, GroupRingElem) else GroupRingElem(a.group, {0: int(x)}) for x in row]


def isolated_indices(a: BlockedMatrix) -> List[int]:
    return [s for s in range(a.n) if not any(a[s, t] for t in range(a.n)) and not any(a[r, s] for r in range(a.n))]


class MoveService:
    """Service class for positive moves and the scripts built from them."""

    def row_cut(
        self, a: BlockedMatrix, s: int, t: int, g: int, structure: Optional[CosetStructure] = None
    ) -> Tuple[BlockedMatrix, Move]:
        """Forward left move E_st(g): B(s,r) = A(s,r) + g A(t,r), minus g at (s,t)."""
        script = MoveScript(a, structure)
        b = script.row_cut(s, t, g)
        return b, script.moves[0]

    def col_cut(
        self, a: BlockedMatrix, s: int, t: int, g: int, structure: Optional[CosetStructure] = None
    ) -> Tuple[BlockedMatrix, Move]:
        """Forward right move E_st(g): B(r,t) = A(r,t) + A(r,s) g, minus g at (s,t)."""
        script = MoveScript(a, structure)
        b = script.col_cut(s, t, g)
        return b, script.moves[0]

    def eliminate_state(
        self, m: BlockedMatrix, s: int, structure: Optional[CosetStructure] = None
    ) -> Tuple[BlockedMatrix, Certificate]:
        """M_(s)(r,t) = M(r,t) + M(r,s)M(s,t) with row and column s zeroed."""
        try:
            m.require_nonneg()
            script = MoveScript(m, structure)
            script.eliminate(s)
            logger.debug(f"Eliminated index {s} with {len(script.moves)} moves")
            return script.current, script.seal()
        except Exception as e:
            logger.error(f"Failed to eliminate state {s}: {e}")
            raise

    def _split_into(
        self, script: MoveScript, s: int, z: int, row2: Sequence[GroupRingElem]
    ) -> BlockedMatrix:
        """Split row s of the working matrix into rows s and the isolated index z."""
        group = script.group
        current = script.current
        row = current.row(s)
        if any(not x.is_nonneg() for x in row2) or any(not (row[t] - row2[t]).is_nonneg() for t in range(len(row2))):
            raise BadSplit(f"Split of row {s} does not leave two nonnegative rows")
        if row2[z]:
            raise BadSplit("The new index cannot receive entries of its own column")
        e = group.identity
        script.row_uncut(s, z, e)
        for k in range(script.n):
            if k in (s, z):
                continue
            if k < s:
                for x in row2[k].summands():
                    script.col_uncut(z, k, x)
        for x in row2[s].summands():
            script.col_uncut(z, s, x)
        for k in range(script.n):
            if k not in (s, z) and k > s:
                for x in row2[k].summands():
                    script.col_uncut(z, k, x)
        script.col_cut(s, z, e)
        return script.current

    def split_row(
        self,
        a: BlockedMatrix,
        s: int,
        row2: Union[Sequence[Entry], Mapping[int, Entry]],
        structure: Optional[CosetStructure] = None,
    ) -> Tuple[BlockedMatrix, BlockedMatrix, Certificate]:
        """Split row s into (row s - row2, row2); the new index s+1 follows s."""
        try:
            a.require_nonneg()
            second = normalize_row(a, row2)
            zero = GroupRingElem.zero(a.group)
            padded = a.insert_zero_index(s + 1, a.blocking.comp(s) if a.blocking is not None else None)
            padded_row2 = second[: s + 1] + [zero] + second[s + 1:]
            script = MoveScript(padded, structure)
            self._split_into(script, s, s + 1, padded_row2)
            cert = script.seal()
            expected = out_split_matrix(a, s, [[a[s, t] - second[t] for t in range(a.n)], second])
            if script.current != expected:
                raise MoveError("Row split script did not reach the split matrix")
            if a.n and all(a[p, q] == 0 for p in range(a.n) for q in range(p)) and not second[s]:
                if not (cert.u.is_upper_unitriangular() and cert.v.is_upper_unitriangular()):
                    raise MoveError("Split factors of an upper triangular matrix must be unipotent upper triangular")
            logger.debug(f"Split row {s} of a {a.n}x{a.n} matrix with {len(cert.moves)} moves")
            return padded, script.current, cert
        except Exception as e:
            logger.error(f"Failed to split row {s}: {e}")
            raise

    def split_column(
        self,
        a: BlockedMatrix,
        s: int,
        col2: Union[Sequence[Entry], Mapping[int, Entry]],
    ) -> Tuple[BlockedMatrix, BlockedMatrix, Certificate]:
        """Column version of split_row through the conjugate transpose; the new index s+1 follows s."""
        try:
            second = normalize_row(a, col2)
            padded_t, split_t, cert_t = self.split_row(a.star(), s, [x.star() for x in second])
            padded, split = padded_t.star(), split_t.star()
            if a.blocking is not None:
                blocking = a.blocking.insert(a.blocking.comp(s))
                padded, split = padded.with_blocking(blocking), split.with_blocking(blocking)
            cert = Certificate.from_moves(padded, [m.star() for m in cert_t.moves],
                                          blocked=a.blocking is not None)
            if cert.end != split:
                raise MoveError("Column split script did not reach the split matrix")
            return padded, split, cert
        except Exception as e:
            logger.error(f"Failed to split column {s}: {e}")
            raise

    def out_split(
        self, a: BlockedMatrix, s: int, cells: Sequence[Union[Sequence[Entry], Mapping[int, Entry]]]
    ) -> Tuple[BlockedMatrix, ConjugacyStep]:
        """Out-split state s by a partition of its row into nonzero nonnegative cells."""
        try:
            rows = [normalize_row(a, cell) for cell in cells]
            if not rows:
                raise BadPartition("A partition needs at least one cell")
            for k, row in enumerate(rows):
                if not all(x.is_nonneg() for x in row) or not any(row):
                    raise BadPartition(f"Cell {k} must be nonzero with entries in Z+G")
            if summed(rows, a.group) != list(a.row(s)):
                raise BadPartition(f"Cells do not add up to row {s}")
            if len(rows) == 1:
                return a, ConjugacyStep(kind="out_split", data={"state": s, "cells": [_cell_data(rows[0])]},
                                        before=a, after=a)
            b = out_split_matrix(a, s, rows)
            step = ConjugacyStep(
                kind="out_split",
                data={"state": s, "cells": [_cell_data(row) for row in rows]},
                before=a,
                after=b,
            )
            logger.debug(f"Out-split state {s} into {len(rows)} states")
            return b, step
        except Exception as e:
            logger.error(f"Failed to out-split state {s}: {e}")
            raise

    def trim_isolated(self, a: BlockedMatrix, keep: Optional[Sequence[int]] = None) -> Tuple[BlockedMatrix, ConjugacyStep]:
        """Drop indices with zero row and column (or keep exactly the given indices)."""
        if keep is None:
            dropped = set(isolated_indices(a))
            keep = [s for s in range(a.n) if s not in dropped]
        keep = sorted(keep)
        b = a.principal(keep)
        return b, ConjugacyStep(kind="restrict", data={"keep": list(keep)}, before=a, after=b)

    def stabilize(self, a: BlockedMatrix, sizes: Union[int, Sequence[int]]) -> Tuple[BlockedMatrix, ConjugacyStep]:
        b = stabilize0(a, sizes)
        data = {"sizes": list(sizes) if not isinstance(sizes, int) else [sizes]}
        return b, ConjugacyStep(kind="stabilize", data=data, before=a, after=b)

    def _helper_layout(self, a: BlockedMatrix, comps: Sequence[int]) -> Tuple[BlockedMatrix, List[int], Dict[int, int]]:
        """0-stabilize with one extra index at the end of each listed component (or of the matrix)."""
        wanted = sorted(set(comps))
        if not wanted:
            return a, list(range(a.n)), {}
        if a.blocking is None:
            big = stabilize0(a, a.n + 1)
            return big, list(range(a.n)), {0: a.n}
        sizes = [size + (1 if i in wanted else 0) for i, size in enumerate(a.blocking.sizes)]
        big = stabilize0(a, sizes)
        where = stabilization_map(a, sizes)
        helpers = {i: big.blocking.start(i) + sizes[i] - 1 for i in wanted}
        return big, where, helpers

    def diag_conj_script(
        self,
        a: BlockedMatrix,
        entries: Sequence[Union[int, str, GroupRingElem]],
        structure: Optional[CosetStructure] = None,
    ) -> Tuple[BlockedMatrix, BlockedMatrix, Certificate]:
        """Positive script from I - A' to I - B' for B = D^-1 A D, D = diag(entries).

        A' and B' are 0-stabilizations with at most one extra index per component
        that holds a vertex with a loop and a nontrivial conjugator.
        """
        try:
            a.require_nonneg()
            group = a.group
            if len(entries) != a.n:
                raise DiagonalNotInG(f"Diagonal has {len(entries)} entries for a {a.n}x{a.n} matrix")
            d = [as_element(group, x) for x in entries]
            if structure is not None and a.blocking is not None:
                for s, g in enumerate(d):
                    if g not in structure.diagonal(a.blocking.comp(s)):
                        raise CosetViolation(f"Diagonal entry {group.name(g)} at {s} is outside H[{a.blocking.comp(s)}]")
            looped = [s for s in range(a.n) if d[s] != group.identity and a[s, s]]
            comps = [a.blocking.comp(s) if a.blocking is not None else 0 for s in looped]
            big, where, helpers = self._helper_layout(a, comps)
            d_big = [group.identity] * big.n
            for s, g in enumerate(d):
                d_big[where[s]] = g
            script = MoveScript(big, structure)
            for s, g in enumerate(d):
                if g == group.identity:
                    continue
                u = where[s]
                if script.current[u, u]:
                    v = helpers[a.blocking.comp(s) if a.blocking is not None else 0]
                    script.transfer(u, v, g)
                    script.transfer(v, u, group.identity)
                else:
                    self._conjugate_loopless(script, u, g)
            target = diagonal_conjugate(big, d_big)
            if script.current != target:
                raise MoveError("Diagonal script did not reach D^-1 A D")
            cert = script.seal()
            logger.info(f"Diagonal conjugation script: size {a.n} -> {big.n}, {len(cert.moves)} moves")
            return big, target, cert
        except Exception as e:
            logger.error(f"Failed to build diagonal conjugation script: {e}")
            raise

    def _conjugate_loopless(self, script: MoveScript, u: int, g: int) -> None:
        """Eliminate u, then run the elimination of u in the conjugated matrix backwards."""
        conj = [script.group.identity] * script.n
        conj[u] = g
        target = diagonal_conjugate(script.current, conj)
        script.eliminate(u)
        back = MoveScript(target, script.structure)
        back.eliminate(u)
        script.extend([m.inverse() for m in reversed(back.moves)])

    def perm_sim_script(
        self,
        a: BlockedMatrix,
        order: Sequence[int],
        structure: Optional[CosetStructure] = None,
    ) -> Tuple[BlockedMatrix, BlockedMatrix, Certificate]:
        """Positive script realizing B(s,t) = A(order[s], order[t]).

        Uses an index with zero diagonal as the hole when one exists in each moved
        block; otherwise one extra index is added at the end of the block.
        """
        try:
            a.require_nonneg()
            n = a.n
            order = [int(x) for x in order]
            if sorted(order) != list(range(n)):
                raise NotAPermutation(f"{order} is not a permutation of 0..{n - 1}")
            blocking = a.blocking
            if blocking is not None and any(blocking.comp(order[s]) != blocking.comp(s) for s in range(n)):
                raise BlockViolation("A blocked permutation must preserve every block")
            groups = _moved_groups(a, order)
            need_helper = [key for key, members in groups.items()
                           if not any(not a[z, z] for z in members)]
            big, where, helpers = self._helper_layout(a, need_helper)
            order_big = list(range(big.n))
            for s in range(n):
                order_big[where[s]] = where[order[s]]
            script = MoveScript(big, structure)
            partial = list(range(big.n))
            for key, members in sorted(groups.items()):
                slots = [where[s] for s in members]
                if key in helpers:
                    hole = helpers[key]
                    slots = slots + [hole]
                else:
                    hole = where[min(z for z in members if not a[z, z])]
                    script.eliminate(hole)
                final_hole = order_big.index(hole)
                self._sort_with_hole(script, slots, order_big, hole, final_hole)
                for s in slots:
                    partial[s] = order_big[s]
                if key not in helpers:
                    fill = MoveScript(big.permuted(partial, big.blocking), structure)
                    fill.eliminate(final_hole)
                    if fill.current != script.current:
                        raise MoveError("Hole elimination does not match the sorted matrix")
                    script.extend([m.inverse() for m in reversed(fill.moves)])
            target = big.permuted(order_big, big.blocking)
            if script.current != target:
                raise MoveError("Permutation script did not reach the permuted matrix")
            cert = script.seal()
            logger.info(f"Permutation script: size {n} -> {big.n}, {len(cert.moves)} moves")
            return big, target, cert
        except Exception as e:
            logger.error(f"Failed to build permutation script: {e}")
            raise

    def _sort_with_hole(
        self, script: MoveScript, slots: Sequence[int], order: Sequence[int], hole: int, final_hole: int
    ) -> None:
        """Move contents between slots (one isolated) until slot s holds content order[s]."""
        content: Dict[int, Optional[int]] = {s: s for s in slots}
        content[hole] = None
        position = {c: s for s, c in content.items() if c is not None}
        while True:
            if hole != final_hole:
                wanted = order[hole]
                src = position[wanted]
            else:
                misplaced = [s for s in slots if s != hole and content[s] != order[s]]
                if not misplaced:
                    return
                src = misplaced[0]
            script.transfer(src, hole, script.group.identity)
            moved = content[src]
            content[hole], content[src] = moved, None
            position[moved] = hole
            hole = src

    def neighbors(
        self, a: BlockedMatrix, structure: Optional[CosetStructure] = None
    ) -> Iterator[Tuple[Move, BlockedMatrix]]:
        """Every basic positive move out of A, forward and backward on both sides."""
        group = a.group
        blocking = a.blocking
        for s in range(a.n):
            for t in range(a.n):
                if s == t or (blocking is not None and not blocking.allows(s, t)):
                    continue
                for side in ("left", "right"):
                    for direction in ("forward", "backward"):
                        candidates = a[s, t].support() if direction == "forward" else group.elements()
                        for g in candidates:
                            move = Move(side=side, direction=direction, s=s, t=t,
                                        value=GroupRingElem.of(group, g))
                            if move.block_problem(blocking, structure):
                                continue
                            after = move.apply(a)
                            if move.positivity_problem(a, after) is None:
                                yield move, after

    def bounded_path(
        self,
        a: BlockedMatrix,
        b: BlockedMatrix,
        depth: int,
        entry_cap: int,
        seconds: float,
        structure: Optional[CosetStructure] = None,
    ) -> Tuple[Optional[Certificate], int]:
        """Bidirectional breadth-first search for a positive move script from A to B.

        Returns the certificate (or None when the budgets run out) and the number of
        matrices explored. Matrices whose total augmentation exceeds `entry_cap` are skipped.
        """
        blocked = a.blocking is not None
        if a == b:
            return Certificate.empty(a, blocked=blocked, structure=structure), 0
        deadline = time.monotonic() + seconds
        forward: Dict[BlockedMatrix, List[Move]] = {a: []}
        backward: Dict[BlockedMatrix, List[Move]] = {b: []}
        f_front, b_front = [a], [b]
        explored = 0
        for _ in range(depth):
            grow_forward = len(f_front) <= len(b_front)
            front, seen, other = (f_front, forward, backward) if grow_forward else (b_front, backward, forward)
            nxt = []
            for m in front:
                for move, after in self.neighbors(m, structure):
                    if time.monotonic() > deadline:
                        logger.warning(f"Move search stopped by its time budget after {explored} matrices")
                        return None, explored
                    if after in seen or int(after.augment().sum()) > entry_cap:
                        continue
                    seen[after] = seen[m] + [move]
                    explored += 1
                    if after in other:
                        moves = forward[after] + [mv.inverse() for mv in reversed(backward[after])]
                        cert = Certificate.from_moves(a, moves, blocked=blocked, structure=structure)
                        logger.info(f"Move search met in the middle: {len(moves)} moves, {explored} matrices")
                        return cert, explored
                    nxt.append(after)
            if grow_forward:
                f_front = nxt
            else:
                b_front = nxt
            if not nxt:
                break
        logger.warning(f"Move search exhausted depth {depth} after {explored} matrices")
        return None, explored

    def verify_certificate(self, cert: Certificate) -> VerificationReport:
        """Replay the moves, re-check legality and block membership, and the matrix equation."""
        current = cert.start
        group, n = cert.start.group, cert.start.n
        u = BlockedMatrix.identity(group, n)
        v = BlockedMatrix.identity(group, n)
        positive = True
        for k, move in enumerate(cert.moves):
            if move.s >= n or move.t >= n:
                return VerificationReport(ok=False, equation_holds=False, positive=False, blocked=False,
                                          moves_checked=k, failed_at=k, reason="move index outside the matrix")
            after = move.apply(current)
            problem = move.positivity_problem(current, after)
            if problem:
                positive = False
                if cert.positive:
                    return VerificationReport(ok=False, equation_holds=False, positive=False, blocked=cert.blocked,
                                              moves_checked=k, failed_at=k, reason=problem)
            if cert.blocked:
                problem = move.block_problem(cert.start.blocking, cert.structure)
                if problem:
                    return VerificationReport(ok=False, equation_holds=False, positive=positive, blocked=False,
                                              moves_checked=k, failed_at=k, reason=problem)
            e = move.elementary(n)
            if move.side == "left":
                u = e.left_apply(u)
            else:
                v = e.right_apply(v)
            current = after
        if not cert.moves:
            u, v = cert.u, cert.v
            if not (u.is_identity() and v.is_identity()):
                positive = False
        elif u != cert.u or v != cert.v:
            return VerificationReport(ok=False, equation_holds=False, positive=positive, blocked=cert.blocked,
                                      moves_checked=len(cert.moves), reason="stored factors differ from the replayed ones")
        if cert.moves and current != cert.end:
            return VerificationReport(ok=False, equation_holds=False, positive=positive, blocked=cert.blocked,
                                      moves_checked=len(cert.moves), reason="replay does not reach the end matrix")
        holds = u @ cert.start.one_minus() @ v == cert.end.one_minus()
        blocked_ok = cert.blocked and _factors_blocked(u, v, cert.start.blocking, cert.structure)
        if cert.blocked and not blocked_ok:
            return VerificationReport(ok=False, equation_holds=holds, positive=positive, blocked=False,
                                      moves_checked=len(cert.moves), reason="factors leave the blocked group")
        ok = holds and (positive or not cert.positive)
        if not holds:
            reason = "U (I - A) V differs from I - B"
        elif not ok:
            reason = "certificate claims positivity without a legal move decomposition"
        else:
            reason = ""
        return VerificationReport(ok=ok, equation_holds=holds, positive=positive,
                                  blocked=blocked_ok, moves_checked=len(cert.moves), reason=reason)

    def replay_step(self, step: ConjugacyStep) -> BlockedMatrix:
        a = step.before
        data = step.data
        if step.kind == "out_split":
            cells = [_cell_rows(a, cell) for cell in data["cells"]]
            return self.out_split(a, data["state"], cells)[0]
        if step.kind == "permutation":
            return a.permuted(data["order"], step.after.blocking)
        if step.kind == "diagonal":
            return diagonal_conjugate(a, data["entries"])
        if step.kind == "restrict":
            return a.principal(data["keep"])
        if step.kind == "stabilize":
            sizes = data["sizes"]
            return stabilize0(a, sizes[0] if a.blocking is None else sizes)
        raise MoveError(f"Unknown step kind {step.kind}")

    def script_from_record(
        self,
        start: BlockedMatrix,
        entries: Sequence[ScriptEntry],
        poset: Optional[Poset] = None,
        structure: Optional[CosetStructure] = None,
    ) -> List[ScriptItem]:
        """Rebuild script items from their recorded parameters by replaying them from start."""
        items: List[ScriptItem] = []
        current = start
        for k, entry in enumerate(entries):
            if entry.kind == "blocks":
                sizes = entry.data.get("sizes")
                if sizes is None:
                    current = current.with_blocking(None)
                    continue
                if poset is None or sum(sizes) != current.n:
                    raise MoveError(f"Script entry {k}: blocks {sizes} do not fit a {current.n}x{current.n} matrix")
                current = current.with_blocking(Blocking(poset, sizes))
            elif entry.kind == "certificate":
                for move in entry.moves:
                    if move.s >= current.n or move.t >= current.n:
                        raise MoveError(f"Script entry {k}: move {move.describe()} leaves a {current.n}x{current.n} matrix")
                cert = Certificate.from_moves(current, entry.moves, entry.positive, entry.blocked,
                                              structure if entry.coset else None)
                items.append(cert)
                current = cert.end
            else:
                pending = ConjugacyStep(kind=entry.kind, data=entry.data, before=current, after=current.with_blocking(None))
                try:
                    after = self.replay_step(pending)
                except (IndexError, KeyError, TypeError) as e:
                    raise MoveError(f"Script entry {k}: {entry.kind} does not apply to a {current.n}x{current.n} matrix") from e
                items.append(ConjugacyStep(kind=entry.kind, data=entry.data, before=current, after=after))
                current = after
        return items

    def verify_script(self, items: Sequence[ScriptItem]) -> VerificationReport:
        """Verify a chain of conjugacy steps and certificates."""
        checked = 0
        previous: Optional[BlockedMatrix] = None
        for k, item in enumerate(items):
            before = item.before if isinstance(item, ConjugacyStep) else item.start
            after = item.after if isinstance(item, ConjugacyStep) else item.end
            if previous is not None and previous != before:
                return VerificationReport(ok=False, equation_holds=False, positive=False, blocked=False,
                                          moves_checked=checked, failed_at=k, reason="script items do not chain")
            if isinstance(item, ConjugacyStep):
                if self.replay_step(item) != after:
                    return VerificationReport(ok=False, equation_holds=False, positive=False, blocked=False,
                                              moves_checked=checked, failed_at=k,
                                              reason=f"{item.kind} step does not replay")
            else:
                report = self.verify_certificate(item)
                checked += report.moves_checked
                if not report.ok:
                    return report.model_copy(update={"failed_at": k, "moves_checked": checked})
            previous = after
        return VerificationReport(ok=True, equation_holds=True, positive=True, blocked=True, moves_checked=checked)


def _moved_groups(a: BlockedMatrix, order: Sequence[int]) -> Dict[int, List[int]]:
    """Indices moved by the permutation, grouped by block (a single group when unblocked)."""
    groups: Dict[int, List[int]] = {}
    for s in range(a.n):
        if order[s] != s:
            key = a.blocking.comp(s) if a.blocking is not None else 0
            groups.setdefault(key, []).append(s)
    if a.blocking is not None:
        return {key: list(a.blocking.indices(key)) for key in groups}
    return {0: list(range(a.n))} if groups else {}


def _factors_blocked(u: BlockedMatrix, v: BlockedMatrix, blocking: Optional[Blocking],
                     structure: Optional[CosetStructure]) -> bool:
    if blocking is None:
        return False
    for m in (u, v):
        for s, t in m.nonzero_positions():
            if s == t:
                continue
            if not blocking.allows(s, t):
                return False
            if structure is not None and not m[s, t].supported_in(structure[blocking.comp(s), blocking.comp(t)]):
                return False
    return True


def _cell_data(row: Sequence[GroupRingElem]) -> Dict[int, Dict[int, int]]:
    return {t: x.coeffs for t, x in enumerate(row) if x}


def _cell_rows(a: BlockedMatrix, cell: Mapping) -> List[GroupRingElem]:
    zero = GroupRingElem.zero(a.group)
    row = [zero] * a.n
    for t, coeffs in cell.items():
        row[int(t)] = GroupRingElem(a.group, {int(g): int(c) for g, c in coeffs.items()})
    return row


# Global move service instance
move_service = MoveService()
