"""Positive moves, splittings, eliminations and the conjugacy scripts."""
import numpy as np
import pytest

from src.algebra.coset import CosetStructure
from src.algebra.graph import lift_regular
from src.algebra.group import GSubset
from src.algebra.matrix import BlockedMatrix, Blocking, Poset
from src.algebra.ring import GroupRingElem
from src.exceptions import (
    BadPartition,
    BadSplit,
    BlockViolation,
    IllegalCut,
    MoveError,
    NotAPermutation,
    SelfLoopPresent,
)
from src.models.certificate import Certificate, Move
from src.models.problem import ScriptEntry
from src.services.move_service import MoveScript, diagonal_conjugate, move_service
from src.utils import random_gen
from tests.conftest import el, mat


class TestCuts:
    def test_row_cut_formula(self, z6):
        a = mat(z6, [["0", "g", "0"], ["0", "g2", "g3"], ["0", "0", "0"]])
        b, move = move_service.row_cut(a, 0, 1, z6.index("g"))
        assert b.row(0) == (el(z6, "0"), el(z6, "g3"), el(z6, "g4"))
        assert b.row(1) == a.row(1)
        assert move.inverse().apply(b) == a

    def test_col_cut_formula(self, s3):
        a = mat(s3, [["0", "c01", "0"], ["c12", "0", "0"], ["0", "c012", "0"]])
        b, _ = move_service.col_cut(a, 1, 0, s3.index("c12"))
        assert b[0, 0] == el(s3, "c01") * el(s3, "c12")
        assert b[2, 0] == el(s3, "c012") * el(s3, "c12")
        assert b[0, 0] != el(s3, "c12") * el(s3, "c01")
        assert b[1, 0] == 0
        assert b[0, 1] == a[0, 1] and b[2, 1] == a[2, 1]

    def test_cut_needs_the_summand(self, z6):
        a = mat(z6, [["0", "g"], ["0", "0"]])
        with pytest.raises(IllegalCut):
            move_service.row_cut(a, 0, 1, z6.index("g2"))

    def test_cut_outside_coset_structure(self, z2):
        blocking = Blocking(Poset.chain(2), [1, 1])
        a = mat(z2, [["e", "g"], ["0", "e"]], blocking)
        trivial = GSubset(z2, [0])
        h = CosetStructure(z2, Poset.chain(2), {(0, 0): trivial, (1, 1): trivial, (0, 1): trivial})
        with pytest.raises(BlockViolation):
            move_service.row_cut(a, 0, 1, z2.index("g"), h)

    def test_move_identities(self, z2):
        a = mat(z2, [["e", "g"], ["g", "e"]])
        move = Move(side="left", direction="forward", s=0, t=1, value=el(z2, "g"))
        b = move.apply(a)
        assert move.elementary(2).left_apply(a.one_minus()) == b.one_minus()
        assert move.inverse().apply(b) == a
        star = move.star()
        assert star.side == "right" and (star.s, star.t) == (1, 0)
        assert star.apply(a.star()) == b.star()

    def test_move_rejects_diagonal_position(self, z2):
        with pytest.raises(ValueError):
            Move(side="left", direction="forward", s=1, t=1, value=el(z2, "e"))


class TestMoveScript:
    def test_rollback(self, z2):
        a = mat(z2, [["0", "e"], ["e", "0"]])
        script = MoveScript(a)
        mark = script.mark()
        script.row_cut(0, 1, z2.identity)
        assert script.current != a
        script.rollback(mark)
        assert script.current == a
        assert script.moves == []

    def test_plumbing_clears_positivity(self, z2):
        a = mat(z2, [["e", "0"], ["0", "e"]])
        script = MoveScript(a)
        script.plumb("left", 0, 1, el(z2, "2*e"))
        cert = script.seal()
        assert not cert.positive
        report = move_service.verify_certificate(cert)
        assert report.ok and not report.positive

    def test_positive_claim_with_plumbing_fails(self, z2):
        a = mat(z2, [["e", "0"], ["0", "e"]])
        move = Move(side="left", direction="forward", s=0, t=1, value=el(z2, "2*e"), annotation="plumbing")
        cert = Certificate.from_moves(a, [move], positive=True)
        report = move_service.verify_certificate(cert)
        assert not report.ok
        assert report.failed_at == 0

    def test_transfer_conjugates(self, z2):
        a = mat(z2, [["g", "e", "0"], ["e", "0", "0"], ["0", "0", "0"]])
        script = MoveScript(a)
        script.transfer(0, 2, z2.index("g"))
        m = script.current
        assert script.is_isolated(0)
        assert m[2, 2] == el(z2, "g")
        assert m[2, 1] == el(z2, "g")
        assert m[1, 2] == el(z2, "g")
        assert move_service.verify_certificate(script.seal()).ok


class TestEliminationAndSplits:
    def test_eliminate_state(self, z2):
        a = mat(z2, [["0", "e"], ["e", "0"]])
        b, cert = move_service.eliminate_state(a, 1)
        assert b == mat(z2, [["e", "0"], ["0", "0"]])
        report = move_service.verify_certificate(cert)
        assert report.ok and report.positive

    def test_eliminate_with_loop(self, z2):
        a = mat(z2, [["g"]])
        with pytest.raises(SelfLoopPresent) as info:
            move_service.eliminate_state(a, 0)
        assert info.value.index == 0

    def test_split_row(self, z2):
        a = mat(z2, [["e + g"]])
        padded, split, cert = move_service.split_row(a, 0, [el(z2, "g")])
        assert padded.n == 2
        assert split == mat(z2, [["e", "e"], ["g", "g"]])
        assert cert.start == padded and cert.end == split
        assert move_service.verify_certificate(cert).ok

    def test_split_row_upper_triangular(self, z2):
        a = mat(z2, [["e", "g"], ["0", "e"]])
        _, split, cert = move_service.split_row(a, 0, {1: el(z2, "g")})
        assert split == mat(z2, [["e", "e", "0"], ["0", "0", "g"], ["0", "0", "e"]])
        assert cert.u.is_upper_unitriangular()
        assert cert.v.is_upper_unitriangular()

    def test_split_row_must_fit(self, z2):
        a = mat(z2, [["e", "g"], ["0", "e"]])
        with pytest.raises(BadSplit):
            move_service.split_row(a, 0, {1: el(z2, "e")})

    def test_split_column(self, z2):
        a = mat(z2, [["e + g"]])
        _, split, cert = move_service.split_column(a, 0, [el(z2, "g")])
        assert split == mat(z2, [["e", "g"], ["e", "g"]])
        assert move_service.verify_certificate(cert).ok

    def test_out_split_step(self, z2):
        a = mat(z2, [["e + g"]])
        b, step = move_service.out_split(a, 0, [[el(z2, "e")], [el(z2, "g")]])
        assert b == mat(z2, [["e", "e"], ["g", "g"]])
        assert step.kind == "out_split"
        assert move_service.replay_step(step) == b

    def test_out_split_needs_a_partition(self, z2):
        a = mat(z2, [["e + g"]])
        with pytest.raises(BadPartition):
            move_service.out_split(a, 0, [[el(z2, "e")], [el(z2, "e")]])

    def test_out_split_single_cell_is_the_identity(self, z2):
        a = mat(z2, [["e + g", "e"], ["g", "0"]])
        b, step = move_service.out_split(a, 0, [[el(z2, "e + g"), el(z2, "e")]])
        assert b == a and b.n == 2
        assert step.before == step.after == a
        assert len(step.data["cells"]) == 1
        assert move_service.replay_step(step) == a

    def test_out_split_keeps_periodic_point_counts(self):
        rng = random_gen.make_rng(71)
        checked = 0
        for _ in range(60):
            group = random_gen.random_group(rng, ("trivial", "z2"))
            n = int(rng.integers(1, 4))
            a = random_gen.random_matrix(rng, group, n, density=0.6, max_entry=2)
            s = int(rng.integers(0, n))
            summands = [(t, g) for t in range(n) for g in a[s, t].summands()]
            if len(summands) < 2:
                continue
            sides = [0, 1] + [int(rng.integers(0, 2)) for _ in summands[2:]]
            cells = [{}, {}]
            for (t, g), side in zip(summands, sides):
                cells[side][t] = cells[side].get(t, GroupRingElem.zero(group)) + GroupRingElem.of(group, g)
            b, _ = move_service.out_split(a, s, cells)
            assert b.n == n + 1
            big, small = lift_regular(b).adjacency, lift_regular(a).adjacency
            for k in range(1, 7):
                assert np.trace(np.linalg.matrix_power(big, k)) == np.trace(np.linalg.matrix_power(small, k))
            checked += 1
        assert checked > 5

    def test_trim_and_stabilize_steps(self, z2):
        a = mat(z2, [["e", "0"], ["0", "0"]])
        b, step = move_service.trim_isolated(a)
        assert b == mat(z2, [["e"]])
        assert step.data == {"keep": [0]}
        big, pad = move_service.stabilize(b, 3)
        assert big.n == 3
        assert move_service.replay_step(pad) == big
        assert move_service.verify_script([pad, step.model_copy(update={"before": big, "after": b})]).ok


class TestScriptRecords:
    def test_rebuilds_steps_and_certificates(self, z2):
        a = mat(z2, [["0", "g"], ["e", "0"]])
        moves = [
            Move(side="left", direction="forward", s=0, t=1, value=el(z2, "g")),
            Move(side="right", direction="forward", s=1, t=0, value=el(z2, "e")),
        ]
        entries = [
            ScriptEntry(kind="blocks", data={"sizes": [2]}),
            ScriptEntry(kind="certificate", blocked=True, moves=moves),
            ScriptEntry(kind="restrict", data={"keep": [0]}),
        ]
        items = move_service.script_from_record(a, entries, Poset(1))
        assert [type(x).__name__ for x in items] == ["Certificate", "ConjugacyStep"]
        assert items[0].start.blocking.sizes == (2,)
        assert items[-1].after == mat(z2, [["g"]])
        assert move_service.verify_script(items).ok

    def test_permutation_comes_back_unblocked(self, z2):
        a = mat(z2, [["g", "e"], ["0", "e"]], Blocking(Poset(1), [2]))
        items = move_service.script_from_record(a, [ScriptEntry(kind="permutation", data={"order": [1, 0]})])
        assert items[0].after == a.permuted([1, 0])
        assert items[0].after.blocking is None

    def test_bad_entries_raise(self, z2):
        a = mat(z2, [["g"]])
        with pytest.raises(MoveError):
            move_service.script_from_record(a, [ScriptEntry(kind="blocks", data={"sizes": [2]})], Poset(1))
        with pytest.raises(MoveError):
            move_service.script_from_record(a, [ScriptEntry(kind="restrict", data={"keep": [3]})])
        bad = Move(side="left", direction="forward", s=0, t=4, value=el(z2, "g"))
        with pytest.raises(MoveError):
            move_service.script_from_record(a, [ScriptEntry(kind="certificate", moves=[bad])])


class TestConjugacyScripts:
    def test_diag_without_loops(self, z2):
        a = mat(z2, [["0", "e"], ["e", "0"]])
        big, target, cert = move_service.diag_conj_script(a, ["g", "e"])
        assert big.n == 2
        assert target == mat(z2, [["0", "g"], ["g", "0"]])
        report = move_service.verify_certificate(cert)
        assert report.ok and report.positive

    def test_diag_with_loop_uses_one_helper(self, z2):
        a = mat(z2, [["g"]])
        big, target, cert = move_service.diag_conj_script(a, ["g"])
        assert big.n == 2
        assert target == mat(z2, [["g", "0"], ["0", "0"]])
        assert cert.end == target
        assert all(m.annotation == "cut" for m in cert.moves)

    def test_diag_conjugate_formula(self, s3):
        a = mat(s3, [["0", "c01"], ["c12", "0"]])
        g = s3.index("c012")
        b = diagonal_conjugate(a, [g, s3.identity])
        assert b[0, 1] == el(s3, "c021") * el(s3, "c01")
        assert b[1, 0] == el(s3, "c12") * el(s3, "c012")

    def test_perm_with_hole(self, z2):
        a = mat(z2, [["0", "e"], ["g", "0"]])
        big, target, cert = move_service.perm_sim_script(a, [1, 0])
        assert big.n == 2
        assert target == mat(z2, [["0", "g"], ["e", "0"]])
        assert move_service.verify_certificate(cert).ok

    def test_perm_without_hole_adds_one_index(self, trivial):
        a = mat(trivial, [["e", "e"], ["e", "2*e"]])
        big, target, cert = move_service.perm_sim_script(a, [1, 0])
        assert big.n == 3
        assert target.principal([0, 1], keep_blocking=False) == mat(trivial, [["2*e", "e"], ["e", "e"]])
        assert move_service.verify_certificate(cert).ok

    def test_perm_rejects_non_permutations(self, z2):
        a = mat(z2, [["0", "e"], ["g", "0"]])
        with pytest.raises(NotAPermutation):
            move_service.perm_sim_script(a, [0, 0])

    def test_blocked_perm_keeps_blocks(self, z2):
        a = mat(z2, [["0", "e"], ["0", "e"]], Blocking(Poset.chain(2), [1, 1]))
        with pytest.raises(BlockViolation):
            move_service.perm_sim_script(a, [1, 0])


class TestSearch:
    def test_neighbors_are_positive(self, trivial):
        a = mat(trivial, [["0", "e"], ["e", "0"]])
        found = list(move_service.neighbors(a))
        assert found
        for move, after in found:
            assert move.positivity_problem(a, after) is None

    def test_bounded_path_finds_a_cut(self, z6):
        a = mat(z6, [["0", "g"], ["0", "g2"]])
        b, _ = move_service.row_cut(a, 0, 1, z6.index("g"))
        cert, explored = move_service.bounded_path(a, b, depth=4, entry_cap=16, seconds=10.0)
        assert cert is not None and explored >= 1
        assert cert.end == b
        assert move_service.verify_certificate(cert).ok

    def test_bounded_path_equal_inputs(self, z2):
        a = mat(z2, [["g"]])
        cert, explored = move_service.bounded_path(a, a, depth=2, entry_cap=8, seconds=1.0)
        assert cert.is_empty() and explored == 0

    def test_counterexample_certificate(self, counterexample):
        a, b, u = counterexample
        assert a.one_minus() @ u == b.one_minus()
        identity = BlockedMatrix.identity(a.group, a.n)
        cert = Certificate(start=a, end=b, moves=[], u=identity, v=u, positive=False, blocked=True)
        report = move_service.verify_certificate(cert)
        assert report.ok and not report.positive and report.blocked
        claimed = cert.model_copy(update={"positive": True})
        assert not move_service.verify_certificate(claimed).ok

    def test_ring_zero_compares_with_int(self, z2):
        assert GroupRingElem.zero(z2) == 0
