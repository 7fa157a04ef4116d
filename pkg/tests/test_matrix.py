"""Posets, blockings, matrices over ZG and their graph views."""
from collections import Counter

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.algebra.graph import (
    digraph,
    is_G_primitive,
    is_in_Mo,
    is_irreducible,
    lift_regular,
    nondegenerate_core,
    path_weights,
    period,
    recurrent_states,
    scc_structure,
    transition_states,
)
from src.algebra.group import FiniteGroup, GSubset
from src.algebra.matrix import (
    BlockedMatrix,
    Blocking,
    ElementaryMatrix,
    Poset,
    augment_matrix,
    mat_identity,
    mat_mul,
    mat_power,
    stabilization_map,
    stabilize0,
    stabilize1,
)
from src.algebra.ring import GroupRingElem
from src.exceptions import NotBlocked, ShrinkNotAllowed, SizeMismatch
from src.utils import random_gen
from tests.conftest import el, mat

S3 = FiniteGroup.symmetric(3)
Z2 = FiniteGroup.cyclic(2)


class TestPoset:
    def test_closure_and_covering(self):
        p = Poset.chain(4)
        assert p.less(0, 3)
        assert not p.less(3, 0)
        assert p.covering_pairs() == [(0, 1), (1, 2), (2, 3)]
        assert p.between(0, 3) == [1, 2]

    def test_relations_must_follow_index_order(self):
        with pytest.raises(NotBlocked):
            Poset(2, [(1, 0)])

    def test_restrict(self):
        p = Poset(4, [(0, 1), (1, 3), (0, 2)])
        assert p.restrict([0, 3]).pairs() == [(0, 1)]
        assert p.restrict([2, 3]).pairs() == []

    def test_blocking(self, counterexample_blocking):
        b = counterexample_blocking
        assert b.n == 4
        assert [b.comp(s) for s in range(4)] == [0, 1, 1, 2]
        assert list(b.indices(1)) == [1, 2]
        assert b.allows(1, 2) and b.allows(2, 1)
        assert not b.allows(3, 0)
        with pytest.raises(NotBlocked):
            Blocking(Poset.chain(2), [1])


class TestBlockedMatrix:
    def test_shape_checks(self, z2):
        with pytest.raises(SizeMismatch):
            BlockedMatrix(z2, [[1, 0], [0]])
        with pytest.raises(SizeMismatch):
            BlockedMatrix(z2, [[1]], Blocking(Poset.chain(2), [1, 1]))

    def test_arithmetic(self, z2):
        a = mat(z2, [["e", "g"], ["0", "g"]])
        assert a.one_minus() == mat(z2, [["0", "-g"], ["0", "e - g"]])
        assert (a @ a) == mat(z2, [["e", "g + e"], ["0", "e"]])
        assert mat_power(a, 3) == a @ a @ a
        assert mat_power(a, 0).is_identity()
        assert mat_mul(a, mat_identity(z2, 2)) == a

    def test_star_reverses_products(self, s3):
        a = mat(s3, [["c01", "e"], ["c012", "0"]])
        b = mat(s3, [["c12 + e", "0"], ["c02", "2*c021"]])
        assert (a @ b).star() == b.star() @ a.star()

    def test_elementary_matrices(self, s3):
        m = mat(s3, [["c01", "e", "0"], ["0", "c012", "e"], ["c02", "0", "e"]])
        e = ElementaryMatrix(3, 0, 2, el(s3, "c12 - e"))
        assert e.left_apply(m) == e.matrix() @ m
        assert e.right_apply(m) == m @ e.matrix()
        assert e.matrix() @ e.inverse().matrix() == BlockedMatrix.identity(s3, 3)
        with pytest.raises(ValueError):
            ElementaryMatrix(3, 1, 1, el(s3, "e"))

    def test_principal_keeps_blocking(self, counterexample):
        a, _, _ = counterexample
        sub = a.principal([0, 3])
        assert sub == mat(a.group, [["g_e", "0"], ["0", "e_g"]])
        assert sub.blocking.sizes == (1, 1)
        assert sub.blocking.poset.less(0, 1)

    def test_permuted(self, z3):
        a = mat(z3, [["e", "g"], ["g2", "0"]])
        assert a.permuted([1, 0]) == mat(z3, [["0", "g2"], ["g", "e"]])
        with pytest.raises(SizeMismatch):
            a.permuted([0, 0])

    def test_stabilize(self, z2):
        a = mat(z2, [["g"]])
        assert stabilize0(a, 2) == mat(z2, [["g", "0"], ["0", "0"]])
        assert stabilize1(a, 2) == mat(z2, [["g", "0"], ["0", "e"]])
        with pytest.raises(ShrinkNotAllowed):
            stabilize0(stabilize0(a, 2), 1)

    def test_blocked_stabilization_appends_to_each_block(self, z2):
        blocking = Blocking(Poset.chain(2), [1, 1])
        a = mat(z2, [["g", "e"], ["0", "e"]], blocking)
        big = stabilize0(a, [2, 1])
        assert stabilization_map(a, [2, 1]) == [0, 2]
        assert big.blocking.sizes == (2, 1)
        assert big[0, 2] == el(z2, "e")
        assert big[1, 1] == 0

    def test_augment_and_lift(self, z2):
        a = mat(z2, [["2*e + g", "g"], ["0", "e"]])
        assert augment_matrix(a).tolist() == [[3, 1], [0, 1]]
        lift = a.lift()
        assert lift.shape == (4, 4)
        assert lift.sum() == 2 * (3 + 1 + 1)
        assert lift[0:2, 0:2].tolist() == [[2, 1], [1, 2]]

    def test_blocked_form(self, counterexample):
        a, _, _ = counterexample
        assert a.is_blocked_form()
        assert a.star().blocking is None
        assert not a.with_entries({(3, 0): el(a.group, "e")}).is_blocked_form()


class TestGraphViews:
    def test_nondegenerate_core(self, z2):
        core, keep = nondegenerate_core(mat(z2, [["0", "e"], ["0", "0"]]))
        assert keep == [] and core.n == 0
        core, keep = nondegenerate_core(mat(z2, [["g", "e"], ["0", "0"]]))
        assert keep == [0]

    def test_recurrent_and_transitions(self, z2):
        a = mat(z2, [["e", "e", "0"], ["0", "0", "e"], ["0", "0", "g"]])
        assert recurrent_states(a) == [0, 2]
        assert transition_states(a) == [1]

    def test_scc_structure(self, counterexample):
        a, _, _ = counterexample
        scc = scc_structure(a)
        assert scc.components == [[0], [1], [2], [3]]
        assert scc.cycle_flags == [True] * 4
        assert (0, 3) in scc.order and (1, 2) not in scc.order

    def test_in_Mo(self, z2, counterexample):
        blocking = Blocking(Poset.chain(2), [1, 1])
        assert is_in_Mo(mat(z2, [["e", "e"], ["0", "g"]], blocking))
        assert not is_in_Mo(mat(z2, [["e", "0"], ["0", "g"]], blocking))
        a, _, _ = counterexample
        # the middle block is two separate loops
        assert not is_in_Mo(a)
        with pytest.raises(NotBlocked):
            is_in_Mo(a.with_blocking(None))

    def test_irreducible_and_primitive(self, z2):
        assert is_irreducible(mat(z2, [["0", "e"], ["g", "0"]]))
        assert not is_irreducible(mat(z2, [["e", "e"], ["0", "e"]]))
        assert is_G_primitive(mat(z2, [["e + g"]]))
        assert not is_G_primitive(mat(z2, [["g"]]))

    def test_path_weights(self, z3):
        a = mat(z3, [["0", "g"], ["g", "0"]])
        assert path_weights(a, 0, 0) == GSubset(z3, [0, 1, 2])
        assert path_weights(a, 0, 1) == GSubset(z3, [0, 1, 2])
        b = mat(z3, [["0", "g"], ["e", "0"]])
        assert path_weights(b, 0, 0) == z3.full()

    def test_lift_and_period(self, z2):
        lifted = lift_regular(mat(z2, [["2*e + g"]]))
        assert lifted.edge_count() == 6
        assert np.array_equal(lifted.adjacency, np.array([[2, 1], [1, 2]]))
        three_cycle = digraph(mat(z2, [["0", "e", "0"], ["0", "0", "e"], ["e", "0", "0"]]))
        assert period(three_cycle) == 3


def _matrices(group: FiniteGroup, n: int):
    entries = st.dictionaries(st.sampled_from(list(group.elements())), st.integers(0, 2), max_size=group.order)
    rows = st.lists(st.lists(entries.map(lambda c: GroupRingElem(group, c)), min_size=n, max_size=n), min_size=n, max_size=n)
    return rows.map(lambda r: BlockedMatrix(group, r))


def _support_pattern(m: BlockedMatrix) -> BlockedMatrix:
    rows = [[GroupRingElem(m.group, {g: 1 for g in m[s, t].support()}) for t in range(m.n)] for s in range(m.n)]
    return BlockedMatrix(m.group, rows)


def _act(group: FiniteGroup, g: int, node):
    """g . (s, h) = (s, gh) on the lifted vertices."""
    return node[0], group.mul(g, node[1])


def _some_power_is_G_positive(a: BlockedMatrix) -> bool:
    """Walk the powers of A up to the Wielandt bound of its lift."""
    order = a.group.order
    limit = (a.n * order - 1) ** 2 + 1
    pattern = _support_pattern(a)
    power = pattern
    for _ in range(limit):
        if all(len(power[s, t].support()) == order for s in range(a.n) for t in range(a.n)):
            return True
        power = _support_pattern(power @ pattern)
    return False


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(_matrices(S3, 3), _matrices(S3, 3))
    def test_augmentation_is_multiplicative(self, a, b):
        assert np.array_equal(augment_matrix(a @ b), augment_matrix(a) @ augment_matrix(b))

    @settings(max_examples=40, deadline=None)
    @given(_matrices(Z2, 3), st.integers(0, 3))
    def test_zero_stabilization_keeps_the_core(self, a, extra):
        core, keep = nondegenerate_core(a)
        padded_core, padded_keep = nondegenerate_core(stabilize0(a, a.n + extra))
        assert padded_keep == keep
        assert np.array_equal(padded_core.lift(), core.lift())

    def test_G_primitive_matches_positive_powers(self):
        rng = random_gen.make_rng(31)
        for _ in range(40):
            group = random_gen.random_group(rng, ("trivial", "z2", "z3", "z4", "z2xz2"))
            n = int(rng.integers(1, 4))
            a = random_gen.random_matrix(rng, group, n, density=0.5, max_entry=1)
            assert is_G_primitive(a) == _some_power_is_G_positive(a)

    def test_lift_counts_and_group_action(self):
        rng = random_gen.make_rng(32)
        for _ in range(30):
            group = random_gen.random_group(rng, ("z2", "z3", "s3"))
            n = int(rng.integers(1, 4))
            a = random_gen.random_matrix(rng, group, n, density=0.5, max_entry=2)
            lifted = lift_regular(a)
            assert lifted.edge_count() == group.order * int(augment_matrix(a).sum())
            edges = Counter((u, v) for u, v, _ in lifted.graph.edges(keys=True))
            comps = {frozenset(c) for c in nx.strongly_connected_components(lifted.graph)}
            for g in group.elements():
                moved = Counter({(_act(group, g, u), _act(group, g, v)): c for (u, v), c in edges.items()})
                assert moved == edges
                assert {frozenset(_act(group, g, x) for x in c) for c in comps} == comps
