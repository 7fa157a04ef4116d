"""Finite groups, subsets and the integral group ring."""
import pytest
from hypothesis import given, settings, strategies as st

from src.algebra.group import FiniteGroup, GSubset, double_cosets, nonempty, subgroup_generated
from src.algebra.ring import GroupRingElem, augment, cyclic_delta, project, regular_matrix, ring_add, ring_mul
from src.exceptions import EmptySubset, GroupMismatch, InvalidGroupTable, NotASubgroup
from tests.conftest import el

S3 = FiniteGroup.symmetric(3)


def ring_elements(group: FiniteGroup):
    coeffs = st.dictionaries(st.sampled_from(list(group.elements())), st.integers(-3, 3), max_size=group.order)
    return coeffs.map(lambda c: GroupRingElem(group, c))


class TestFiniteGroup:
    def test_cyclic_names_and_orders(self, z6):
        assert z6.names == ("e", "g", "g2", "g3", "g4", "g5")
        assert z6.element_order(z6.index("g2")) == 3
        assert z6.element_order(z6.index("g3")) == 2
        assert z6.inv(z6.index("g")) == z6.index("g5")
        assert z6.power(1, -1) == 5

    def test_symmetric_group(self, s3):
        assert s3.order == 6
        assert not s3.is_abelian()
        orders = sorted(s3.element_order(g) for g in s3.elements())
        assert orders == [1, 2, 2, 2, 3, 3]
        assert s3.name(s3.identity) == "e"

    def test_direct_product_names(self, klein):
        assert klein.order == 4
        assert klein.is_abelian()
        assert klein.index("g_e") == 2
        assert klein.index("e_g") == 1
        assert klein.mul(klein.index("g_e"), klein.index("e_g")) == klein.index("g_g")

    def test_bad_tables_rejected(self):
        with pytest.raises(InvalidGroupTable):
            FiniteGroup(["e", "a"], [[0, 1], [1, 1]])
        with pytest.raises(InvalidGroupTable):
            FiniteGroup(["e", "e"], [[0, 1], [1, 0]])
        with pytest.raises(InvalidGroupTable):
            FiniteGroup.symmetric(6)

    def test_unknown_name(self, z2):
        with pytest.raises(KeyError):
            z2.index("h")

    def test_group_mismatch(self, z2, z3):
        with pytest.raises(GroupMismatch):
            z2.check_same(z3)


class TestSubsets:
    def test_subgroup_generated(self, s3):
        c01 = s3.index("c01")
        assert subgroup_generated(GSubset(s3, [c01])).names() == ["e", "c01"]
        assert len(subgroup_generated(GSubset(s3, [c01, s3.index("c12")]))) == 6

    def test_double_cosets_partition(self, s3):
        h = GSubset(s3, [0, s3.index("c01")])
        cells = double_cosets(h, h)
        assert sorted(len(c) for c in cells) == [2, 4]
        assert cells[0].min() == 0
        assert set().union(*(c.members for c in cells)) == set(s3.elements())

    def test_require_subgroup(self, z6):
        with pytest.raises(NotASubgroup):
            GSubset(z6, [0, 1]).require_subgroup()
        assert GSubset(z6, [0, 3]).require_subgroup().is_subgroup()

    def test_conjugate_and_inverse(self, s3):
        h = GSubset(s3, [0, s3.index("c01")])
        for x in s3.elements():
            assert h.conjugate(x).is_subgroup()
        c012 = s3.index("c012")
        assert GSubset(s3, [c012]).inverse() == GSubset(s3, [s3.index("c021")])

    def test_nonempty(self, z2):
        with pytest.raises(EmptySubset):
            nonempty(GSubset(z2, []))


class TestGroupRing:
    def test_format_and_parse(self, z2):
        x = el(z2, "2*e - g")
        assert x.format() == "2*e - g"
        assert GroupRingElem.zero(z2).format() == "0"
        assert x.augment() == 1
        assert el(z2, "3") == 3

    def test_predicates(self, z3):
        full = GroupRingElem.sum_of(z3.full())
        assert full.is_g_positive()
        assert not el(z3, "e + g").is_g_positive()
        assert el(z3, "e + g").is_positive_on(GSubset(z3, [0, 1]))
        assert not el(z3, "e - g").is_nonneg()
        assert el(z3, "g").is_group_element()
        assert el(z3, "2*e + g").dominates(el(z3, "e"))

    def test_multiplication_non_commutative(self, s3):
        a, b = GroupRingElem.of(s3, s3.index("c01")), GroupRingElem.of(s3, s3.index("c12"))
        assert a * b != b * a
        assert (a * b).star() == b.star() * a.star()
        assert ring_mul(a, b) == a * b
        assert ring_add(a, b) == b + a
        assert augment(ring_add(a, b) * 3) == 6

    def test_cyclic_delta(self, z6):
        assert cyclic_delta(z6, z6.index("g2")) == el(z6, "e + g2 + g4")
        assert cyclic_delta(z6, 0) == 1

    def test_project(self, z6):
        x = el(z6, "2*e + g - g3")
        assert project(GSubset(z6, [0, 3]), x) == el(z6, "2*e - g3")
        with pytest.raises(EmptySubset):
            project(GSubset(z6, []), x)

    def test_regular_matrix_is_multiplicative(self, s3):
        a = el(s3, "c01 + 2*c012")
        b = el(s3, "e - c02")
        ra, rb, rab = regular_matrix(a), regular_matrix(b), regular_matrix(a * b)
        n = s3.order
        for i in range(n):
            for j in range(n):
                assert rab[i][j] == sum(ra[i][k] * rb[k][j] for k in range(n))

    @settings(max_examples=60, deadline=None)
    @given(ring_elements(S3), ring_elements(S3), ring_elements(S3))
    def test_ring_axioms(self, a, b, c):
        assert (a * b) * c == a * (b * c)
        assert a * (b + c) == a * b + a * c
        assert (a * b).augment() == a.augment() * b.augment()
        assert a - a == 0
