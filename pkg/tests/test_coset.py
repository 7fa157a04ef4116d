"""Coset structures, cohomology and the class conditions."""
import pytest

from src.algebra.coset import CosetStructure
from src.algebra.group import GSubset
from src.algebra.matrix import BlockedMatrix, Blocking, Poset
from src.exceptions import BadVertexChoice, NotACosetStructure, NotBlocked
from src.services.coset_service import coset_service
from tests.conftest import el, mat


@pytest.fixture
def chain2_blocking():
    return Blocking(Poset.chain(2), [1, 1])


@pytest.fixture
def upper_z2(z2, chain2_blocking):
    return mat(z2, [["e", "e"], ["0", "e"]], chain2_blocking)


def _structure(group, poset, sets):
    return CosetStructure(group, poset, {k: GSubset(group, v) for k, v in sets.items()})


class TestCosetStructure:
    def test_trivial_weights_everywhere(self, z2, upper_z2):
        h = coset_service.coset_structure_of(upper_z2)
        for _, cell in h.items():
            assert cell.names() == ["e"]
        for _, other in coset_service.all_vertex_choices(upper_z2):
            assert other == h

    def test_cohomologous_variant(self, z2, upper_z2):
        h = coset_service.coset_structure_of(upper_z2)
        variant = _structure(z2, Poset.chain(2), {(0, 0): [0], (1, 1): [0], (0, 1): [1]})
        gamma = coset_service.cohomologous(h, variant)
        assert gamma == [0, 1]
        assert h.conjugated(gamma) == variant

    def test_not_cohomologous_when_diagonals_differ(self, z2):
        poset = Poset.chain(2)
        left = _structure(z2, poset, {(0, 0): [0], (1, 1): [0], (0, 1): [0]})
        right = _structure(z2, poset, {(0, 0): [0, 1], (1, 1): [0], (0, 1): [0, 1]})
        assert coset_service.cohomologous(left, right) is None

    def test_vertex_outside_core(self, z2, chain2_blocking):
        a = mat(z2, [["e", "e"], ["0", "e"]], chain2_blocking)
        with pytest.raises(BadVertexChoice):
            coset_service.coset_structure_of(a, [1, 1])

    def test_products_must_stay_inside(self, z2):
        with pytest.raises(NotACosetStructure):
            _structure(z2, Poset.chain(2), {(0, 0): [0, 1], (1, 1): [0], (0, 1): [0]})

    def test_missing_path_between_related_blocks(self, z2, chain2_blocking):
        a = mat(z2, [["e", "0"], ["0", "g"]], chain2_blocking)
        with pytest.raises(NotACosetStructure):
            coset_service.coset_structure_of(a)

    def test_loop_weights_form_the_diagonal(self, z2):
        a = mat(z2, [["g"]], Blocking(Poset(1), [1]))
        h = coset_service.coset_structure_of(a)
        assert h.diagonal(0).names() == ["e", "g"]

    def test_relabeled(self, z2):
        poset = Poset(2)
        h = _structure(z2, poset, {(0, 0): [0], (1, 1): [0, 1]})
        swapped = h.relabeled([1, 0], poset)
        assert swapped.diagonal(0).names() == ["e", "g"]
        assert swapped.diagonal(1).names() == ["e"]


class TestClassConditions:
    def test_cycle_components(self, upper_z2, z2):
        assert coset_service.cycle_components(upper_z2) == [0, 1]
        loop = mat(z2, [["e + g"]], Blocking(Poset(1), [1]))
        assert coset_service.cycle_components(loop) == []

    def test_C1(self, upper_z2):
        assert coset_service.check_C1(upper_z2, [0, 1])
        assert not coset_service.check_C1(upper_z2, [0])

    def test_ensure_C2(self, z2):
        a = mat(z2, [["e + g"]], Blocking(Poset(1), [1]))
        assert coset_service.check_C2(a) is None
        padded = coset_service.ensure_C2(a)
        assert list(padded.blocking.sizes) == [3]
        assert padded[0, 0] == el(z2, "e + g")
        assert coset_service.check_C2(padded) is True

    def test_in_MoPCNH(self, upper_z2):
        h = coset_service.coset_structure_of(upper_z2)
        assert coset_service.in_MoPCNH(upper_z2, [0, 1], h)
        assert not coset_service.in_MoPCNH(upper_z2, [0], h)

    def test_in_MoPCNH_needs_blocking(self, z2, upper_z2):
        h = coset_service.coset_structure_of(upper_z2)
        with pytest.raises(NotBlocked):
            coset_service.in_MoPCNH(mat(z2, [["e", "e"], ["0", "e"]]), [0, 1], h)

    def test_rho(self):
        ranks = coset_service.rho(Poset.chain(3))
        assert ranks == {(0, 1): 1, (1, 2): 1, (0, 2): 2}

    def test_R_sets_drop_extendable_cells(self, z2):
        poset = Poset.chain(3)
        full = [0, 1]
        h = _structure(z2, poset, {(i, j): full for i, j in [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)]})
        d_sets, r_sets, rc = coset_service.R_sets(h, [])
        assert [c.names() for c in d_sets[(0, 2)]] == [["e", "g"]]
        assert r_sets[(0, 2)] == []
        assert len(r_sets[(0, 1)]) == 1
        assert rc == []


class TestPlusPlus:
    @pytest.fixture
    def structure(self, z2):
        return _structure(z2, Poset.chain(2), {(0, 0): [0, 1], (1, 1): [0], (0, 1): [0, 1]})

    def test_deltas(self, z2, structure):
        pair, single = coset_service.deltas(structure, [0, 1])
        assert pair[(0, 1)] == el(z2, "e + g")
        assert single[0] == el(z2, "e + g")
        assert single[1] == el(z2, "e")

    def test_cycle_form_is_plusplus(self, z2, structure, chain2_blocking):
        m = mat(z2, [["g - e", "e"], ["0", "0"]], chain2_blocking)
        assert coset_service.is_plusplus(m, [0, 1], structure)
        assert coset_service.special_indices(m, [0, 1]) == {0: 0, 1: 1}
        assert coset_service.check_C1plus(m, [0, 1])

    def test_vanishing_cycle_link_is_reported(self, z2, structure, chain2_blocking):
        m = mat(z2, [["g - e", "0"], ["0", "0"]], chain2_blocking)
        problems = coset_service.plusplus_problems(m, [0, 1], structure)
        assert any("vanishes" in p for p in problems)

    def test_negative_entries_are_reported(self, z2, structure, chain2_blocking):
        m = mat(z2, [["g - e", "-e"], ["0", "0"]], chain2_blocking)
        assert "M + I leaves Z+G" in coset_service.plusplus_problems(m, [0, 1], structure)

    def test_iter_targets(self, z2, structure):
        targets = list(coset_service.iter_targets(structure, [0, 1]))
        assert len(targets) == 1
        i, j, cell, in_rc = targets[0]
        assert (i, j) == (0, 1)
        assert cell.names() == ["e", "g"]
        assert in_rc

    def test_identity_blocks(self, z2, chain2_blocking):
        m = BlockedMatrix.zeros(z2, 2, chain2_blocking)
        assert coset_service.special_indices(m, [0, 1]) == {0: 0, 1: 1}
