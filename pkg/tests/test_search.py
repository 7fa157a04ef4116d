"""Bounded equivalence oracle and the classification condition search."""
import pytest

from src.algebra.matrix import Blocking, Poset
from src.exceptions import NotNormalForm
from src.models.certificate import Certificate
from src.models.reports import CounterWitness, Unresolved
from src.services.move_service import move_service
from src.services.search_service import search_service
from tests.conftest import mat


@pytest.fixture
def cut_pair(z6):
    a = mat(z6, [["0", "g"], ["0", "g2"]])
    b, _ = move_service.row_cut(a, 0, 1, z6.index("g"))
    return a, b


class TestSeparatingInvariant:
    def test_census_separates_counterexample(self, counterexample):
        a, b, _ = counterexample
        witness = search_service.separating_invariant(a, b)
        assert witness == CounterWitness(invariant="orbit census", left="2", right="5")

    def test_det_separates(self, trivial):
        single = Blocking(Poset(1), [1])
        witness = search_service.separating_invariant(mat(trivial, [["0"]], single), mat(trivial, [["-2*e"]], single))
        assert witness is not None
        assert witness.invariant == "det"

    def test_nothing_separates_a_cut(self, cut_pair):
        a, b = cut_pair
        assert search_service.separating_invariant(a, b) is None


class TestOracle:
    def test_equal_inputs(self, z2):
        a = mat(z2, [["g"]])
        outcome = search_service.equiv_oracle(a, a)
        assert isinstance(outcome, Certificate)
        assert outcome.is_empty()

    def test_finds_a_certificate(self, cut_pair):
        a, b = cut_pair
        outcome = search_service.equiv_oracle(a, b, depth=4, entry_cap=16, seconds=10.0)
        assert isinstance(outcome, Certificate)
        assert move_service.verify_certificate(outcome).ok

    def test_counter_witness(self, counterexample):
        a, b, _ = counterexample
        assert isinstance(search_service.equiv_oracle(a, b), CounterWitness)

    def test_budget_exhausted(self, cut_pair):
        a, b = cut_pair
        outcome = search_service.equiv_oracle(a, b, depth=0, entry_cap=16, seconds=10.0)
        assert isinstance(outcome, Unresolved)

    def test_size_mismatch(self, z2):
        outcome = search_service.equiv_oracle(mat(z2, [["g"]]), mat(z2, [["g", "0"], ["0", "0"]]))
        assert isinstance(outcome, Unresolved)
        assert "stabilize" in outcome.reason


class TestConditionSearch:
    def test_needs_blocking(self, z2):
        with pytest.raises(NotNormalForm):
            search_service.classification_condition_search(mat(z2, [["g"]]), mat(z2, [["g"]]))

    def test_identical_normal_forms(self, z2):
        a = mat(z2, [["g"]], Blocking(Poset(1), [1]))
        result = search_service.classification_condition_search(a, a)
        assert result is not None
        assert result.alpha == [0]
        assert isinstance(result.outcome, Certificate)

    def test_poset_isomorphisms(self, z2):
        blocking = Blocking(Poset(2), [1, 1])
        a = mat(z2, [["g", "0"], ["0", "e"]], blocking)
        found = search_service.poset_isomorphisms(a, a, [0, 1], [0, 1])
        assert sorted(found) == [[0, 1], [1, 0]]
        assert search_service.poset_isomorphisms(a, a, [0], [1]) == [[1, 0]]
