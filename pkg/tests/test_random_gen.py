"""Seeded random instances."""
import pytest

from src.algebra.graph import is_in_Mo, is_irreducible
from src.utils import random_gen


class TestRandomGen:
    def test_seed_reproduces(self):
        group = random_gen.named_group("s3")
        first = random_gen.random_matrix(random_gen.make_rng(11), group, 4)
        second = random_gen.random_matrix(random_gen.make_rng(11), group, 4)
        assert first == second
        assert first.is_nonneg()

    def test_unknown_group(self):
        with pytest.raises(KeyError):
            random_gen.named_group("a5")

    def test_element_support(self):
        rng = random_gen.make_rng(2)
        group = random_gen.named_group("z6")
        for _ in range(20):
            x = random_gen.random_element(rng, group, 3, support=[0, 3])
            assert x and x.is_nonneg()
            assert set(x.support()) <= {0, 3}

    def test_irreducible(self):
        rng = random_gen.make_rng(3)
        for n in range(1, 5):
            a = random_gen.random_irreducible(rng, random_gen.named_group("z2xz2"), n, density=0.1)
            assert is_irreducible(a)

    def test_blocked_matrices_are_in_Mo(self):
        rng = random_gen.make_rng(4)
        for _ in range(10):
            poset = random_gen.random_poset(rng, 3)
            a = random_gen.random_blocked(rng, random_gen.named_group("z3"), poset, [1, 2, 1])
            assert a.is_blocked_form()
            assert is_in_Mo(a)

    def test_permutation_and_diagonal(self):
        rng = random_gen.make_rng(5)
        assert sorted(random_gen.random_permutation(rng, 6)) == list(range(6))
        diagonal = random_gen.random_diagonal(rng, random_gen.named_group("s3"), 4)
        assert len(diagonal) == 4 and all(0 <= g < 6 for g in diagonal)
