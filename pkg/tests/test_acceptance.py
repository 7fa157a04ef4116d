"""Randomized end-to-end checks over seeded instances."""
from functools import reduce
from math import gcd

import pytest

from src.algebra.coset import CosetStructure
from src.algebra.graph import nondegenerate_core
from src.algebra.group import GSubset
from src.algebra.matrix import BlockedMatrix, Blocking, Poset
from src.algebra.ring import GroupRingElem
from src.formats.text_format import emit, parse_text
from src.models.certificate import ConjugacyStep, Move
from src.models.problem import ProblemFile
from src.services.coset_service import coset_service
from src.services.invariant_service import invariant_service
from src.services.move_service import diagonal_conjugate, move_service
from src.services.pipeline_service import pipeline_service
from src.utils import random_gen

pytestmark = pytest.mark.slow


def _is_upper(m: BlockedMatrix) -> bool:
    return all(not m[s, t] for s in range(m.n) for t in range(s))


def _minus_identity(m: BlockedMatrix) -> BlockedMatrix:
    return m - BlockedMatrix.identity(m.group, m.n, m.blocking)


def _walk_weights(a: BlockedMatrix, i: int, steps: int):
    """W_k for k = 1..steps: weights of closed walks of length k at i."""
    group = a.group
    states = {(i, group.identity)}
    out = []
    for _ in range(steps):
        states = {
            (t, group.mul(w, h))
            for s, w in states
            for t in range(a.n)
            for h in a[s, t].support()
        }
        out.append({w for s, w in states if s == i})
    return out


class TestConjugacyScripts:
    def test_diagonal(self):
        rng = random_gen.make_rng(101)
        for _ in range(200):
            group = random_gen.random_group(rng, ("z2", "z3", "z6", "s3"))
            n = int(rng.integers(1, 6))
            a = random_gen.random_matrix(rng, group, n, density=0.4, max_entry=2)
            entries = random_gen.random_diagonal(rng, group, n)
            big, target, cert = move_service.diag_conj_script(a, entries)
            report = move_service.verify_certificate(cert)
            assert report.ok and report.positive
            assert cert.end == target
            assert big.n <= n + 1
            assert all(m.annotation == "cut" for m in cert.moves)
            assert target.principal(list(range(n)), keep_blocking=False) == diagonal_conjugate(a, entries)

    def test_permutation(self):
        rng = random_gen.make_rng(202)
        for _ in range(200):
            group = random_gen.random_group(rng, ("z2", "z3", "z6", "s3"))
            n = int(rng.integers(1, 6))
            a = random_gen.random_matrix(rng, group, n, density=0.4, max_entry=2)
            order = random_gen.random_permutation(rng, n)
            big, target, cert = move_service.perm_sim_script(a, order)
            report = move_service.verify_certificate(cert)
            assert report.ok and report.positive
            assert cert.end == target
            assert big.n <= n + 1
            assert target.principal(list(range(n)), keep_blocking=False) == a.permuted(order)
            moved = [s for s in range(n) if order[s] != s]
            if any(not a[z, z] for z in moved):
                assert big.n == n

    def test_split_chain(self):
        rng = random_gen.make_rng(303)
        group = random_gen.named_group("z2")
        for _ in range(50):
            entries = {}
            for s in range(3):
                for t in range(s, 3):
                    if s == t or rng.random() < 0.7:
                        entries[(s, t)] = random_gen.random_element(rng, group, 2, sparse=False)
            entries[(0, 2)] = entries.get((0, 2), GroupRingElem.zero(group)) + GroupRingElem.of(group, 1)
            current = BlockedMatrix.from_entries(group, 3, entries)
            for _ in range(3):
                options = [(s, t) for s in range(current.n) for t in range(s + 1, current.n) if current[s, t]]
                if not options:
                    break
                s, t = options[int(rng.integers(0, len(options)))]
                summands = list(current[s, t].summands())
                x = GroupRingElem.of(group, summands[int(rng.integers(0, len(summands)))])
                padded, split, cert = move_service.split_row(current, s, {t: x})
                assert cert.start == padded and cert.end == split
                assert move_service.verify_certificate(cert).ok
                assert cert.u.is_upper_unitriangular()
                assert cert.v.is_upper_unitriangular()
                assert _is_upper(split)
                current = split


class TestPipeline:
    def test_normal_form(self):
        rng = random_gen.make_rng(404)
        for _ in range(200):
            group = random_gen.random_group(rng, ("z2", "s3"))
            n = int(rng.integers(1, 6))
            a = random_gen.random_matrix(rng, group, n, density=0.35, max_entry=1)
            result = pipeline_service.normal_form(a)
            if result.is_empty():
                continue
            m = result.matrix
            _, keep = nondegenerate_core(m.with_blocking(None))
            assert len(keep) == m.n
            assert coset_service.check_C1(m, result.cycles)
            assert coset_service.in_MoPCNH(m, result.cycles, result.structure)
            for cert in result.certificates():
                assert move_service.verify_certificate(cert).ok
            assert move_service.verify_script(result.script).ok
            problem = parse_text(emit(ProblemFile.from_script(a, result.script, m, result.cycles, result.structure)))
            items = move_service.script_from_record(a, problem.script.entries, problem.poset, problem.structure)
            assert move_service.verify_script(items).ok
            if items:
                reached = items[-1].after if isinstance(items[-1], ConjugacyStep) else items[-1].end
                assert reached == m

    def test_positivize(self):
        rng = random_gen.make_rng(505)
        for _ in range(100):
            group = random_gen.random_group(rng, ("z2", "z3", "s3"))
            count = int(rng.integers(1, 4))
            poset = random_gen.random_poset(rng, count)
            a = random_gen.random_blocked(rng, group, poset, [1] * count, density=0.3, max_entry=1)
            cycles = coset_service.cycle_components(a)
            h = pipeline_service.structure_for(a)
            result, cert = pipeline_service.positivize(a, cycles, h)
            assert coset_service.is_plusplus(_minus_identity(result), cycles, h)
            assert coset_service.check_C1(result, cycles)
            if not cert.is_empty():
                assert coset_service.check_C2(cert.start, cycles) is True
            report = move_service.verify_certificate(cert)
            assert report.ok and report.positive and report.blocked

    def test_factor_unipotent(self):
        rng = random_gen.make_rng(606)
        for _ in range(100):
            group = random_gen.random_group(rng, ("trivial", "z2", "z3"))
            count = int(rng.integers(1, 4))
            poset = random_gen.random_poset(rng, count)
            sizes = [int(rng.integers(1, 3)) for _ in range(count)]
            blocking = Blocking(poset, sizes)
            full = GSubset(group, list(group.elements()))
            cells = {(i, i): full for i in range(count)}
            cells.update({pair: full for pair in poset.pairs()})
            h = CosetStructure(group, poset, cells)

            def positive():
                return GroupRingElem(group, {g: int(rng.integers(1, 4)) for g in group.elements()})

            def optional():
                return GroupRingElem(group, {g: int(rng.integers(0, 3)) for g in group.elements()})

            n = blocking.n
            b_entries, u_entries, v_entries = {}, {}, {}
            for s in range(n):
                for t in range(n):
                    i, j = blocking.comp(s), blocking.comp(t)
                    if i == j:
                        b_entries[(s, t)] = positive()
                    elif blocking.allows(s, t):
                        b_entries[(s, t)] = positive()
                        u_entries[(s, t)] = optional()
                        v_entries[(s, t)] = optional()
            b = BlockedMatrix.from_entries(group, n, b_entries, blocking)
            identity = BlockedMatrix.identity(group, n, blocking)
            u = identity.with_entries(u_entries)
            v = identity.with_entries(v_entries)
            b_prime = u @ b @ v
            assert coset_service.is_plusplus(b, [], h)
            cert = pipeline_service.factor_unipotent(u, v, b, b_prime, [], h)
            report = move_service.verify_certificate(cert)
            assert report.ok and report.positive and report.blocked
            assert cert.start == b + identity
            assert cert.end == b_prime + identity
            for x in cert.intermediates():
                assert coset_service.is_plusplus(_minus_identity(x.with_blocking(blocking)), [], h)


class TestInvariants:
    def test_stabilizers_against_walks(self):
        rng = random_gen.make_rng(707)
        for _ in range(300):
            group = random_gen.random_group(rng, ("trivial", "z2", "z3", "z2xz2", "s3", "z2xz4"))
            n = int(rng.integers(1, 5))
            a = random_gen.random_irreducible(rng, group, n, density=0.3, max_entry=1)
            i = int(rng.integers(0, n))
            steps = 2 * n * group.order + 1
            walks = _walk_weights(a, i, steps)
            lengths = [k + 1 for k, w in enumerate(walks) if w]
            lifted = [k + 1 for k, w in enumerate(walks) if group.identity in w]
            base_period = reduce(gcd, lengths)
            p = reduce(gcd, lifted)
            everything = set().union(*walks)
            h0 = set().union(*(w for k, w in enumerate(walks) if (k + 1) % p == 0))
            h1 = set().union(*(w for k, w in enumerate(walks) if (k + 1) % p == base_period % p))
            report = invariant_service.stabilizer_data(a, i)
            assert report.period == p
            assert set(report.stabilizer) == everything
            assert set(report.primitive_stabilizer) == h0
            assert set(report.stabilizer_coset) == h1

    def test_det_tuple_under_moves(self):
        rng = random_gen.make_rng(808)
        for _ in range(20):
            group = random_gen.random_group(rng, ("z2", "z3", "z2xz2"))
            count = int(rng.integers(1, 4))
            poset = random_gen.random_poset(rng, count)
            sizes = [int(rng.integers(1, 3)) for _ in range(count)]
            a = random_gen.random_blocked(rng, group, poset, sizes, density=0.4, max_entry=2)
            blocking = a.blocking
            det = invariant_service.det_tuple(a)
            allowed = [(s, t) for s in range(a.n) for t in range(a.n) if s != t and blocking.allows(s, t)]
            if not allowed:
                continue
            current = a
            for _ in range(50):
                s, t = allowed[int(rng.integers(0, len(allowed)))]
                value = GroupRingElem.of(group, int(rng.integers(0, group.order)))
                if rng.random() < 0.5:
                    value = -value
                move = Move(
                    side="left" if rng.random() < 0.5 else "right",
                    direction="forward" if rng.random() < 0.5 else "backward",
                    s=s,
                    t=t,
                    value=value,
                    annotation="plumbing",
                )
                current = move.apply(current)
                assert invariant_service.det_tuple(current) == det

    def test_bounded_reduce(self):
        rng = random_gen.make_rng(909)
        group = random_gen.named_group("trivial")
        for _ in range(30):
            count = int(rng.integers(2, 4))
            loops = [int(rng.integers(2, 5)) for _ in range(count)]
            entries = {(k, k): GroupRingElem(group, {0: loops[k]}) for k in range(count)}
            for s in range(count):
                for t in range(s + 1, count):
                    low = 1 if t == s + 1 else 0
                    c = int(rng.integers(low, 10))
                    if c:
                        entries[(s, t)] = GroupRingElem(group, {0: c})
            a = BlockedMatrix.from_entries(group, count, entries, Blocking(Poset.chain(count), [1] * count))
            b, cert = invariant_service.bounded_reduce(a)
            for s in range(count):
                for t in range(s + 1, count):
                    assert 0 <= b[s, t].coeff(0) < loops[t] - 1
            assert move_service.verify_certificate(cert).ok
            assert invariant_service.det_tuple(b) == invariant_service.det_tuple(a)
