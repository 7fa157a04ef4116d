"""
Search service: bounded equivalence oracle and the classification condition search.
"""
from itertools import permutations
from typing import List, Optional, Sequence

from loguru import logger

from src.algebra.coset import CosetStructure
from src.algebra.graph import is_in_Mo
from src.algebra.matrix import Blocking, BlockedMatrix, stabilize0
from src.config.settings import search_settings
from src.exceptions import GSFTError, NotNormalForm
from src.models.certificate import Certificate
from src.models.reports import ConditionSearchResult, CounterWitness, OracleOutcome, Unresolved
from src.services.coset_service import coset_service
from src.services.invariant_service import invariant_service
from src.services.move_service import diagonal_conjugate, move_service
from src.services.pipeline_service import pipeline_service


class SearchService:
    """Service class for bounded equivalence searches between matrices."""

    def separating_invariant(self, l: BlockedMatrix, m: BlockedMatrix) -> Optional[CounterWitness]:
        """First computed invariant that differs between L and M."""
        if l.is_nonneg() and m.is_nonneg():
            left, right = invariant_service.orbit_census(l), invariant_service.orbit_census(m)
            if left.finite and right.finite and left.orbits != right.orbits:
                return CounterWitness(invariant="orbit census", left=left.describe(), right=right.describe())
        if l.group.is_abelian() and l.blocking is not None and m.blocking is not None:
            if l.blocking.poset == m.blocking.poset:
                left_det, right_det = invariant_service.det_tuple(l), invariant_service.det_tuple(m)
                if left_det.entries != right_det.entries:
                    return CounterWitness(
                        invariant="det",
                        left=", ".join(left_det.describe()),
                        right=", ".join(right_det.describe()),
                    )
        if l.blocking is not None and m.blocking is not None and l.is_nonneg() and m.is_nonneg():
            try:
                h_l = coset_service.coset_structure_of(l)
                h_m = coset_service.coset_structure_of(m)
            except GSFTError:
                return None
            if coset_service.cohomologous(h_l, h_m) is None:
                return CounterWitness(
                    invariant="coset class", left="; ".join(h_l.describe()), right="; ".join(h_m.describe())
                )
        return None

    def equiv_oracle(
        self,
        l: BlockedMatrix,
        m: BlockedMatrix,
        structure: Optional[CosetStructure] = None,
        depth: Optional[int] = None,
        entry_cap: Optional[int] = None,
        seconds: Optional[float] = None,
    ) -> OracleOutcome:
        """Certificate, separating invariant, or Unresolved when the budgets run out."""
        try:
            if l.n != m.n:
                return Unresolved(reason=f"sizes {l.n} and {m.n} differ; stabilize first")
            if l == m:
                return Certificate.empty(l, blocked=l.blocking is not None, structure=structure)
            witness = self.separating_invariant(l, m)
            if witness is not None:
                logger.info(f"Oracle: {witness.invariant} separates the matrices")
                return witness
            cert, explored = move_service.bounded_path(
                l,
                m,
                depth if depth is not None else search_settings.depth,
                entry_cap if entry_cap is not None else search_settings.entry_cap,
                seconds if seconds is not None else search_settings.seconds,
                structure,
            )
            if cert is None:
                return Unresolved(reason="bounded move search exhausted its budget", explored=explored)
            report = move_service.verify_certificate(cert)
            if not report.ok:
                logger.error(f"Oracle certificate failed its replay: {report.reason}")
                return Unresolved(reason=f"certificate failed replay: {report.reason}", explored=explored)
            return cert
        except Exception as e:
            logger.error(f"Failed to run equivalence oracle: {e}")
            raise

    def poset_isomorphisms(
        self, a: BlockedMatrix, b: BlockedMatrix, cycles_a: Sequence[int], cycles_b: Sequence[int]
    ) -> List[List[int]]:
        """Bijections alpha with i <= j iff alpha(i) <= alpha(j) and alpha(C) = C'."""
        p, q = a.require_blocking().poset, b.require_blocking().poset
        if p.size != q.size:
            return []
        chosen, other = set(cycles_a), set(cycles_b)
        found = []
        for alpha in permutations(range(p.size)):
            if {alpha[i] for i in chosen} != other:
                continue
            if all(p.leq(i, j) == q.leq(alpha[i], alpha[j]) for i in range(p.size) for j in range(p.size)):
                found.append(list(alpha))
        return found

    def conjugated_copy(self, a: BlockedMatrix, b: BlockedMatrix, alpha: Sequence[int], gamma: Sequence[int]) -> BlockedMatrix:
        """C = D_gamma^-1 Q_alpha^-1 B Q_alpha D_gamma, blocked over the poset of A."""
        blocking = b.require_blocking()
        order = [s for i in range(len(alpha)) for s in blocking.indices(alpha[i])]
        sizes = [blocking.sizes[alpha[i]] for i in range(len(alpha))]
        moved = b.permuted(order, Blocking(a.require_blocking().poset, sizes))
        entries = [gamma[moved.comp(s)] for s in range(moved.n)]
        return diagonal_conjugate(moved, entries)

    def classification_condition_search(
        self,
        a: BlockedMatrix,
        b: BlockedMatrix,
        depth: Optional[int] = None,
        entry_cap: Optional[int] = None,
        seconds: Optional[float] = None,
    ) -> Optional[ConditionSearchResult]:
        """Poset isomorphism and conjugating vector relating A and B, with the oracle outcome.

        Invariants are compared first; inputs that fail C1 get an Unresolved outcome.
        """
        try:
            for name, x in (("A", a), ("B", b)):
                if x.blocking is None:
                    raise NotNormalForm(f"{name} carries no blocking")
                if not x.is_nonneg() or not is_in_Mo(x):
                    raise NotNormalForm(f"{name} is not in its M-zero set")
            cycles_a = coset_service.cycle_components(a)
            cycles_b = coset_service.cycle_components(b)
            h_a = pipeline_service.structure_for(a)
            h_b = pipeline_service.structure_for(b)
            results: List[ConditionSearchResult] = []
            for alpha in self.poset_isomorphisms(a, b, cycles_a, cycles_b):
                gamma = coset_service.cohomologous(h_a, h_b, alpha)
                if gamma is None:
                    continue
                c = self.conjugated_copy(a, b, alpha, gamma)
                outcome = self._compare(a, c, cycles_a, h_a, depth, entry_cap, seconds)
                result = ConditionSearchResult(alpha=alpha, gamma=gamma, conjugated=c, outcome=outcome)
                if isinstance(outcome, Certificate):
                    logger.info(f"Condition search: alpha {alpha}, gamma {gamma}, certificate found")
                    return result
                results.append(result)
            if not results:
                logger.info("Condition search: no poset isomorphism with a conjugating vector")
                return None
            unresolved = [r for r in results if isinstance(r.outcome, Unresolved)]
            return unresolved[0] if unresolved else results[0]
        except Exception as e:
            logger.error(f"Failed to search classification conditions: {e}")
            raise

    def _compare(
        self,
        a: BlockedMatrix,
        c: BlockedMatrix,
        cycles: Sequence[int],
        h: CosetStructure,
        depth: Optional[int],
        entry_cap: Optional[int],
        seconds: Optional[float],
    ) -> OracleOutcome:
        witness = self.separating_invariant(a, c)
        if witness is not None:
            return witness
        for name, x in (("A", a), ("C", c)):
            if not coset_service.check_C1(x, cycles):
                return Unresolved(reason=f"{name} violates C1; the oracle needs C1 inputs")
        sizes = [max(p, q) for p, q in zip(a.blocking.sizes, c.blocking.sizes)]
        left = stabilize0(a, sizes) if list(a.blocking.sizes) != sizes else a
        right = stabilize0(c, sizes) if list(c.blocking.sizes) != sizes else c
        return self.equiv_oracle(left, right, h, depth, entry_cap, seconds)


# Global search service instance
search_service = SearchService()
