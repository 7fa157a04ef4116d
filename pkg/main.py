"""
Command-line entry point for the G-SFT toolkit.

Every subcommand reads a problem file, prints a report on stdout and, when it
transforms matrices, writes a problem file holding the result and its certificate
(to --out, or after the report).

Exit codes: 0 success, 1 negative mathematical answer, 2 usage or format error,
3 a bounded search ended without an answer.
"""
import argparse
import json
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.utils.logger import logger
from src.algebra.graph import is_irreducible
from src.algebra.matrix import BlockedMatrix
from src.config.settings import random_settings, search_settings
from src.exceptions import FormatError, GSFTError, GroupMismatch, NotBlocked, SizeMismatch, ValidationError
from src.formats.text_format import emit, parse_file, parse_sum, write_file
from src.models.certificate import Certificate, ConjugacyStep
from src.models.problem import ProblemFile
from src.models.reports import CounterWitness, Unresolved
from src.services.coset_service import coset_service
from src.services.invariant_service import invariant_service
from src.services.move_service import as_element, move_service
from src.services.pipeline_service import pipeline_service
from src.services.search_service import search_service
from src.utils import random_gen

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_UNRESOLVED = 3

USAGE_ERRORS = (FormatError, NotBlocked, SizeMismatch, GroupMismatch)


def _header(title: str) -> None:
    print("=" * 50)
    print(title)
    print("=" * 50)


def _deliver(problem: ProblemFile, out: Optional[str]) -> None:
    if out:
        write_file(problem, out)
        print(f"Wrote {out}")
    else:
        print()
        print(emit(problem), end="")


def _certificate_lines(cert: Certificate) -> None:
    report = move_service.verify_certificate(cert)
    print(f"Moves: {len(cert.moves)}")
    print(f"Size: {cert.start.n} -> {cert.end.n}")
    print(f"Certificate: {report.summary()}")


def _elements(problem: ProblemFile, text: str) -> List[int]:
    return [as_element(problem.group, x.strip()) for x in text.split(",") if x.strip()]


def _row_spec(problem: ProblemFile, text: str) -> Dict[int, object]:
    """'t=sum; t=sum' -> {t: GroupRingElem}."""
    out = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        if "=" not in part:
            raise ValidationError(f"Expected 'index=sum', got '{part.strip()}'")
        key, value = part.split("=", 1)
        out[int(key)] = parse_sum(problem.group, value)
    return out


# subcommands

def cmd_validate(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    _header("VALIDATION REPORT")
    print(f"Group: {problem.group.label} (order {problem.group.order})")
    if problem.poset is not None:
        print(f"Poset: {problem.poset.size} components, relations {problem.poset.covering_pairs()}")
    for name, m in problem.matrices.items():
        blocks = list(m.blocking.sizes) if m.blocking is not None else "unblocked"
        print(f"Matrix {name}: {m.n}x{m.n}, blocks {blocks}, nonnegative {m.is_nonneg()}")
    if problem.structure is not None:
        print("Coset structure: " + "; ".join(problem.structure.describe()))
    if problem.certificate is not None:
        print(f"Certificate: {len(problem.certificate.moves)} moves from {problem.certificate.start}")
    if problem.script is not None:
        print(f"Script: {len(problem.script.entries)} entries from {problem.script.start}")
    print("valid")
    return EXIT_OK


def cmd_normalize(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    a = problem.matrix(args.matrix)
    result = pipeline_service.normal_form(a)
    report = move_service.verify_script(result.script)
    _header("NORMAL FORM")
    print(f"Size: {a.n} -> {result.matrix.n}")
    if result.is_empty():
        print("Empty nondegenerate core")
        return EXIT_OK
    print(f"Blocks: {list(result.matrix.blocking.sizes)}")
    print(f"Cycles: {result.cycles}")
    print(f"Script: {len(result.script)} items, {result.positive_move_count()} positive moves")
    print(f"Verification: {report.summary()}")
    output = ProblemFile.from_script(
        a.with_blocking(None), result.script, result.matrix, result.cycles, result.structure, end_name="normal"
    )
    _deliver(output, args.out)
    return EXIT_OK if report.ok else EXIT_NEGATIVE


def cmd_positivize(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    a = problem.matrix(args.matrix)
    result, cert = pipeline_service.positivize(a, problem.cycles, problem.structure, force=args.force)
    _header("POSITIVIZATION")
    print(f"Blocks: {list(a.require_blocking().sizes)} -> {list(result.blocking.sizes)}")
    _certificate_lines(cert)
    cycles = problem.cycles if problem.cycles is not None else coset_service.cycle_components(a)
    _deliver(ProblemFile.from_certificate(cert, cycles, {"positive": result}), args.out)
    return EXIT_OK


def cmd_coset(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    a = problem.matrix(args.matrix)
    _header("COSET STRUCTURE")
    h = coset_service.coset_structure_of(a)
    for line in h.describe():
        print(line)
    if args.all:
        print()
        for choice, other in coset_service.all_vertex_choices(a):
            print(f"vertex choice {choice}: " + "; ".join(other.describe()))
    if args.compare:
        other = coset_service.coset_structure_of(problem.matrix(args.compare))
        gamma = coset_service.cohomologous(h, other)
        if gamma is None:
            print(f"Not cohomologous to the structure of {args.compare}")
            return EXIT_NEGATIVE
        print("gamma = (" + ", ".join(problem.group.name(g) for g in gamma) + ")")
    return EXIT_OK


def _invariants_data(a: BlockedMatrix, index: int) -> Dict[str, object]:
    data: Dict[str, object] = {}
    if a.is_nonneg():
        census = invariant_service.orbit_census(a)
        data["census"] = {
            "components": census.components,
            "periods": census.periods,
            "finite": census.finite,
            "orbits": census.orbits,
            "lifted_orbits": census.lifted_orbits,
            "connections": census.connections,
        }
        if a.n and is_irreducible(a):
            report = invariant_service.stabilizer_data(a, index)
            data["stabilizer"] = {
                "index": index,
                "period": report.period,
                "H": report.stabilizer.names(),
                "H0": report.primitive_stabilizer.names(),
                "H1": report.stabilizer_coset.names(),
            }
    if a.blocking is not None and a.group.is_abelian():
        data["det"] = invariant_service.det_tuple(a).describe()
    return data


def cmd_invariants(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    data = _invariants_data(problem.matrix(args.matrix), args.index)
    if args.json:
        print(json.dumps(data, sort_keys=True, indent=2))
        return EXIT_OK
    _header("INVARIANTS")
    census = data.get("census")
    if census:
        print(f"Periodic components: {census['components']} (periods {census['periods']})")
        print(f"Orbits: {census['orbits'] if census['finite'] else 'infinite'}")
        if census["finite"]:
            print(f"Lifted orbits: {census['lifted_orbits']}")
    stabilizer = data.get("stabilizer")
    if stabilizer:
        print(f"Period: {stabilizer['period']}")
        print("H  = {" + ", ".join(stabilizer["H"]) + "}")
        print("H0 = {" + ", ".join(stabilizer["H0"]) + "}")
        print("H1 = {" + ", ".join(stabilizer["H1"]) + "}")
    if "det" in data:
        print("det = (" + ", ".join(data["det"]) + ")")
    return EXIT_OK


def cmd_cut(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    a = problem.matrix(args.matrix)
    g = as_element(problem.group, args.element)
    op = move_service.row_cut if args.side == "row" else move_service.col_cut
    b, move = op(a, args.s, args.t, g, problem.structure)
    cert = Certificate.from_moves(a, [move], blocked=a.blocking is not None, structure=problem.structure)
    _header("CUT")
    print(move.describe())
    _certificate_lines(cert)
    _deliver(ProblemFile.from_certificate(cert, problem.cycles), args.out)
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    a = problem.matrix(args.matrix)
    part = _row_spec(problem, args.part)
    if args.column:
        _, _, cert = move_service.split_column(a, args.index, part)
    else:
        _, _, cert = move_service.split_row(a, args.index, part, problem.structure)
    _header("SPLIT")
    _certificate_lines(cert)
    _deliver(ProblemFile.from_certificate(cert, problem.cycles), args.out)
    return EXIT_OK


def cmd_eliminate(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    _, cert = move_service.eliminate_state(problem.matrix(args.matrix), args.index, problem.structure)
    _header("ELIMINATION")
    _certificate_lines(cert)
    _deliver(ProblemFile.from_certificate(cert, problem.cycles), args.out)
    return EXIT_OK


def cmd_perm(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    order = [int(x) for x in args.order.split(",")]
    _, _, cert = move_service.perm_sim_script(problem.matrix(args.matrix), order, problem.structure)
    _header("PERMUTATION SCRIPT")
    _certificate_lines(cert)
    _deliver(ProblemFile.from_certificate(cert, problem.cycles), args.out)
    return EXIT_OK


def cmd_diag(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    entries = _elements(problem, args.entries)
    _, _, cert = move_service.diag_conj_script(problem.matrix(args.matrix), entries, problem.structure)
    _header("DIAGONAL SCRIPT")
    _certificate_lines(cert)
    _deliver(ProblemFile.from_certificate(cert, problem.cycles), args.out)
    return EXIT_OK


def _verify_script(problem: ProblemFile) -> bool:
    record = problem.script
    start = problem.matrix(record.start)
    try:
        items = move_service.script_from_record(start, record.entries, problem.poset, problem.structure)
    except GSFTError as e:
        print(f"Script FAILED: {e}")
        return False
    report = move_service.verify_script(items)
    print(f"Script: {len(items)} items, {report.summary()}")
    reached = start
    if items:
        last = items[-1]
        reached = last.after if isinstance(last, ConjugacyStep) else last.end
    if record.end is not None and problem.matrix(record.end) != reached:
        print("The replayed script does not reach the claimed end matrix")
        return False
    return report.ok


def cmd_verify(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    if problem.certificate is None and problem.script is None:
        raise ValidationError("The file has neither a certificate nor a script section")
    _header("VERIFICATION")
    ok = True
    if problem.certificate is not None:
        cert = problem.certificate_object()
        report = move_service.verify_certificate(cert)
        claimed = problem.claimed_end()
        print(report.summary())
        if claimed is not None and claimed != cert.end:
            print("The replayed moves do not reach the claimed end matrix")
            ok = False
        ok = ok and report.ok
    if problem.script is not None:
        ok = _verify_script(problem) and ok
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_search_equiv(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    names = problem.matrix_names()
    left = problem.matrix(args.left or names[0])
    right = problem.matrix(args.right or (names[1] if len(names) > 1 else names[0]))
    outcome = search_service.equiv_oracle(left, right, problem.structure, args.depth, args.entry_cap, args.seconds)
    _header("EQUIVALENCE SEARCH")
    if isinstance(outcome, Unresolved):
        print(f"Unresolved: {outcome.reason} ({outcome.explored} matrices explored)")
        return EXIT_UNRESOLVED
    if isinstance(outcome, CounterWitness):
        print(f"Not equivalent: {outcome.invariant} differs")
        print(f"  left:  {outcome.left}")
        print(f"  right: {outcome.right}")
        return EXIT_NEGATIVE
    _certificate_lines(outcome)
    _deliver(ProblemFile.from_certificate(outcome, problem.cycles), args.out)
    return EXIT_OK


def cmd_realize(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    if problem.cycles is None or problem.structure is None:
        raise ValidationError("realize needs 'cycles' in [poset] and a [coset] section")
    b = problem.matrix(args.matrix)
    if args.check:
        ok = invariant_service.realizable_check(b, problem.cycles, problem.structure)
        _header("REALIZABILITY")
        print("realizable" if ok else "not realizable")
        return EXIT_OK if ok else EXIT_NEGATIVE
    a, cert = invariant_service.realize(b, problem.cycles, problem.structure)
    _header("REALIZATION")
    print(f"Blocks: {list(b.require_blocking().sizes)} -> {list(a.blocking.sizes)}")
    _certificate_lines(cert)
    _deliver(ProblemFile.from_certificate(cert, problem.cycles), args.out)
    return EXIT_OK


def cmd_reduce(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    _, cert = invariant_service.bounded_reduce(problem.matrix(args.matrix), problem.structure)
    _header("BOUNDED REDUCTION")
    _certificate_lines(cert)
    _deliver(ProblemFile.from_certificate(cert, problem.cycles), args.out)
    return EXIT_OK


def cmd_census(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    _header("ORBIT CENSUS")
    for name, m in problem.matrices.items():
        report = invariant_service.orbit_census(m)
        print(f"{name}: {report.describe()}")
    return EXIT_OK


def cmd_random(args: argparse.Namespace) -> int:
    rng = random_gen.make_rng(args.seed)
    group = random_gen.named_group(args.group)
    if args.blocks:
        sizes = [int(x) for x in args.blocks.split(",")]
        poset = random_gen.random_poset(rng, len(sizes))
        a = random_gen.random_blocked(rng, group, poset, sizes, args.density, args.max_entry)
    else:
        a = random_gen.random_matrix(rng, group, args.size, args.density, args.max_entry)
    _deliver(ProblemFile.from_matrices({"A": a}), args.out)
    return EXIT_OK


def cmd_factor(args: argparse.Namespace) -> int:
    problem = parse_file(args.file)
    u, v = problem.matrix(args.u), problem.matrix(args.v)
    a, a_prime = problem.matrix(args.left), problem.matrix(args.right)
    outcome = pipeline_service.factor_general(
        u, v, a, a_prime, problem.cycles, problem.structure, args.depth, args.entry_cap, args.seconds
    )
    _header("FACTORIZATION")
    if isinstance(outcome, Unresolved):
        print(f"Unresolved: {outcome.reason}")
        return EXIT_UNRESOLVED
    _certificate_lines(outcome)
    _deliver(ProblemFile.from_certificate(outcome, problem.cycles), args.out)
    return EXIT_OK


def _budget_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--depth", type=int, default=search_settings.depth, help="search depth")
    parser.add_argument("--entry-cap", type=int, default=search_settings.entry_cap,
                        help="cap on the augmentation sum of visited matrices")
    parser.add_argument("--seconds", type=float, default=search_settings.seconds, help="time budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gsft", description="Exact computations with G-SFTs over Z+G.")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler: Callable[[argparse.Namespace], int], help_text: str,
                needs_file: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if needs_file:
            p.add_argument("file", help="problem file")
            p.add_argument("--matrix", help="matrix section to use (default: the first)")
        p.add_argument("--out", help="write the resulting problem file here")
        p.set_defaults(handler=handler)
        return p

    command("validate", cmd_validate, "parse and check a problem file")
    command("normalize", cmd_normalize, "normal form with its conjugacy script")
    p = command("positivize", cmd_positivize, "move a blocked matrix into M++")
    p.add_argument("--force", action="store_true", help="run the sweep even on M++ inputs")
    p = command("coset", cmd_coset, "coset structure and cohomology test")
    p.add_argument("--all", action="store_true", help="list the structure of every vertex choice")
    p.add_argument("--compare", help="matrix whose structure is compared")
    p = command("invariants", cmd_invariants, "orbit census, stabilizers and determinants")
    p.add_argument("--index", type=int, default=0, help="index for the stabilizer data")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p = command("cut", cmd_cut, "one row or column cut")
    p.add_argument("--side", choices=("row", "col"), required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--element", required=True, help="group element g of the cut")
    p = command("split", cmd_split, "split a row (or a column) into two")
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--part", required=True, help="second row as 't=sum; t=sum'")
    p.add_argument("--column", action="store_true")
    p = command("eliminate", cmd_eliminate, "eliminate an index without a loop")
    p.add_argument("--index", type=int, required=True)
    p = command("perm", cmd_perm, "positive script for a permutation similarity")
    p.add_argument("--order", required=True, help="comma-separated permutation")
    p = command("diag", cmd_diag, "positive script for a diagonal conjugacy")
    p.add_argument("--entries", required=True, help="comma-separated element names")
    command("verify", cmd_verify, "replay and check a certificate")
    p = command("search-equiv", cmd_search_equiv, "bounded equivalence search")
    p.add_argument("--left")
    p.add_argument("--right")
    _budget_flags(p)
    p = command("realize", cmd_realize, "realize a class inside M++")
    p.add_argument("--check", action="store_true", help="only test realizability")
    command("reduce", cmd_reduce, "bounded reduction of off-diagonal coefficients")
    command("census", cmd_census, "orbit census of every matrix in the file")
    p = command("random", cmd_random, "seeded random instance", needs_file=False)
    p.add_argument("--seed", type=int, default=random_settings.seed)
    p.add_argument("--group", default="z2", choices=sorted(random_gen.GROUPS))
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--blocks", help="comma-separated block sizes; draws a random poset")
    p.add_argument("--density", type=float, default=random_settings.density)
    p.add_argument("--max-entry", type=int, default=random_settings.max_entry)
    p = command("factor", cmd_factor, "positive factorization of U (I - A) V = I - A'")
    p.add_argument("--u", required=True)
    p.add_argument("--v", required=True)
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    _budget_flags(p)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.handler(args)
    except USAGE_ERRORS as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except GSFTError as e:
        logger.error(f"{args.command}: {type(e).__name__}: {e}")
        print(f"{type(e).__name__}: {e}")
        return EXIT_NEGATIVE
    except (KeyError, ValueError) as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
