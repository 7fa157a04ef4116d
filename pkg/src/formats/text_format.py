"""
Sectioned plain-text format for groups, posets, matrices, coset structures,
certificates and conjugacy scripts.

    [group]
    kind = cyclic
    order = 2

    [poset]
    size = 2
    relations = 0<1
    cycles = 0 1

    [matrix A]
    size = 2
    blocks = 1 1
    0,0 = "g"
    0,1 = "2*e - g"

Entries are written row-major, zero entries omitted; element names follow group order.
A [script] section lists steps in order and is replayed from its start matrix:

    [script]
    start = start
    end = normal
    restrict = 0 2
    out_split = 1 | 0 "g" | 1 "e"
    blocks = 1 2
    certificate = positive blocked
    move = left forward 0 1 cut "g"
"""
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from loguru import logger

from src.algebra.coset import CosetStructure
from src.algebra.group import FiniteGroup, GSubset
from src.algebra.matrix import Blocking, BlockedMatrix, Poset
from src.algebra.ring import GroupRingElem
from src.exceptions import GSFTError, ParseError, ValidationError
from src.models.certificate import Move
from src.models.problem import CertificateRecord, ProblemFile, ScriptEntry, ScriptRecord

SECTION = re.compile(r"^\[(?P<kind>group|poset|matrix|coset|certificate|script)(?:\s+(?P<name>[A-Za-z_]\w*))?\]$")
ASSIGN = re.compile(r"^(?P<key>[A-Za-z_]\w*|\d+\s*,\s*\d+)\s*=\s*(?P<value>.*)$")
TERM = re.compile(r"\s*(?P<sign>[+-])?\s*(?:(?P<coef>\d+)\s*\*\s*)?(?P<name>[A-Za-z_]\w*|\d+)\s*")
RELATION = re.compile(r"^(\d+)<(\d+)$")
MOVE = re.compile(
    r'^(?P<side>left|right)\s+(?P<direction>forward|backward)\s+(?P<s>\d+)\s+(?P<t>\d+)'
    r'\s+(?P<annotation>cut|plumbing)\s+"(?P<value>[^"]*)"$'
)
CELL = re.compile(r'^\s*\d+\s+"[^"]*"\s*(?:,\s*\d+\s+"[^"]*"\s*)*$')
CELL_ENTRY = re.compile(r'(?P<t>\d+)\s+"(?P<value>[^"]*)"')
CERT_FLAGS = ("positive", "blocked", "coset")


class _Line:
    __slots__ = ("number", "text", "offset")

    def __init__(self, number: int, text: str, offset: int):
        self.number = number
        self.text = text
        self.offset = offset

    def error(self, message: str, column: int = 0) -> ParseError:
        return ParseError(message, self.number, self.offset + column + 1)


def _strip_comment(text: str) -> str:
    quoted = False
    for k, ch in enumerate(text):
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return text[:k]
    return text


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] == '"':
        return value[1:-1]
    return value


def parse_sum(group: FiniteGroup, text: str, line: Optional[_Line] = None, column: int = 0) -> GroupRingElem:
    """Formal sum 'term ((+|-) term)*' with term = [int '*'] name; a bare integer n means n*e."""
    where = line or _Line(0, text, 0)
    body = text.strip()
    if body == "":
        raise where.error("Empty formal sum", column)
    coeffs: Dict[int, int] = {}
    pos = 0
    first = True
    while pos < len(text):
        if not text[pos:].strip():
            break
        match = TERM.match(text, pos)
        if not match or match.end() == pos:
            raise where.error(f"Cannot read a term in '{text.strip()}'", column + pos)
        sign = match.group("sign")
        if sign is None and not first:
            raise where.error("Terms must be joined by '+' or '-'", column + match.start("name"))
        name = match.group("name")
        if name.isdigit():
            if match.group("coef") is not None:
                raise where.error("Coefficients multiply element names", column + match.start("name"))
            g, k = group.identity, int(name)
        else:
            if name not in group.names:
                raise where.error(f"Unknown element '{name}'", column + match.start("name"))
            g = group.index(name)
            k = int(match.group("coef")) if match.group("coef") is not None else 1
        if sign == "-":
            k = -k
        coeffs[g] = coeffs.get(g, 0) + k
        first = False
        pos = match.end()
    return GroupRingElem(group, coeffs)


def _names(group: FiniteGroup, line: _Line, value: str, column: int) -> List[int]:
    out = []
    for match in re.finditer(r"\S+", value):
        name = match.group(0)
        if name not in group.names:
            raise line.error(f"Unknown element '{name}'", column + match.start())
        out.append(group.index(name))
    return out


def _ints(line: _Line, value: str, column: int) -> List[int]:
    out = []
    for match in re.finditer(r"\S+", value):
        if not match.group(0).isdigit():
            raise line.error(f"Expected a nonnegative integer, got '{match.group(0)}'", column + match.start())
        out.append(int(match.group(0)))
    return out


def _one_int(found: Tuple[str, _Line, int]) -> int:
    value, line, col = found
    numbers = _ints(line, value, col)
    if len(numbers) != 1:
        raise line.error("Expected exactly one integer", col)
    return numbers[0]


def _pair(line: _Line, key: str) -> Tuple[int, int]:
    s, t = (int(x) for x in key.split(","))
    return s, t


class _Section:
    def __init__(self, kind: str, name: Optional[str], header: _Line):
        self.kind = kind
        self.name = name
        self.header = header
        self.items: List[Tuple[str, str, _Line, int]] = []

    def single(self, key: str, required: bool = True) -> Optional[Tuple[str, _Line, int]]:
        found = [(v, line, col) for k, v, line, col in self.items if k == key]
        if len(found) > 1:
            raise found[1][1].error(f"Key '{key}' repeated in [{self.kind}]")
        if not found:
            if required:
                raise self.header.error(f"Section [{self.kind}] needs '{key}'")
            return None
        return found[0]


def _split_sections(text: str) -> List[_Section]:
    sections: List[_Section] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        body = _strip_comment(raw).rstrip()
        stripped = body.strip()
        if not stripped:
            continue
        offset = len(body) - len(body.lstrip())
        line = _Line(number, stripped, offset)
        if stripped.startswith("["):
            match = SECTION.match(stripped)
            if not match:
                raise line.error(f"Unknown section header '{stripped}'")
            kind, name = match.group("kind"), match.group("name")
            if (kind == "matrix") != (name is not None):
                raise line.error("Matrix sections and only they carry a name")
            sections.append(_Section(kind, name, line))
            continue
        if not sections:
            raise line.error("Content before the first section")
        match = ASSIGN.match(stripped)
        if not match:
            raise line.error("Expected 'key = value'")
        key = re.sub(r"\s+", "", match.group("key"))
        sections[-1].items.append((key, match.group("value").strip(), line, match.start("value")))
    return sections


def _parse_group(section: _Section) -> FiniteGroup:
    kind, line, col = section.single("kind")
    try:
        if kind == "cyclic":
            return FiniteGroup.cyclic(_one_int(section.single("order")))
        if kind == "symmetric":
            return FiniteGroup.symmetric(_one_int(section.single("degree")))
        if kind == "table":
            value, line, col = section.single("elements")
            names = value.split()
            position = {name: k for k, name in enumerate(names)}
            table = []
            for key, value, row_line, row_col in section.items:
                if key != "row":
                    continue
                row = []
                for match in re.finditer(r"\S+", value):
                    if match.group(0) not in position:
                        raise row_line.error(f"Unknown element '{match.group(0)}'", row_col + match.start())
                    row.append(position[match.group(0)])
                table.append(row)
            return FiniteGroup(names, table)
    except GSFTError as e:
        if isinstance(e, ParseError):
            raise
        raise ValidationError(f"[group]: {e}") from e
    raise line.error(f"Unknown group kind '{kind}'", col)


def _parse_poset(section: _Section) -> Tuple[Poset, Optional[List[int]]]:
    size = _one_int(section.single("size"))
    relations = []
    found = section.single("relations", required=False)
    if found is not None:
        value, line, col = found
        for match in re.finditer(r"\S+", value):
            rel = RELATION.match(match.group(0))
            if not rel:
                raise line.error(f"Expected 'i<j', got '{match.group(0)}'", col + match.start())
            relations.append((int(rel.group(1)), int(rel.group(2))))
    try:
        poset = Poset(size, relations)
    except GSFTError as e:
        raise ValidationError(f"[poset]: {e}") from e
    cycles = None
    found = section.single("cycles", required=False)
    if found is not None:
        cycles = _ints(found[1], found[0], found[2])
    return poset, cycles


def _parse_matrix(section: _Section, group: FiniteGroup, poset: Optional[Poset]) -> BlockedMatrix:
    n = _one_int(section.single("size"))
    blocking = None
    found = section.single("blocks", required=False)
    if found is not None:
        if poset is None:
            raise ValidationError(f"[matrix {section.name}]: blocks need a poset section")
        sizes = _ints(found[1], found[0], found[2])
        try:
            blocking = Blocking(poset, sizes)
        except GSFTError as e:
            raise ValidationError(f"[matrix {section.name}]: {e}") from e
        if blocking.n != n:
            raise ValidationError(f"[matrix {section.name}]: blocks sum to {blocking.n}, size is {n}")
    entries: Dict[Tuple[int, int], GroupRingElem] = {}
    for key, value, entry_line, entry_col in section.items:
        if key in ("size", "blocks"):
            continue
        if "," not in key:
            raise entry_line.error(f"Unknown key '{key}' in [matrix {section.name}]")
        s, t = _pair(entry_line, key)
        if not (s < n and t < n):
            raise entry_line.error(f"Position ({s},{t}) outside a {n}x{n} matrix")
        if (s, t) in entries:
            raise entry_line.error(f"Entry ({s},{t}) given twice")
        body = _unquote(value)
        shift = entry_col + (1 if body != value else 0)
        entries[(s, t)] = parse_sum(group, body, entry_line, shift)
    return BlockedMatrix.from_entries(group, n, entries, blocking)


def _parse_coset(section: _Section, group: FiniteGroup, poset: Optional[Poset]) -> CosetStructure:
    if poset is None:
        raise ValidationError("[coset] needs a poset section")
    sets = {}
    for key, value, line, col in section.items:
        if "," not in key:
            raise line.error(f"Unknown key '{key}' in [coset]")
        sets[_pair(line, key)] = GSubset(group, _names(group, line, value, col))
    try:
        return CosetStructure(group, poset, sets)
    except GSFTError as e:
        raise ValidationError(f"[coset]: {e}") from e


def _parse_certificate(section: _Section, group: FiniteGroup) -> CertificateRecord:
    start = section.single("start")[0]
    end = section.single("end", required=False)
    flags = {}
    for key in ("positive", "blocked"):
        found = section.single(key, required=False)
        if found is None:
            continue
        if found[0] not in ("true", "false"):
            raise found[1].error(f"'{key}' must be true or false", found[2])
        flags[key] = found[0] == "true"
    moves = [_parse_move(group, value, line, col) for key, value, line, col in section.items if key == "move"]
    return CertificateRecord(start=start, end=end[0] if end else None, moves=moves, **flags)


def _parse_move(group: FiniteGroup, value: str, line: _Line, col: int) -> Move:
    match = MOVE.match(value)
    if not match:
        raise line.error("Expected 'left|right forward|backward s t cut|plumbing \"value\"'", col)
    x = parse_sum(group, match.group("value"), line, col + match.start("value"))
    try:
        return Move(
            side=match.group("side"),
            direction=match.group("direction"),
            s=int(match.group("s")),
            t=int(match.group("t")),
            value=x,
            annotation=match.group("annotation"),
        )
    except ValueError as e:
        raise line.error(f"Bad move: {e}", col) from e


def _parse_out_split(group: FiniteGroup, value: str, line: _Line, col: int) -> Dict[str, Any]:
    """'s | t "sum", t "sum" | ...' -> {"state": s, "cells": [{t: coeffs}]}."""
    parts = value.split("|")
    state = _ints(line, parts[0], col)
    if len(state) != 1 or len(parts) < 2:
        raise line.error("Expected 'state | cell | cell ...'", col)
    cells = []
    offset = len(parts[0]) + 1
    for part in parts[1:]:
        if not CELL.match(part):
            raise line.error("Expected a cell 't \"sum\", t \"sum\"'", col + offset)
        cell: Dict[int, Dict[int, int]] = {}
        for match in CELL_ENTRY.finditer(part):
            x = parse_sum(group, match.group("value"), line, col + offset + match.start("value"))
            cell[int(match.group("t"))] = x.coeffs
        cells.append(cell)
        offset += len(part) + 1
    return {"state": state[0], "cells": cells}


def _parse_script(section: _Section, group: FiniteGroup) -> ScriptRecord:
    start = section.single("start")[0]
    end = section.single("end", required=False)
    # certificate entries collect the move lines that follow them
    pending: List[Dict[str, Any]] = []
    for key, value, line, col in section.items:
        if key in ("start", "end"):
            continue
        if key == "move":
            if not pending or pending[-1]["kind"] != "certificate":
                raise line.error("A move line must follow a 'certificate' line", col)
            pending[-1]["moves"].append(_parse_move(group, value, line, col))
        elif key == "certificate":
            words = value.split()
            unknown = [w for w in words if w not in CERT_FLAGS and w != "none"]
            if unknown:
                raise line.error(f"Unknown certificate flag '{unknown[0]}'", col)
            entry: Dict[str, Any] = {flag: flag in words for flag in CERT_FLAGS}
            entry.update(kind="certificate", moves=[])
            pending.append(entry)
        elif key == "blocks":
            sizes = None if value == "none" else _ints(line, value, col)
            pending.append({"kind": "blocks", "data": {"sizes": sizes}})
        elif key == "restrict":
            pending.append({"kind": "restrict", "data": {"keep": _ints(line, value, col)}})
        elif key == "stabilize":
            pending.append({"kind": "stabilize", "data": {"sizes": _ints(line, value, col)}})
        elif key == "permutation":
            pending.append({"kind": "permutation", "data": {"order": _ints(line, value, col)}})
        elif key == "diagonal":
            pending.append({"kind": "diagonal", "data": {"entries": _names(group, line, value, col)}})
        elif key == "out_split":
            pending.append({"kind": "out_split", "data": _parse_out_split(group, value, line, col)})
        else:
            raise line.error(f"Unknown key '{key}' in [script]", col)
    entries = [ScriptEntry(**entry) for entry in pending]
    return ScriptRecord(start=start, end=end[0] if end else None, entries=entries)


def parse_text(text: str) -> ProblemFile:
    """Parse and validate a problem file."""
    sections = _split_sections(text)
    by_kind: Dict[str, List[_Section]] = {}
    for section in sections:
        by_kind.setdefault(section.kind, []).append(section)
    for kind, found in by_kind.items():
        if kind != "matrix" and len(found) > 1:
            raise found[1].header.error(f"Section [{kind}] repeated")
    if "group" not in by_kind:
        raise ParseError("Missing [group] section", 1, 1)
    group = _parse_group(by_kind["group"][0])
    poset, cycles = _parse_poset(by_kind["poset"][0]) if "poset" in by_kind else (None, None)
    matrices: Dict[str, BlockedMatrix] = {}
    for section in by_kind.get("matrix", []):
        if section.name in matrices:
            raise section.header.error(f"Matrix '{section.name}' defined twice")
        matrices[section.name] = _parse_matrix(section, group, poset)
    structure = _parse_coset(by_kind["coset"][0], group, poset) if "coset" in by_kind else None
    certificate = _parse_certificate(by_kind["certificate"][0], group) if "certificate" in by_kind else None
    script = _parse_script(by_kind["script"][0], group) if "script" in by_kind else None
    problem = ProblemFile(
        group=group,
        poset=poset,
        cycles=cycles,
        matrices=matrices,
        structure=structure,
        certificate=certificate,
        script=script,
    )
    return problem.validate_contents()


def parse_file(path: Union[str, Path]) -> ProblemFile:
    path = Path(path)
    logger.debug(f"Reading {path}")
    try:
        return parse_text(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ValidationError(f"Cannot read {path}: {e}") from e


def _emit_group(group: FiniteGroup) -> List[str]:
    label = group.label
    if label.startswith("cyclic ") and group == FiniteGroup.cyclic(group.order):
        return ["[group]", "kind = cyclic", f"order = {group.order}"]
    if label.startswith("symmetric "):
        degree = int(label.split()[1])
        if group == FiniteGroup.symmetric(degree):
            return ["[group]", "kind = symmetric", f"degree = {degree}"]
    lines = ["[group]", "kind = table", "elements = " + " ".join(group.names)]
    for a in group.elements():
        lines.append("row = " + " ".join(group.name(group.mul(a, b)) for b in group.elements()))
    return lines


def _emit_matrix(name: str, m: BlockedMatrix) -> List[str]:
    lines = [f"[matrix {name}]", f"size = {m.n}"]
    if m.blocking is not None:
        lines.append("blocks = " + " ".join(str(x) for x in m.blocking.sizes))
    for s, t in m.nonzero_positions():
        lines.append(f'{s},{t} = "{m[s, t].format()}"')
    return lines


def _emit_move(move: Move) -> str:
    return f'move = {move.side} {move.direction} {move.s} {move.t} {move.annotation} "{move.value.format()}"'


def _emit_script(group: FiniteGroup, record: ScriptRecord) -> List[str]:
    lines = ["[script]", f"start = {record.start}"]
    if record.end is not None:
        lines.append(f"end = {record.end}")
    for entry in record.entries:
        data = entry.data
        if entry.kind == "certificate":
            flags = [flag for flag in CERT_FLAGS if getattr(entry, flag)]
            lines.append("certificate = " + (" ".join(flags) if flags else "none"))
            lines.extend(_emit_move(move) for move in entry.moves)
        elif entry.kind == "blocks":
            sizes = data.get("sizes")
            lines.append("blocks = " + (" ".join(str(x) for x in sizes) if sizes is not None else "none"))
        elif entry.kind == "out_split":
            cells = []
            for cell in data["cells"]:
                pairs = sorted((int(t), coeffs) for t, coeffs in cell.items())
                cells.append(", ".join(f'{t} "{GroupRingElem(group, c).format()}"' for t, c in pairs))
            lines.append(f"out_split = {data['state']} | " + " | ".join(cells))
        elif entry.kind == "diagonal":
            lines.append("diagonal = " + " ".join(group.name(int(g)) for g in data["entries"]))
        else:
            key = {"restrict": "keep", "stabilize": "sizes", "permutation": "order"}[entry.kind]
            lines.append(f"{entry.kind} = " + " ".join(str(x) for x in data[key]))
    return lines


def emit(problem: ProblemFile) -> str:
    """Canonical text of a problem file."""
    blocks = [_emit_group(problem.group)]
    if problem.poset is not None:
        lines = ["[poset]", f"size = {problem.poset.size}"]
        pairs = problem.poset.covering_pairs()
        if pairs:
            lines.append("relations = " + " ".join(f"{i}<{j}" for i, j in pairs))
        if problem.cycles is not None:
            lines.append("cycles = " + " ".join(str(i) for i in problem.cycles))
        blocks.append(lines)
    for name, m in problem.matrices.items():
        blocks.append(_emit_matrix(name, m))
    if problem.structure is not None:
        lines = ["[coset]"]
        for (i, j), h in problem.structure.items():
            lines.append(f"{i},{j} = " + " ".join(h.names()))
        blocks.append(lines)
    if problem.certificate is not None:
        record = problem.certificate
        lines = ["[certificate]", f"start = {record.start}"]
        if record.end is not None:
            lines.append(f"end = {record.end}")
        lines.append(f"positive = {'true' if record.positive else 'false'}")
        lines.append(f"blocked = {'true' if record.blocked else 'false'}")
        lines.extend(_emit_move(move) for move in record.moves)
        blocks.append(lines)
    if problem.script is not None:
        blocks.append(_emit_script(problem.group, problem.script))
    return "\n\n".join("\n".join(lines) for lines in blocks) + "\n"


def write_file(problem: ProblemFile, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(emit(problem), encoding="utf-8")
    logger.debug(f"Wrote {path}")
