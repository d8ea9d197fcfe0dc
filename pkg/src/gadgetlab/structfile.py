"""Text format for structures.

One structure per file::

    # optional comments
    language: E/2 M/1 ; const c d
    vertices: 3
    E: (0,1) (1,2)
    M: (2)
    const c = 0
    const d = 2

Whitespace-insensitive; ``#`` begins a comment line.  Duplicate tuples
collapse and tuple order is irrelevant.  :func:`write_structure` emits a
canonical form (sorted tuples, declaration order of the language), so
read/write round-trips are bit-exact.
"""

from __future__ import annotations

import re

from .relstruct import Language, Structure, StructureError, build_structure


class ParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_TUPLE_RE = re.compile(r"\(\s*(-?\d+(?:\s*,\s*-?\d+)*)\s*\)")


def parse_structure(text: str) -> Structure:
    lines = []
    for i, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped and not stripped.startswith("#"):
            lines.append((i, stripped))
    if not lines:
        raise ParseError(1, "empty file")

    line_no, header = lines[0]
    if not header.startswith("language:"):
        raise ParseError(line_no, "expected 'language:' header")
    body = header[len("language:"):]
    const_names: list[str] = []
    if ";" in body:
        body, const_part = body.split(";", 1)
        const_part = const_part.strip()
        if not const_part.startswith("const"):
            raise ParseError(line_no, "expected 'const' after ';' in header")
        const_names = const_part[len("const"):].split()
        for name in const_names:
            if not re.fullmatch(_NAME, name):
                raise ParseError(line_no, f"bad constant name {name!r}")
    relations: list[tuple[str, int]] = []
    for spec in body.split():
        m = re.fullmatch(rf"({_NAME})/(\d+)", spec)
        if not m:
            raise ParseError(line_no, f"bad relation spec {spec!r} (want name/arity)")
        relations.append((m.group(1), int(m.group(2))))
    try:
        language = Language.of(relations, const_names)
    except StructureError as exc:
        raise ParseError(line_no, str(exc)) from None

    if len(lines) < 2:
        raise ParseError(line_no, "missing 'vertices:' line")
    line_no, vline = lines[1]
    m = re.fullmatch(r"vertices:\s*(\d+)", vline)
    if not m:
        raise ParseError(line_no, "expected 'vertices: n'")
    n = int(m.group(1))

    relation_data: dict[str, set[tuple[int, ...]]] = {}
    constant_data: dict[str, int] = {}
    for line_no, line in lines[2:]:
        m = re.fullmatch(rf"const\s+({_NAME})\s*=\s*(-?\d+)", line)
        if m:
            name, v = m.group(1), int(m.group(2))
            if name in constant_data:
                raise ParseError(line_no, f"constant {name!r} assigned twice")
            constant_data[name] = v
            continue
        m = re.match(rf"({_NAME})\s*:", line)
        if not m:
            raise ParseError(line_no, f"unrecognized line {line!r}")
        symbol = m.group(1)
        rest = line[m.end():].strip()
        tuples = relation_data.setdefault(symbol, set())
        pos = 0
        for tm in _TUPLE_RE.finditer(rest):
            if rest[pos:tm.start()].strip():
                raise ParseError(line_no, f"unexpected text {rest[pos:tm.start()].strip()!r}")
            tuples.add(tuple(int(x) for x in tm.group(1).split(",")))
            pos = tm.end()
        if rest[pos:].strip():
            raise ParseError(line_no, f"unexpected text {rest[pos:].strip()!r}")

    try:
        return build_structure(
            language,
            n,
            [(sym, tups) for sym, tups in relation_data.items()],
            list(constant_data.items()),
        )
    except StructureError as exc:
        raise ParseError(lines[-1][0], str(exc)) from None


def write_structure(s: Structure) -> str:
    """Canonical serialization; deterministic for equal structures."""
    parts = [" ".join(f"{name}/{arity}" for name, arity in s.language.relations)]
    header = "language: " + parts[0]
    if s.language.constants:
        header += " ; const " + " ".join(s.language.constants)
    out = [header, f"vertices: {s.n}"]
    for name, _ in s.language.relations:
        tuples = " ".join(
            "(" + ",".join(str(v) for v in tup) + ")" for tup in sorted(s.relations[name])
        )
        out.append(f"{name}:" + (" " + tuples if tuples else ""))
    for name in s.language.constants:
        out.append(f"const {name} = {s.constants[name]}")
    return "\n".join(out) + "\n"


def read_structure_file(path) -> Structure:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_structure(fh.read())


def write_structure_file(s: Structure, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_structure(s))
