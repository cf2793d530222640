"""Context ingestion and concept emission.

Readers accept a path or an open text handle; paths ending in ``.gz``
are decompressed (or compressed, for writers) transparently. All parse
failures raise :class:`ParseError` carrying the offending line number.
"""

from __future__ import annotations

import csv
import gzip
import json
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .core import AttributeSet, Concept, FormalContext, lectic_key

CONCEPT_FORMATS = ("json_lines", "csv", "count_only")
CONTEXT_FORMATS = ("cxt", "fimi", "csv")


class ParseError(ValueError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def _reading(source):
    if hasattr(source, "read"):
        return nullcontext(source)
    path = Path(source)
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def _writing(sink):
    if hasattr(sink, "write"):
        return nullcontext(sink)
    path = Path(sink)
    if path.suffix == ".gz":
        return gzip.open(path, "wt", encoding="utf-8")
    return open(path, "w", encoding="utf-8")


class _Cursor:
    """Line walker that reports positions in parse errors."""

    def __init__(self, lines: Sequence[str]):
        self.lines = lines
        self.pos = 0

    @property
    def number(self) -> int:
        return self.pos  # 1-based number of the line just taken

    def take(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise ParseError(len(self.lines), f"file ended while reading {what}")
        line = self.lines[self.pos].rstrip("\r\n")
        self.pos += 1
        return line

    def take_int(self, what: str) -> int:
        line = self.take(what).strip()
        try:
            value = int(line)
        except ValueError:
            raise ParseError(self.number, f"expected {what}, got {line!r}") from None
        if value < 0:
            raise ParseError(self.number, f"{what} cannot be negative")
        return value

    def skip_blanks(self) -> None:
        while self.pos < len(self.lines) and not self.lines[self.pos].strip():
            self.pos += 1

    def expect_end(self) -> None:
        self.skip_blanks()
        if self.pos < len(self.lines):
            raise ParseError(self.pos + 1, "unexpected content after the last row")


def read_cxt(source) -> FormalContext:
    """Parse the Burmeister dialect: 'B', counts, names, then './X' rows."""
    with _reading(source) as fh:
        cursor = _Cursor(fh.read().split("\n"))
    if cursor.take("the format header").strip() != "B":
        raise ParseError(cursor.number, "expected the Burmeister header 'B'")
    cursor.skip_blanks()
    n = cursor.take_int("the object count")
    m = cursor.take_int("the attribute count")
    cursor.skip_blanks()
    object_names = [cursor.take("an object name").strip() for _ in range(n)]
    attribute_names = [cursor.take("an attribute name").strip() for _ in range(m)]
    rows = []
    for _ in range(n):
        line = cursor.take("an incidence row").strip()
        if len(line) != m:
            raise ParseError(
                cursor.number, f"row has {len(line)} cells, expected {m}"
            )
        mask = 0
        for j, cell in enumerate(line):
            if cell == "X":
                mask |= 1 << j
            elif cell != ".":
                raise ParseError(
                    cursor.number, f"illegal cell character {cell!r}"
                )
        rows.append(AttributeSet(m, mask))
    cursor.expect_end()
    return FormalContext(object_names, attribute_names, rows)


def write_cxt(ctx: FormalContext, sink) -> None:
    with _writing(sink) as fh:
        fh.write(f"B\n\n{ctx.object_count}\n{ctx.attribute_count}\n\n")
        for name in ctx.object_names:
            fh.write(name + "\n")
        for name in ctx.attribute_names:
            fh.write(name + "\n")
        for row in ctx.rows:
            cells = (
                "X" if row.mask >> j & 1 else "."
                for j in range(ctx.attribute_count)
            )
            fh.write("".join(cells) + "\n")


def read_fimi(source, attribute_count: int | None = None) -> FormalContext:
    """One object per line as attribute indices; an empty line is an
    object with no attributes. Width defaults to 1 + the largest index."""
    with _reading(source) as fh:
        text = fh.read()
    masks: list[int] = []
    top = -1
    for k, line in enumerate(text.splitlines(), start=1):
        mask = 0
        for token in line.split():
            try:
                i = int(token)
            except ValueError:
                raise ParseError(
                    k, f"expected an attribute index, got {token!r}"
                ) from None
            if i < 0:
                raise ParseError(k, f"negative attribute index {i}")
            if attribute_count is not None and i >= attribute_count:
                raise ParseError(
                    k, f"index {i} outside 0..{attribute_count - 1}"
                )
            mask |= 1 << i
            if i > top:
                top = i
        masks.append(mask)
    m = attribute_count if attribute_count is not None else top + 1
    return FormalContext(
        [str(k) for k in range(1, len(masks) + 1)],
        [str(j) for j in range(m)],
        [AttributeSet(m, mask) for mask in masks],
    )


def read_csv(source) -> FormalContext:
    """Dense CSV: header row of attribute names (corner cell ignored),
    one row per object with its name first and {0,1} cells after."""
    with _reading(source) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "empty input, expected a header row") from None
        attribute_names = [cell.strip() for cell in header[1:]]
        m = len(attribute_names)
        object_names = []
        rows = []
        for record in reader:
            if not record:
                continue
            if len(record) != m + 1:
                raise ParseError(
                    reader.line_num,
                    f"row has {len(record) - 1} cells, expected {m}",
                )
            object_names.append(record[0].strip())
            mask = 0
            for j, cell in enumerate(record[1:]):
                flag = cell.strip()
                if flag == "1":
                    mask |= 1 << j
                elif flag != "0":
                    raise ParseError(
                        reader.line_num, f"cell must be 0 or 1, got {cell!r}"
                    )
            rows.append(AttributeSet(m, mask))
    return FormalContext(object_names, attribute_names, rows)


_READERS = {"cxt": read_cxt, "fimi": read_fimi, "csv": read_csv}


def load_context(path, fmt: str = "auto") -> FormalContext:
    """Read a context file, inferring the format from the suffix when asked."""
    if fmt == "auto":
        suffixes = [s.lstrip(".") for s in Path(path).suffixes if s != ".gz"]
        tail = suffixes[-1] if suffixes else ""
        fmt = {"cxt": "cxt", "csv": "csv", "fimi": "fimi", "dat": "fimi"}.get(tail, "")
        if not fmt:
            raise ValueError(
                f"cannot infer the format of {path!r}; pass one of {CONTEXT_FORMATS}"
            )
    reader = _READERS.get(fmt)
    if reader is None:
        raise ValueError(f"unknown context format {fmt!r}")
    return reader(path)


@dataclass(frozen=True)
class DatasetStats:
    objects: int
    attributes: int
    incidences: int
    density: float


def stats(ctx: FormalContext) -> DatasetStats:
    filled = sum(row.mask.bit_count() for row in ctx.rows)
    cells = ctx.object_count * ctx.attribute_count
    return DatasetStats(
        objects=ctx.object_count,
        attributes=ctx.attribute_count,
        incidences=filled,
        density=filled / cells if cells else 0.0,
    )


def write_concepts(
    ctx: FormalContext, concepts: Iterable[Concept], fmt: str, sink
) -> int:
    """Emit concepts in lectic order of intent; returns the record count.

    Name lists inside each record are sorted, so output from any
    enumerator diffs clean against any other.
    """
    if fmt not in CONCEPT_FORMATS:
        raise ValueError(f"unknown concept format {fmt!r}")
    m = ctx.attribute_count
    ordered = sorted(concepts, key=lambda c: lectic_key(c.intent.mask, m))
    with _writing(sink) as fh:
        if fmt == "count_only":
            fh.write(f"{len(ordered)}\n")
            return len(ordered)
        if fmt == "json_lines":
            for c in ordered:
                record = {
                    "extent": sorted(ctx.object_names[i] for i in c.extent),
                    "intent": sorted(ctx.attribute_names[j] for j in c.intent),
                }
                fh.write(json.dumps(record, separators=(",", ":")) + "\n")
            return len(ordered)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["extent", "intent"])
        for c in ordered:
            writer.writerow(
                [
                    " ".join(sorted(ctx.object_names[i] for i in c.extent)),
                    " ".join(sorted(ctx.attribute_names[j] for j in c.intent)),
                ]
            )
        return len(ordered)
