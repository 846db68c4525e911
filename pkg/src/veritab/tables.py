"""Columnar table model: loading, type inference, and prompt rendering.

A Table is an immutable, typed, row-major relation built from one of the
supported corpus file formats. Every other component consumes Tables and
never mutates them, so instances are safe to share across threads.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

Cell = bool | int | float | str | None

# Tokens that read as a missing value, matched case-insensitively on the
# stripped cell text.
DEFAULT_NULL_TOKENS = ("", "nan", "n/a", "-")

_INT_RE = re.compile(r"^[+-]?\d+$")
# Thousands separators are only trusted when every group is exactly three
# digits ("1,234,567", optionally with a decimal tail). Anything looser is
# left as text.
_GROUPED_NUM_RE = re.compile(r"^[+-]?\d{1,3}(?:,\d{3})+(?:\.\d+)?$")


class ColumnType(str, Enum):
    INT = "int"
    FLOAT = "float"
    TEXT = "text"
    BOOL = "bool"


class TableFormat(str, Enum):
    CSV = "csv"
    TSV = "tsv"
    TABFACT_JSON = "tabfact_json"  # the TabFact release: CSV with '#' delimiter
    WTQ_TSV = "wtq_tsv"  # WikiTableQuestions .tsv tables


_FORMAT_DELIMITERS = {
    TableFormat.CSV: ",",
    TableFormat.TSV: "\t",
    TableFormat.TABFACT_JSON: "#",
    TableFormat.WTQ_TSV: "\t",
}


def _conforms(cell: Cell, ctype: "ColumnType") -> bool:
    if cell is None:
        return True
    if ctype is ColumnType.INT:
        return isinstance(cell, int) and not isinstance(cell, bool)
    if ctype is ColumnType.FLOAT:
        return isinstance(cell, float) and math.isfinite(cell)
    if ctype is ColumnType.BOOL:
        return isinstance(cell, bool)
    return isinstance(cell, str)


class TableError(Exception):
    """Base error for table ingestion."""


class MalformedSource(TableError):
    """Ragged rows, missing header, or undecodable bytes."""


class EmptyTable(TableError):
    """Header present but zero data rows."""


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    ctype: ColumnType
    null_count: int


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[ColumnMeta, ...]
    rows: tuple[tuple[Cell, ...], ...]
    _column_index: dict[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names after normalization: {names}")
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(
                    f"row width {len(row)} does not match column count {len(self.columns)}"
                )
            for cell, col in zip(row, self.columns):
                if not _conforms(cell, col.ctype):
                    raise ValueError(
                        f"cell {cell!r} does not conform to {col.ctype.value} "
                        f"column {col.name!r}"
                    )
        object.__setattr__(self, "_column_index", {n: i for i, n in enumerate(names)})

    @property
    def row_count(self) -> int:
        return len(self.rows)

    @property
    def col_count(self) -> int:
        return len(self.columns)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def has_column(self, name: str) -> bool:
        return name in self._column_index

    def column_position(self, name: str) -> int:
        return self._column_index[name]

    def column_values(self, name: str) -> tuple[Cell, ...]:
        i = self._column_index[name]
        return tuple(row[i] for row in self.rows)

    def column_meta(self, name: str) -> ColumnMeta:
        return self.columns[self._column_index[name]]

    def take_rows(self, positions: Sequence[int]) -> "Table":
        """New Table with the given row positions, column metadata recomputed."""
        rows = tuple(self.rows[i] for i in positions)
        columns = tuple(
            ColumnMeta(c.name, c.ctype, sum(1 for r in rows if r[i] is None))
            for i, c in enumerate(self.columns)
        )
        return Table(self.name, columns, rows)


def normalize_column_names(raw_names: Iterable[str]) -> list[str]:
    """Trim, collapse whitespace runs, lowercase; suffix ' (2)', ' (3)' on clashes."""
    seen: dict[str, int] = {}
    out: list[str] = []
    for raw in raw_names:
        name = re.sub(r"\s+", " ", raw.strip()).lower()
        if not name:
            name = "unnamed"
        count = seen.get(name, 0) + 1
        seen[name] = count
        out.append(name if count == 1 else f"{name} ({count})")
    return out


def _parse_typed(
    text: str, null_tokens: frozenset[str]
) -> tuple[Cell, bool, bool, bool]:
    """Parse one raw cell.

    Returns (value, is_int, is_float, is_bool) where the flags say which
    types the cell admits. Null cells admit every type.
    """
    stripped = text.strip()
    if stripped.lower() in null_tokens:
        return None, True, True, True
    if _INT_RE.match(stripped):
        return int(stripped), True, True, False
    if _GROUPED_NUM_RE.match(stripped):
        plain = stripped.replace(",", "")
        if "." in plain:
            return float(plain), False, True, False
        return int(plain), True, True, False
    try:
        value = float(stripped)
    except ValueError:
        value = None
    else:
        if math.isfinite(value):
            return value, False, True, False
        return None, True, True, True  # non-finite parses become Null
    if stripped.lower() in ("true", "false"):
        return stripped.lower() == "true", False, False, True
    return text, False, False, False


def infer_column_type(
    cells: Sequence[str], null_tokens: Iterable[str] = DEFAULT_NULL_TOKENS
) -> tuple[ColumnType, list[Cell]]:
    """Infer the narrowest type admitting every non-null cell; parse the cells.

    Order: Int, then Float, then Bool, then Text. Text is the universal
    fallback and keeps the original cell text losslessly.
    """
    if not cells:
        raise ValueError("cannot infer a type from an empty cell sequence")
    tokens = frozenset(t.lower() for t in null_tokens)
    parsed = [_parse_typed(c, tokens) for c in cells]
    non_null = [p for p in parsed if p[0] is not None]
    if non_null and all(p[1] for p in non_null):
        return ColumnType.INT, [p[0] if p[0] is None else int(p[0]) for p in parsed]
    if non_null and all(p[2] for p in non_null):
        return ColumnType.FLOAT, [
            p[0] if p[0] is None else float(p[0]) for p in parsed
        ]
    if non_null and all(p[3] for p in non_null):
        return ColumnType.BOOL, [p[0] for p in parsed]
    # Text: nulls stay null, everything else keeps its original text.
    out: list[Cell] = []
    for raw, p in zip(cells, parsed):
        out.append(None if p[0] is None else raw)
    return ColumnType.TEXT, out


def _decode(source: bytes | str) -> str:
    if isinstance(source, str):
        return source
    try:
        return source.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedSource(f"source is not valid UTF-8: {exc}") from None


def _read_records(text: str, fmt: TableFormat, delimiter: str | None) -> list[list[str]]:
    delim = delimiter or _FORMAT_DELIMITERS[fmt]
    if fmt is TableFormat.WTQ_TSV:
        # WTQ tables are unquoted TSV with backslash escapes for newlines.
        reader = csv.reader(io.StringIO(text), delimiter=delim, quoting=csv.QUOTE_NONE)
        return [[c.replace("\\n", " ") for c in rec] for rec in reader if rec]
    reader = csv.reader(io.StringIO(text), delimiter=delim)
    return [rec for rec in reader if rec]


def load_table(
    source: bytes | str,
    fmt: TableFormat | str = TableFormat.CSV,
    *,
    name: str = "table",
    delimiter: str | None = None,
    null_tokens: Iterable[str] = DEFAULT_NULL_TOKENS,
) -> Table:
    """Load a Table from raw file content. First record is the header.

    Raises MalformedSource on ragged rows, a missing header, or bytes that
    do not decode; EmptyTable when the header has no data rows.
    """
    fmt = TableFormat(fmt)
    try:
        records = _read_records(_decode(source), fmt, delimiter)
    except csv.Error as exc:
        raise MalformedSource(f"unparseable delimited text: {exc}") from None
    if not records:
        raise MalformedSource("missing header: source has no records")
    header, data = records[0], records[1:]
    if not data:
        raise EmptyTable(f"table {name!r} has a header but zero data rows")
    width = len(header)
    for i, rec in enumerate(data):
        if len(rec) != width:
            raise MalformedSource(
                f"ragged row {i + 1}: expected {width} cells, found {len(rec)}"
            )
    names = normalize_column_names(header)
    columns: list[ColumnMeta] = []
    parsed_cols: list[list[Cell]] = []
    for j, col_name in enumerate(names):
        ctype, cells = infer_column_type([rec[j] for rec in data], null_tokens)
        columns.append(ColumnMeta(col_name, ctype, sum(1 for c in cells if c is None)))
        parsed_cols.append(cells)
    rows = tuple(
        tuple(parsed_cols[j][i] for j in range(width)) for i in range(len(data))
    )
    return Table(name, tuple(columns), rows)


def cell_to_text(cell: Cell) -> str:
    """Canonical text form used when rendering tables; round-trips load_table."""
    if cell is None:
        return ""
    if isinstance(cell, bool):
        return "true" if cell else "false"
    if isinstance(cell, float):
        return repr(cell)
    return str(cell)


def render_for_prompt(table: Table, max_rows: int = 50, max_chars: int = 4000) -> str:
    """Deterministic CSV text of the table for embedding in prompts.

    Emits the header plus at most max_rows rows; when rows are cut, a
    trailing marker line reports how many were omitted. Truncation to the
    max_chars budget only ever happens at a row boundary.
    """
    if max_rows <= 0 or max_chars <= 0:
        raise ValueError("render limits must be positive")

    def to_line(cells: Sequence[str]) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow(cells)
        return buf.getvalue()

    header = to_line(table.column_names)
    lines = [header]
    emitted = 0
    total = len(header)
    marker_budget = 30  # room for a worst-case omission marker
    for row in table.rows[:max_rows]:
        line = to_line([cell_to_text(c) for c in row])
        if total + 1 + len(line) + marker_budget > max_chars:
            break
        lines.append(line)
        total += 1 + len(line)
        emitted += 1
    if emitted < table.row_count:
        lines.append(f"... ({table.row_count - emitted} more rows)")
    return "\n".join(lines)
