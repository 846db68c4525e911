"""Result values produced by evaluating table expressions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..tables import Cell, ColumnType, Table, cell_to_text


@dataclass(frozen=True)
class Scalar:
    value: Cell


@dataclass(frozen=True)
class Vector:
    """A typed column of cells.

    `index` carries the row labels the elements came from (original row
    positions after filtering, or group keys after a grouped aggregation);
    None means plain positional labels 0..n-1.
    """

    values: tuple[Cell, ...]
    ctype: ColumnType
    index: tuple[Cell, ...] | None = None

    def __len__(self) -> int:
        return len(self.values)

    def labels(self) -> tuple[Cell, ...]:
        if self.index is not None:
            return self.index
        return tuple(range(len(self.values)))


@dataclass(frozen=True)
class SubTable:
    """A filtered/sliced view of a table.

    `index` is the original row position of each remaining row; None for an
    unfiltered table.
    """

    table: Table
    index: tuple[int, ...] | None = None

    def labels(self) -> tuple[int, ...]:
        if self.index is not None:
            return self.index
        return tuple(range(self.table.row_count))


@dataclass(frozen=True)
class ListVal:
    values: tuple[Cell, ...]


@dataclass(frozen=True)
class Shape:
    """A .shape tuple: (rows, cols) for tables, (rows,) for vectors."""

    rows: int
    cols: int | None = None

    def components(self) -> tuple[int, ...]:
        if self.cols is None:
            return (self.rows,)
        return (self.rows, self.cols)


Value = Union[Scalar, Vector, SubTable, ListVal, Shape]


def render_value(value: Value) -> str:
    """Human-readable single-result rendering for CLI/service output."""
    if isinstance(value, Scalar):
        return cell_to_text(value.value) if value.value is not None else "null"
    if isinstance(value, Vector):
        cells = ", ".join(cell_to_text(v) if v is not None else "null" for v in value.values)
        return f"[{cells}]"
    if isinstance(value, ListVal):
        cells = ", ".join(cell_to_text(v) if v is not None else "null" for v in value.values)
        return f"[{cells}]"
    if isinstance(value, Shape):
        return "(" + ", ".join(str(c) for c in value.components()) + ")"
    table = value.table
    header = ", ".join(table.column_names)
    return f"<table {table.row_count}x{table.col_count}: {header}>"


def value_to_jsonable(value: Value) -> dict:
    """Structured rendering for wire responses."""
    if isinstance(value, Scalar):
        return {"kind": "scalar", "value": value.value}
    if isinstance(value, Vector):
        return {"kind": "vector", "values": list(value.values), "ctype": value.ctype.value}
    if isinstance(value, ListVal):
        return {"kind": "list", "values": list(value.values)}
    if isinstance(value, Shape):
        return {"kind": "shape", "values": list(value.components())}
    table = value.table
    return {
        "kind": "table",
        "columns": list(table.column_names),
        "rows": [list(r) for r in table.rows],
    }
