"""AST node types for the single-line table-expression dialect.

Nodes are produced by `parser.parse` and consumed by `evaluator.evaluate`.
Each node keeps the source fragment it was parsed from (`src`) so runtime
errors can quote the offending text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..tables import Cell

COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
ARITH_OPS = ("+", "-", "*", "/")


@dataclass(frozen=True)
class _Node:
    src: str = field(default="", repr=False, compare=False, kw_only=True)


@dataclass(frozen=True)
class Literal(_Node):
    value: Cell


@dataclass(frozen=True)
class ListLiteral(_Node):
    items: tuple[Cell, ...]


@dataclass(frozen=True)
class TableRef(_Node):
    pass


@dataclass(frozen=True)
class ColumnSelect(_Node):
    source: "Expr"
    column: str


@dataclass(frozen=True)
class Compare(_Node):
    lhs: "Expr"
    op: str  # one of COMPARE_OPS
    rhs: "Expr"


@dataclass(frozen=True)
class MaskCombine(_Node):
    """Elementwise boolean algebra over masks: &, |, ~."""

    op: str
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class BoolCombine(_Node):
    """Python `and`/`or`/`not`: truthiness-coercing, scalar result."""

    op: str
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class RowFilter(_Node):
    source: "Expr"
    mask: "Expr"


@dataclass(frozen=True)
class LocSelect(_Node):
    """df.loc[mask] or df.loc[mask, 'col']."""

    source: "Expr"
    mask: "Expr"
    column: str | None


@dataclass(frozen=True)
class MethodCall(_Node):
    """Whitelisted method with literal-only arguments.

    String-accessor methods are encoded as 'str.contains', 'str.lower',
    'str.startswith'.
    """

    receiver: "Expr"
    name: str
    args: tuple[Cell | tuple[Cell, ...], ...] = ()
    ascending: bool | None = None  # sort_values only


@dataclass(frozen=True)
class IndexAccess(_Node):
    source: "Expr"
    index: int
    accessor: str = "[]"  # '[]', '.iloc', or '.values'


@dataclass(frozen=True)
class ShapeOf(_Node):
    source: "Expr"


@dataclass(frozen=True)
class FunctionCall(_Node):
    name: str  # len, abs, round, str, int, float
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Arith(_Node):
    lhs: "Expr"
    op: str  # one of ARITH_OPS
    rhs: "Expr"


@dataclass(frozen=True)
class GroupAgg(_Node):
    """df.groupby(key)[value].<agg>() - the only supported groupby shape."""

    source: "Expr"
    key: str
    value: str
    agg: str


Expr = Union[
    Literal,
    ListLiteral,
    TableRef,
    ColumnSelect,
    Compare,
    MaskCombine,
    BoolCombine,
    RowFilter,
    LocSelect,
    MethodCall,
    IndexAccess,
    ShapeOf,
    FunctionCall,
    Arith,
    GroupAgg,
]
