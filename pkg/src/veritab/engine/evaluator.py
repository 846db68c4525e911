"""Evaluate dialect expressions against a Table.

Evaluation is a pure function of (expression, table): the table is never
mutated, results are deterministic, and every failure is an EvalError with
one of the documented kinds. Exact semantics, including null handling and
truthiness coercion, are specified in grammar.md.
"""

from __future__ import annotations

import math

from ..tables import Cell, ColumnType, Table
from . import nodes
from .errors import ErrorKind, EvalError
from .parser import parse
from .values import ListVal, Scalar, Shape, SubTable, Value, Vector

_NUMERIC = (ColumnType.INT, ColumnType.FLOAT)


def evaluate(expr: nodes.Expr, table: Table) -> Value:
    return _Evaluator(table).eval(expr)


def execute_answer(source: str, table: Table) -> Value:
    """parse then evaluate; the denotation handed to answer matching."""
    return evaluate(parse(source), table)


def execute_verdict(source: str, table: Table) -> bool:
    """parse, evaluate, then coerce the result to a boolean verdict."""
    return coerce_truth(execute_answer(source, table))


def coerce_truth(value: Value) -> bool:
    """Map an execution result to a verdict.

    Mirrors host-language truthiness of ``bool(eval(code))`` with the
    historical dataframe-runtime rule for vectors: a single-element vector
    follows its element, anything longer is ambiguous. Total over all
    Values: the only failure mode is AmbiguousTruth.
    """
    if isinstance(value, Scalar):
        return _cell_truth(value.value)
    if isinstance(value, Vector):
        if len(value.values) == 0:
            return False
        if len(value.values) == 1:
            return _cell_truth(value.values[0])
        raise EvalError(
            ErrorKind.AMBIGUOUS_TRUTH,
            f"truth value of a {len(value.values)}-element vector is ambiguous",
        )
    if isinstance(value, ListVal):
        if len(value.values) == 1:
            return _cell_truth(value.values[0])
        return len(value.values) > 0
    if isinstance(value, Shape):
        return True  # a shape tuple is never empty
    raise EvalError(ErrorKind.AMBIGUOUS_TRUTH, "truth value of a table is ambiguous")


def _cell_truth(cell: Cell) -> bool:
    if cell is None:
        return False
    return bool(cell)


def _kind_name(value: Value) -> str:
    return {
        Scalar: "a scalar", Vector: "a vector", SubTable: "a table",
        ListVal: "a list", Shape: "a shape",
    }[type(value)]


def _cell_type_name(cell: Cell) -> str:
    if cell is None:
        return "null"
    if isinstance(cell, bool):
        return "bool"
    if isinstance(cell, int):
        return "int"
    if isinstance(cell, float):
        return "float"
    return "text"


# Comparison/arithmetic compatibility classes. Scalars classify by runtime
# type, vectors by declared column type; cross-class operations raise
# TypeMismatch instead of silently comparing false.
def _scalar_class(cell: Cell) -> str:
    if cell is None:
        return "null"
    if isinstance(cell, bool):
        return "bool"
    if isinstance(cell, (int, float)):
        return "number"
    return "text"


def _ctype_class(ctype: ColumnType) -> str:
    if ctype in _NUMERIC:
        return "number"
    return "bool" if ctype is ColumnType.BOOL else "text"


class _Evaluator:
    def __init__(self, table: Table):
        self.table = table

    def eval(self, expr: nodes.Expr) -> Value:
        handler = self._handlers[type(expr)]
        return handler(self, expr)

    # -- errors -----------------------------------------------------------

    def _err(self, kind: ErrorKind, message: str, node: nodes.Expr) -> EvalError:
        if node.src:
            message = f'{message} in "{node.src}"'
        return EvalError(kind, message)

    def _mismatch(self, message: str, node: nodes.Expr) -> EvalError:
        return self._err(ErrorKind.TYPE_MISMATCH, message, node)

    def _unknown_column(self, column: str, table: Table) -> EvalError:
        cols = ", ".join(table.column_names)
        return EvalError(
            ErrorKind.UNKNOWN_COLUMN,
            f"column '{column}' does not exist (columns: {cols})",
        )

    # -- leaves -----------------------------------------------------------

    def _eval_literal(self, expr: nodes.Literal) -> Value:
        return Scalar(expr.value)

    def _eval_list_literal(self, expr: nodes.ListLiteral) -> Value:
        return ListVal(expr.items)

    def _eval_table_ref(self, expr: nodes.TableRef) -> Value:
        return SubTable(self.table)

    # -- selection and filtering ------------------------------------------

    def _eval_column_select(self, expr: nodes.ColumnSelect) -> Value:
        source = self.eval(expr.source)
        if not isinstance(source, SubTable):
            raise self._mismatch(
                f"cannot select column '{expr.column}' from {_kind_name(source)}", expr
            )
        if not source.table.has_column(expr.column):
            raise self._unknown_column(expr.column, source.table)
        return Vector(
            source.table.column_values(expr.column),
            source.table.column_meta(expr.column).ctype,
            index=source.index,
        )

    def _mask_positions(self, mask: Value, length: int, node: nodes.Expr) -> list[int]:
        if not isinstance(mask, Vector):
            raise self._mismatch(
                f"row filter requires a boolean mask, got {_kind_name(mask)}", node
            )
        if mask.ctype is not ColumnType.BOOL:
            raise self._mismatch(
                f"row filter requires a boolean mask, got a {mask.ctype.value} vector", node
            )
        if len(mask.values) != length:
            raise self._mismatch(
                f"boolean mask length {len(mask.values)} does not match {length} rows", node
            )
        # Null mask cells select nothing.
        return [i for i, flag in enumerate(mask.values) if flag]

    def _eval_row_filter(self, expr: nodes.RowFilter) -> Value:
        source = self.eval(expr.source)
        mask = self.eval(expr.mask)
        if isinstance(source, SubTable):
            positions = self._mask_positions(mask, source.table.row_count, expr)
            labels = source.labels()
            return SubTable(
                source.table.take_rows(positions),
                index=tuple(labels[i] for i in positions),
            )
        if isinstance(source, Vector):
            positions = self._mask_positions(mask, len(source.values), expr)
            labels = source.labels()
            return Vector(
                tuple(source.values[i] for i in positions),
                source.ctype,
                index=tuple(labels[i] for i in positions),
            )
        raise self._mismatch(f"cannot filter {_kind_name(source)} with a mask", expr)

    def _eval_loc_select(self, expr: nodes.LocSelect) -> Value:
        source = self.eval(expr.source)
        if not isinstance(source, SubTable):
            raise self._err(
                ErrorKind.UNKNOWN_METHOD, f"'.loc' is not supported on {_kind_name(source)}", expr
            )
        mask = self.eval(expr.mask)
        positions = self._mask_positions(mask, source.table.row_count, expr)
        labels = source.labels()
        kept_labels = tuple(labels[i] for i in positions)
        if expr.column is None:
            return SubTable(source.table.take_rows(positions), index=kept_labels)
        if not source.table.has_column(expr.column):
            raise self._unknown_column(expr.column, source.table)
        cells = source.table.column_values(expr.column)
        return Vector(
            tuple(cells[i] for i in positions),
            source.table.column_meta(expr.column).ctype,
            index=kept_labels,
        )

    # -- comparison and boolean algebra ------------------------------------

    def _eval_compare(self, expr: nodes.Compare) -> Value:
        lhs, rhs = self.eval(expr.lhs), self.eval(expr.rhs)
        op = expr.op
        for side in (lhs, rhs):
            if not isinstance(side, (Scalar, Vector)):
                raise self._mismatch(f"cannot compare {_kind_name(side)}", expr)
        lhs_cls = _scalar_class(lhs.value) if isinstance(lhs, Scalar) else _ctype_class(lhs.ctype)
        rhs_cls = _scalar_class(rhs.value) if isinstance(rhs, Scalar) else _ctype_class(rhs.ctype)
        if "null" not in (lhs_cls, rhs_cls) and lhs_cls != rhs_cls:
            raise self._mismatch(f"cannot compare {lhs_cls} with {rhs_cls}", expr)

        if isinstance(lhs, Scalar) and isinstance(rhs, Scalar):
            return Scalar(_compare_cells(lhs.value, op, rhs.value))
        if isinstance(lhs, Vector) and isinstance(rhs, Vector):
            if len(lhs.values) != len(rhs.values):
                raise self._mismatch(
                    f"cannot compare vectors of length {len(lhs.values)} and {len(rhs.values)}",
                    expr,
                )
            flags = tuple(
                _compare_cells(a, op, b) for a, b in zip(lhs.values, rhs.values)
            )
            return Vector(flags, ColumnType.BOOL, index=lhs.index)
        if isinstance(lhs, Vector):
            flags = tuple(_compare_cells(a, op, rhs.value) for a in lhs.values)
            return Vector(flags, ColumnType.BOOL, index=lhs.index)
        flags = tuple(_compare_cells(lhs.value, op, b) for b in rhs.values)
        return Vector(flags, ColumnType.BOOL, index=rhs.index)

    def _bool_operand(self, value: Value, op: str, node: nodes.Expr) -> Value:
        if isinstance(value, Scalar) and isinstance(value.value, (bool, type(None))):
            return value
        if isinstance(value, Vector) and value.ctype is ColumnType.BOOL:
            return value
        raise self._mismatch(f"'{op}' requires boolean operands, got {_kind_name(value)}", node)

    def _eval_mask_combine(self, expr: nodes.MaskCombine) -> Value:
        operands = [self._bool_operand(self.eval(o), expr.op, expr) for o in expr.operands]
        if expr.op == "~":
            (operand,) = operands
            if isinstance(operand, Scalar):
                return Scalar(not _cell_truth(operand.value))
            return Vector(
                tuple(not _cell_truth(v) for v in operand.values),
                ColumnType.BOOL,
                index=operand.index,
            )
        lhs, rhs = operands
        if isinstance(lhs, Scalar) and isinstance(rhs, Scalar):
            a, b = _cell_truth(lhs.value), _cell_truth(rhs.value)
            return Scalar(a and b if expr.op == "&" else a or b)
        length = len(lhs.values) if isinstance(lhs, Vector) else len(rhs.values)
        if isinstance(lhs, Vector) and isinstance(rhs, Vector) and len(lhs) != len(rhs):
            raise self._mismatch(
                f"cannot combine masks of length {len(lhs)} and {len(rhs)}", expr
            )
        left = lhs.values if isinstance(lhs, Vector) else (lhs.value,) * length
        right = rhs.values if isinstance(rhs, Vector) else (rhs.value,) * length
        index = lhs.index if isinstance(lhs, Vector) else rhs.index
        if expr.op == "&":
            flags = tuple(_cell_truth(a) and _cell_truth(b) for a, b in zip(left, right))
        else:
            flags = tuple(_cell_truth(a) or _cell_truth(b) for a, b in zip(left, right))
        return Vector(flags, ColumnType.BOOL, index=index)

    def _eval_bool_combine(self, expr: nodes.BoolCombine) -> Value:
        # Python and/or/not semantics: truthiness-coercing, short-circuit.
        if expr.op == "not":
            return Scalar(not coerce_truth(self.eval(expr.operands[0])))
        if expr.op == "and":
            for operand in expr.operands:
                if not coerce_truth(self.eval(operand)):
                    return Scalar(False)
            return Scalar(True)
        for operand in expr.operands:
            if coerce_truth(self.eval(operand)):
                return Scalar(True)
        return Scalar(False)

    # -- indexing -----------------------------------------------------------

    def _eval_shape_of(self, expr: nodes.ShapeOf) -> Value:
        source = self.eval(expr.source)
        if isinstance(source, SubTable):
            return Shape(source.table.row_count, source.table.col_count)
        if isinstance(source, Vector):
            return Shape(len(source.values))
        raise self._err(
            ErrorKind.UNKNOWN_METHOD, f"'.shape' is not supported on {_kind_name(source)}", expr
        )

    def _eval_index_access(self, expr: nodes.IndexAccess) -> Value:
        source = self.eval(expr.source)
        i = expr.index
        if isinstance(source, Shape):
            components = source.components()
            if not -len(components) <= i < len(components):
                raise self._err(
                    ErrorKind.INDEX_OUT_OF_RANGE,
                    f"shape index {i} out of bounds for a {len(components)}-tuple",
                    expr,
                )
            return Scalar(components[i])
        if isinstance(source, (Vector, ListVal)):
            cells = source.values
            if not -len(cells) <= i < len(cells):
                raise self._err(
                    ErrorKind.INDEX_OUT_OF_RANGE,
                    f"position {i} out of bounds for length {len(cells)}",
                    expr,
                )
            return Scalar(cells[i])
        if isinstance(source, SubTable):
            if expr.accessor == "[]":
                raise self._unknown_column(str(i), source.table)
            n = source.table.row_count
            if not -n <= i < n:
                raise self._err(
                    ErrorKind.INDEX_OUT_OF_RANGE,
                    f"row position {i} out of bounds for {n} rows",
                    expr,
                )
            position = i if i >= 0 else n + i
            labels = source.labels()
            return SubTable(source.table.take_rows([position]), index=(labels[position],))
        raise self._mismatch(f"cannot index into {_kind_name(source)}", expr)

    # -- methods --------------------------------------------------------------

    def _eval_method_call(self, expr: nodes.MethodCall) -> Value:
        receiver = self.eval(expr.receiver)
        name = expr.name
        if isinstance(receiver, Vector):
            return self._vector_method(receiver, expr)
        if isinstance(receiver, SubTable):
            return self._table_method(receiver, expr)
        raise self._err(
            ErrorKind.UNKNOWN_METHOD,
            f"method '{name}' is not supported on {_kind_name(receiver)}",
            expr,
        )

    def _vector_method(self, vec: Vector, expr: nodes.MethodCall) -> Value:
        name = expr.name
        non_null = [v for v in vec.values if v is not None]
        if name in ("sum", "mean"):
            if vec.ctype is ColumnType.TEXT:
                raise self._mismatch(f"cannot {name} a text vector", expr)
            if name == "sum":
                if vec.ctype is ColumnType.FLOAT:
                    return Scalar(float(sum(non_null)))
                return Scalar(int(sum(non_null)))
            if not non_null:
                return Scalar(None)
            return Scalar(float(sum(non_null)) / len(non_null))
        if name in ("max", "min"):
            if not non_null:
                return Scalar(None)
            return Scalar(max(non_null) if name == "max" else min(non_null))
        if name == "count":
            return Scalar(len(non_null))
        if name == "nunique":
            return Scalar(len(set(non_null)))
        if name == "unique":
            seen: list[Cell] = []
            for v in vec.values:
                if v not in seen:
                    seen.append(v)
            return Vector(tuple(seen), vec.ctype)
        if name == "any":
            return Scalar(any(_cell_truth(v) for v in non_null))
        if name == "all":
            return Scalar(all(_cell_truth(v) for v in non_null))
        if name == "tolist":
            return ListVal(vec.values)
        if name == "abs":
            if vec.ctype not in _NUMERIC:
                raise self._mismatch(f"cannot take abs of a {vec.ctype.value} vector", expr)
            return Vector(
                tuple(None if v is None else abs(v) for v in vec.values),
                vec.ctype,
                index=vec.index,
            )
        if name == "isin":
            items = expr.args[0]
            flags = tuple(v is not None and v in items for v in vec.values)
            return Vector(flags, ColumnType.BOOL, index=vec.index)
        if name in ("idxmax", "idxmin"):
            if not non_null:
                raise self._err(
                    ErrorKind.INDEX_OUT_OF_RANGE,
                    f"attempt to get {name} of an empty vector",
                    expr,
                )
            pick = max(non_null) if name == "idxmax" else min(non_null)
            labels = vec.labels()
            position = next(i for i, v in enumerate(vec.values) if v == pick)
            return Scalar(labels[position])
        if name.startswith("str."):
            return self._str_method(vec, expr)
        raise self._err(
            ErrorKind.UNKNOWN_METHOD, f"method '{name}' is not supported on a vector", expr
        )

    def _str_method(self, vec: Vector, expr: nodes.MethodCall) -> Value:
        if vec.ctype is not ColumnType.TEXT:
            raise self._mismatch(
                f"can only use .str methods on text vectors, not {vec.ctype.value}", expr
            )
        name = expr.name
        if name == "str.lower":
            return Vector(
                tuple(None if v is None else str(v).lower() for v in vec.values),
                ColumnType.TEXT,
                index=vec.index,
            )
        needle = expr.args[0]
        if name == "str.contains":
            flags = tuple(v is not None and needle in str(v) for v in vec.values)
        else:  # str.startswith
            flags = tuple(v is not None and str(v).startswith(needle) for v in vec.values)
        return Vector(flags, ColumnType.BOOL, index=vec.index)

    def _table_method(self, sub: SubTable, expr: nodes.MethodCall) -> Value:
        name = expr.name
        table = sub.table
        labels = sub.labels()
        if name == "head":
            positions = list(range(table.row_count))[: expr.args[0]]
            return SubTable(
                table.take_rows(positions), index=tuple(labels[i] for i in positions)
            )
        if name == "sort_values":
            column = expr.args[0]
            if not table.has_column(column):
                raise self._unknown_column(column, table)
            ascending = expr.ascending if expr.ascending is not None else True
            cells = table.column_values(column)
            non_null = [i for i, v in enumerate(cells) if v is not None]
            nulls = [i for i, v in enumerate(cells) if v is None]
            # Stable sort; nulls go last regardless of direction.
            ordered = sorted(non_null, key=lambda i: cells[i], reverse=not ascending)
            positions = ordered + nulls
            return SubTable(
                table.take_rows(positions), index=tuple(labels[i] for i in positions)
            )
        raise self._err(
            ErrorKind.UNKNOWN_METHOD, f"method '{name}' is not supported on a table", expr
        )

    def _eval_group_agg(self, expr: nodes.GroupAgg) -> Value:
        source = self.eval(expr.source)
        if not isinstance(source, SubTable):
            raise self._err(
                ErrorKind.UNKNOWN_METHOD,
                f"'.groupby' is not supported on {_kind_name(source)}",
                expr,
            )
        table = source.table
        for column in (expr.key, expr.value):
            if not table.has_column(column):
                raise self._unknown_column(column, table)
        keys = table.column_values(expr.key)
        cells = table.column_values(expr.value)
        value_ctype = table.column_meta(expr.value).ctype
        groups: dict[Cell, list[Cell]] = {}
        for k, v in zip(keys, cells):
            if k is None:
                continue  # null group keys are dropped
            groups.setdefault(k, []).append(v)
        ordered_keys = sorted(groups)
        aggregated = tuple(
            self._aggregate_group(groups[k], expr.agg, value_ctype, expr) for k in ordered_keys
        )
        out_ctype = self._agg_ctype(expr.agg, value_ctype)
        return Vector(aggregated, out_ctype, index=tuple(ordered_keys))

    def _aggregate_group(
        self, cells: list[Cell], agg: str, ctype: ColumnType, node: nodes.Expr
    ) -> Cell:
        non_null = [v for v in cells if v is not None]
        if agg in ("sum", "mean") and ctype is ColumnType.TEXT:
            raise self._mismatch(f"cannot {agg} a text column", node)
        if agg == "sum":
            if ctype is ColumnType.FLOAT:
                return float(sum(non_null))
            return int(sum(non_null))
        if agg == "mean":
            return float(sum(non_null)) / len(non_null) if non_null else None
        if agg == "max":
            return max(non_null) if non_null else None
        if agg == "min":
            return min(non_null) if non_null else None
        if agg == "count":
            return len(non_null)
        return len(set(non_null))  # nunique

    @staticmethod
    def _agg_ctype(agg: str, value_ctype: ColumnType) -> ColumnType:
        if agg in ("count", "nunique"):
            return ColumnType.INT
        if agg == "mean":
            return ColumnType.FLOAT
        if agg == "sum":
            return ColumnType.INT if value_ctype is ColumnType.BOOL else value_ctype
        return value_ctype  # max/min keep the column type

    # -- functions --------------------------------------------------------------

    def _eval_function_call(self, expr: nodes.FunctionCall) -> Value:
        name = expr.name
        args = [self.eval(a) for a in expr.args]
        if name == "len":
            return self._fn_len(args[0], expr)
        if name == "abs":
            return self._fn_abs(args[0], expr)
        if name == "round":
            return self._fn_round(args, expr)
        if name == "str":
            return self._fn_str(args[0], expr)
        return self._fn_numeric_cast(name, args[0], expr)

    def _fn_len(self, value: Value, node: nodes.Expr) -> Value:
        if isinstance(value, SubTable):
            return Scalar(value.table.row_count)
        if isinstance(value, (Vector, ListVal)):
            return Scalar(len(value.values))
        if isinstance(value, Shape):
            return Scalar(len(value.components()))
        if isinstance(value.value, str):
            return Scalar(len(value.value))
        raise self._mismatch(
            f"len() of a {_cell_type_name(value.value)} scalar", node
        )

    def _fn_abs(self, value: Value, node: nodes.Expr) -> Value:
        if isinstance(value, Scalar):
            if value.value is None:
                return Scalar(None)
            if isinstance(value.value, bool) or not isinstance(value.value, (int, float)):
                raise self._mismatch(
                    f"abs() of a {_cell_type_name(value.value)} value", node
                )
            return Scalar(abs(value.value))
        if isinstance(value, Vector):
            if value.ctype not in _NUMERIC:
                raise self._mismatch(f"abs() of a {value.ctype.value} vector", node)
            return Vector(
                tuple(None if v is None else abs(v) for v in value.values),
                value.ctype,
                index=value.index,
            )
        raise self._mismatch(f"abs() of {_kind_name(value)}", node)

    def _fn_round(self, args: list[Value], node: nodes.Expr) -> Value:
        ndigits: int | None = None
        if len(args) == 2:
            second = args[1]
            if not (isinstance(second, Scalar) and isinstance(second.value, int)
                    and not isinstance(second.value, bool)):
                raise self._mismatch("round() digits must be an integer", node)
            ndigits = second.value
        value = args[0]
        if isinstance(value, Scalar):
            if value.value is None:
                return Scalar(None)
            if isinstance(value.value, bool) or not isinstance(value.value, (int, float)):
                raise self._mismatch(
                    f"round() of a {_cell_type_name(value.value)} value", node
                )
            if ndigits is None:
                return Scalar(int(round(value.value)))
            return Scalar(float(round(value.value, ndigits)))
        if isinstance(value, Vector):
            if value.ctype not in _NUMERIC:
                raise self._mismatch(f"round() of a {value.ctype.value} vector", node)
            if value.ctype is ColumnType.INT:
                return value
            cells = tuple(
                None if v is None else float(round(v, ndigits or 0)) for v in value.values
            )
            return Vector(cells, ColumnType.FLOAT, index=value.index)
        raise self._mismatch(f"round() of {_kind_name(value)}", node)

    def _fn_str(self, value: Value, node: nodes.Expr) -> Value:
        if not isinstance(value, Scalar):
            raise self._mismatch(f"str() of {_kind_name(value)}", node)
        if value.value is None:
            return Scalar("nan")  # missing values print the way the runtime shows them
        return Scalar(str(value.value))

    def _fn_numeric_cast(self, name: str, value: Value, node: nodes.Expr) -> Value:
        if not isinstance(value, Scalar):
            raise self._mismatch(f"{name}() of {_kind_name(value)}", node)
        cell = value.value
        if cell is None:
            if name == "float":
                return Scalar(None)
            raise self._mismatch("int() of a null value", node)
        try:
            if name == "int":
                result: Cell = int(cell) if not isinstance(cell, str) else int(cell.strip())
            else:
                result = float(cell) if not isinstance(cell, str) else float(cell.strip())
        except (ValueError, TypeError):
            raise self._mismatch(
                f"{name}() cannot convert {_cell_type_name(cell)} value {cell!r}", node
            ) from None
        if isinstance(result, float) and not math.isfinite(result):
            return Scalar(None)
        return Scalar(result)

    # -- arithmetic ----------------------------------------------------------------

    def _eval_arith(self, expr: nodes.Arith) -> Value:
        lhs, rhs = self.eval(expr.lhs), self.eval(expr.rhs)
        op = expr.op
        for side in (lhs, rhs):
            if not isinstance(side, (Scalar, Vector)):
                raise self._mismatch(
                    f"arithmetic '{op}' on {_kind_name(side)}", expr
                )
        lhs_cls = _scalar_class(lhs.value) if isinstance(lhs, Scalar) else _ctype_class(lhs.ctype)
        rhs_cls = _scalar_class(rhs.value) if isinstance(rhs, Scalar) else _ctype_class(rhs.ctype)
        classes = {lhs_cls, rhs_cls} - {"null"}
        if classes == {"text"}:
            if op != "+":
                raise self._mismatch(f"'{op}' is not defined for text", expr)
        elif classes and classes != {"number"}:
            raise self._mismatch(
                f"arithmetic '{op}' between {lhs_cls} and {rhs_cls}", expr
            )

        if isinstance(lhs, Scalar) and isinstance(rhs, Scalar):
            return Scalar(self._arith_cells(lhs.value, op, rhs.value, expr))
        if isinstance(lhs, Vector) and isinstance(rhs, Vector):
            if len(lhs.values) != len(rhs.values):
                raise self._mismatch(
                    f"vector lengths {len(lhs.values)} and {len(rhs.values)} differ", expr
                )
            left, right, index = lhs.values, rhs.values, lhs.index
        elif isinstance(lhs, Vector):
            left, right, index = lhs.values, (rhs.value,) * len(lhs.values), lhs.index
        else:
            left, right, index = (lhs.value,) * len(rhs.values), rhs.values, rhs.index
        cells = tuple(self._arith_cells(a, op, b, expr) for a, b in zip(left, right))
        if "text" in classes:
            out_ctype = ColumnType.TEXT
        elif op == "/" or any(isinstance(c, float) for c in cells):
            out_ctype = ColumnType.FLOAT
        else:
            out_ctype = ColumnType.INT
        return Vector(cells, out_ctype, index=index)

    def _arith_cells(self, a: Cell, op: str, b: Cell, node: nodes.Expr) -> Cell:
        if op == "/" and b == 0 and not isinstance(b, bool) and b is not None:
            raise self._err(ErrorKind.DIVISION_BY_ZERO, "division by zero", node)
        if a is None or b is None:
            return None
        if isinstance(a, str):
            return a + b  # type: ignore[operator]  # text class pre-checked
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        return a / b

    _handlers = {
        nodes.Literal: _eval_literal,
        nodes.ListLiteral: _eval_list_literal,
        nodes.TableRef: _eval_table_ref,
        nodes.ColumnSelect: _eval_column_select,
        nodes.Compare: _eval_compare,
        nodes.MaskCombine: _eval_mask_combine,
        nodes.BoolCombine: _eval_bool_combine,
        nodes.RowFilter: _eval_row_filter,
        nodes.LocSelect: _eval_loc_select,
        nodes.MethodCall: _eval_method_call,
        nodes.IndexAccess: _eval_index_access,
        nodes.ShapeOf: _eval_shape_of,
        nodes.FunctionCall: _eval_function_call,
        nodes.Arith: _eval_arith,
        nodes.GroupAgg: _eval_group_agg,
    }


def _compare_cells(a: Cell, op: str, b: Cell) -> bool:
    """Elementwise comparison; any null operand compares false."""
    if a is None or b is None:
        return False
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b
