"""Parse single-line table expressions into the dialect AST.

The dialect is a closed subset of Python expression syntax (see
grammar.md). Parsing uses the stdlib `ast` module and then translates
nodes into the dialect AST, rejecting anything outside the whitelist with
UnsupportedSyntax. Nothing is ever executed here: translation is purely
structural, which is what makes the evaluator a sandbox.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass

from ..tables import Cell
from . import nodes
from .errors import EvalError, parse_error, unsupported

SERIES_NOARG_METHODS = frozenset(
    {"sum", "mean", "max", "min", "count", "nunique", "unique", "any", "all",
     "tolist", "abs", "idxmax", "idxmin"}
)
GROUP_AGGS = frozenset({"sum", "mean", "max", "min", "count", "nunique"})
STR_METHODS = frozenset({"contains", "lower", "startswith"})
TABLE_METHODS = frozenset({"sort_values", "head"})
ALL_METHODS = SERIES_NOARG_METHODS | TABLE_METHODS | {"isin", "groupby"}
FUNCTIONS = frozenset({"len", "abs", "round", "str", "int", "float"})

_BINOP_SYMBOLS = {
    ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/",
    ast.BitAnd: "&", ast.BitOr: "|",
    ast.Pow: "**", ast.Mod: "%", ast.FloorDiv: "//",
    ast.LShift: "<<", ast.RShift: ">>", ast.BitXor: "^", ast.MatMult: "@",
}
_CMP_SYMBOLS = {
    ast.Eq: "==", ast.NotEq: "!=", ast.Lt: "<", ast.LtE: "<=",
    ast.Gt: ">", ast.GtE: ">=",
    ast.In: "in", ast.NotIn: "not in", ast.Is: "is", ast.IsNot: "is not",
}


@dataclass(frozen=True)
class _GroupBy:
    source: nodes.Expr
    key: str


@dataclass(frozen=True)
class _GroupSelect:
    source: nodes.Expr
    key: str
    value: str


def parse(source: str) -> nodes.Expr:
    """Parse one logical line into a dialect Expr.

    Raises EvalError with kind ParseError (not valid Python) or
    UnsupportedSyntax (valid Python outside the dialect).
    """
    if source is None or not source.strip():
        raise parse_error("empty expression")
    text = source.strip()
    if "\n" in text or "\r" in text:
        raise unsupported("multi-line input; expected one logical line")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise _classify_syntax_failure(text, exc) from None
    result = _Translator(text).visit(tree.body)
    if isinstance(result, (_GroupBy, _GroupSelect)):
        raise unsupported(
            "groupby must be followed by a column selection and one aggregation"
        )
    return result


def _classify_syntax_failure(text: str, exc: SyntaxError) -> EvalError:
    # Valid Python that is not a single expression (imports, assignments,
    # multiple statements) is a dialect violation, not a syntax error.
    try:
        module = ast.parse(text, mode="exec")
    except SyntaxError:
        return parse_error(exc.msg or "invalid syntax", exc.offset)
    if len(module.body) > 1:
        return unsupported("multiple statements")
    stmt = module.body[0] if module.body else None
    if isinstance(stmt, (ast.Import, ast.ImportFrom)):
        return unsupported("import statement")
    if isinstance(stmt, (ast.Assign, ast.AugAssign, ast.AnnAssign)):
        return unsupported("assignment statement")
    name = type(stmt).__name__ if stmt is not None else "empty module"
    return unsupported(f"statement of type {name}")


class _Translator:
    def __init__(self, source: str):
        self.source = source

    def _frag(self, node: ast.AST) -> str:
        return self.source[node.col_offset:getattr(node, "end_col_offset", len(self.source))]

    def _fail(self, node: ast.AST, construct: str) -> EvalError:
        return unsupported(construct, offset=node.col_offset)

    def visit(self, node: ast.expr) -> nodes.Expr:
        method = getattr(self, f"_visit_{type(node).__name__}", None)
        if method is None:
            raise self._fail(node, f"construct {type(node).__name__}")
        return method(node)

    def _value(self, node: ast.expr) -> nodes.Expr:
        """Translate a child and forbid dangling groupby intermediates."""
        result = self.visit(node)
        if isinstance(result, (_GroupBy, _GroupSelect)):
            raise self._fail(
                node, "groupby must be followed by a column selection and one aggregation"
            )
        return result

    # -- leaves ---------------------------------------------------------

    def _visit_Constant(self, node: ast.Constant) -> nodes.Expr:
        if isinstance(node.value, (bool, int, float, str)):
            return nodes.Literal(node.value, src=self._frag(node))
        if node.value is None:
            raise self._fail(node, "'None' literal")
        raise self._fail(node, f"literal of type {type(node.value).__name__}")

    def _visit_Name(self, node: ast.Name) -> nodes.Expr:
        if node.id == "df":
            return nodes.TableRef(src="df")
        raise self._fail(node, f"name '{node.id}' (only 'df' is defined)")

    # -- operators ------------------------------------------------------

    def _visit_UnaryOp(self, node: ast.UnaryOp) -> nodes.Expr:
        if isinstance(node.op, ast.USub):
            operand = node.operand
            if isinstance(operand, ast.Constant) and isinstance(operand.value, (int, float)) \
                    and not isinstance(operand.value, bool):
                return nodes.Literal(-operand.value, src=self._frag(node))
            raise self._fail(node, "unary minus on a non-numeric-literal operand")
        if isinstance(node.op, ast.Invert):
            return nodes.MaskCombine("~", (self._value(node.operand),), src=self._frag(node))
        if isinstance(node.op, ast.Not):
            return nodes.BoolCombine("not", (self._value(node.operand),), src=self._frag(node))
        raise self._fail(node, "unary plus")

    def _visit_BinOp(self, node: ast.BinOp) -> nodes.Expr:
        symbol = _BINOP_SYMBOLS.get(type(node.op))
        if symbol is None:
            raise self._fail(node, f"operator {type(node.op).__name__}")
        lhs, rhs = self._value(node.left), self._value(node.right)
        frag = self._frag(node)
        if symbol in nodes.ARITH_OPS:
            return nodes.Arith(lhs, symbol, rhs, src=frag)
        if symbol in ("&", "|"):
            return nodes.MaskCombine(symbol, (lhs, rhs), src=frag)
        raise self._fail(node, f"operator '{symbol}'")

    def _visit_BoolOp(self, node: ast.BoolOp) -> nodes.Expr:
        op = "and" if isinstance(node.op, ast.And) else "or"
        return nodes.BoolCombine(
            op, tuple(self._value(v) for v in node.values), src=self._frag(node)
        )

    def _visit_Compare(self, node: ast.Compare) -> nodes.Expr:
        if len(node.ops) != 1:
            raise self._fail(
                node, "chained comparison; parenthesize each comparison separately"
            )
        symbol = _CMP_SYMBOLS.get(type(node.ops[0]))
        if symbol not in nodes.COMPARE_OPS:
            raise self._fail(node, f"comparison operator '{symbol}'")
        return nodes.Compare(
            self._value(node.left), symbol, self._value(node.comparators[0]),
            src=self._frag(node),
        )

    # -- subscripts and attributes ---------------------------------------

    def _visit_Subscript(self, node: ast.Subscript) -> nodes.Expr:
        if isinstance(node.slice, ast.Slice):
            raise self._fail(node, "slice subscript")
        frag = self._frag(node)
        # df.loc[...], x.iloc[i], x.values[i]
        if isinstance(node.value, ast.Attribute):
            attr = node.value.attr
            if attr == "loc":
                receiver = self._value(node.value.value)
                if isinstance(node.slice, ast.Tuple):
                    if len(node.slice.elts) != 2:
                        raise self._fail(node, "loc with more than two selectors")
                    mask, col = node.slice.elts
                    column = self._const_str(col, "loc column")
                    return nodes.LocSelect(receiver, self._value(mask), column, src=frag)
                return nodes.LocSelect(receiver, self._value(node.slice), None, src=frag)
            if attr in ("iloc", "values"):
                receiver = self._value(node.value.value)
                index = self._const_int(node.slice, f"{attr} index")
                return nodes.IndexAccess(receiver, index, accessor=f".{attr}", src=frag)
        receiver = self.visit(node.value)
        if isinstance(receiver, _GroupBy):
            column = self._const_str(node.slice, "groupby column selection")
            return _GroupSelect(receiver.source, receiver.key, column)
        if isinstance(receiver, _GroupSelect):
            raise self._fail(node, "double column selection after groupby")
        if isinstance(node.slice, ast.Constant) and isinstance(node.slice.value, str):
            return nodes.ColumnSelect(receiver, node.slice.value, src=frag)
        if self._is_const_int(node.slice):
            return nodes.IndexAccess(
                receiver, self._const_int(node.slice, "index"), src=frag
            )
        if isinstance(node.slice, ast.Tuple):
            raise self._fail(node, "tuple subscript outside .loc")
        return nodes.RowFilter(receiver, self._value(node.slice), src=frag)

    def _visit_Attribute(self, node: ast.Attribute) -> nodes.Expr:
        if node.attr == "shape":
            return nodes.ShapeOf(self._value(node.value), src=self._frag(node))
        if node.attr in ("loc", "iloc", "values"):
            raise self._fail(node, f"'.{node.attr}' must be subscripted")
        if node.attr == "str":
            raise self._fail(node, "'.str' must be followed by a string method")
        if node.attr in ALL_METHODS:
            raise self._fail(node, f"attribute '.{node.attr}' without a call")
        raise self._fail(node, f"attribute '.{node.attr}'")

    # -- calls ------------------------------------------------------------

    def _visit_Call(self, node: ast.Call) -> nodes.Expr:
        frag = self._frag(node)
        if isinstance(node.func, ast.Name):
            return self._function_call(node, frag)
        if not isinstance(node.func, ast.Attribute):
            raise self._fail(node, "call of a non-name, non-method expression")
        attr = node.func.attr
        # str accessor: x.str.contains('...') etc.
        if isinstance(node.func.value, ast.Attribute) and node.func.value.attr == "str":
            if attr not in STR_METHODS:
                raise self._fail(node, f"string method '.str.{attr}()'")
            receiver = self._value(node.func.value.value)
            self._reject_keywords(node)
            if attr == "lower":
                self._check_arity(node, attr, 0, 0)
                return nodes.MethodCall(receiver, "str.lower", src=frag)
            self._check_arity(node, attr, 1, 1)
            arg = self._const_str(node.args[0], f"str.{attr} argument")
            return nodes.MethodCall(receiver, f"str.{attr}", (arg,), src=frag)
        receiver = self.visit(node.func.value)
        if isinstance(receiver, _GroupSelect):
            if attr not in GROUP_AGGS:
                raise self._fail(node, f"groupby aggregation '.{attr}()'")
            self._reject_keywords(node)
            self._check_arity(node, attr, 0, 0)
            return nodes.GroupAgg(receiver.source, receiver.key, receiver.value, attr, src=frag)
        if isinstance(receiver, _GroupBy):
            raise self._fail(node, "groupby requires a column selection before aggregation")
        if attr == "groupby":
            self._reject_keywords(node)
            self._check_arity(node, attr, 1, 1)
            key = self._const_str(node.args[0], "groupby key")
            return _GroupBy(receiver, key)
        if attr in SERIES_NOARG_METHODS:
            self._reject_keywords(node)
            self._check_arity(node, attr, 0, 0)
            return nodes.MethodCall(receiver, attr, src=frag)
        if attr == "isin":
            self._reject_keywords(node)
            self._check_arity(node, attr, 1, 1)
            items = self._const_list(node.args[0])
            return nodes.MethodCall(receiver, "isin", (items,), src=frag)
        if attr == "head":
            self._reject_keywords(node)
            self._check_arity(node, attr, 0, 1)
            n = self._const_int(node.args[0], "head argument") if node.args else 5
            return nodes.MethodCall(receiver, "head", (n,), src=frag)
        if attr == "sort_values":
            self._check_arity(node, attr, 1, 1)
            column = self._const_str(node.args[0], "sort_values column")
            ascending = None
            for kw in node.keywords:
                if kw.arg != "ascending":
                    raise self._fail(node, f"keyword argument '{kw.arg}'")
                if not (isinstance(kw.value, ast.Constant) and isinstance(kw.value.value, bool)):
                    raise self._fail(node, "ascending= must be a boolean literal")
                ascending = kw.value.value
            return nodes.MethodCall(receiver, "sort_values", (column,), ascending=ascending, src=frag)
        raise self._fail(node, f"method '.{attr}()' is not in the supported grammar")

    def _function_call(self, node: ast.Call, frag: str) -> nodes.Expr:
        name = node.func.id  # type: ignore[union-attr]
        if name not in FUNCTIONS:
            raise self._fail(node, f"function '{name}'")
        self._reject_keywords(node)
        low, high = (1, 2) if name == "round" else (1, 1)
        self._check_arity(node, name, low, high)
        return nodes.FunctionCall(name, tuple(self._value(a) for a in node.args), src=frag)

    # -- argument helpers --------------------------------------------------

    def _reject_keywords(self, node: ast.Call) -> None:
        for kw in node.keywords:
            raise self._fail(node, f"keyword argument '{kw.arg}'")

    def _check_arity(self, node: ast.Call, name: str, low: int, high: int) -> None:
        if not (low <= len(node.args) <= high):
            expected = str(low) if low == high else f"{low}..{high}"
            raise self._fail(
                node, f"'{name}' takes {expected} argument(s), got {len(node.args)}"
            )

    def _const_str(self, node: ast.expr, what: str) -> str:
        if isinstance(node, ast.Constant) and isinstance(node.value, str):
            return node.value
        raise self._fail(node, f"{what} must be a string literal")

    def _is_const_int(self, node: ast.expr) -> bool:
        if isinstance(node, ast.Constant):
            return isinstance(node.value, int) and not isinstance(node.value, bool)
        return (
            isinstance(node, ast.UnaryOp)
            and isinstance(node.op, ast.USub)
            and isinstance(node.operand, ast.Constant)
            and isinstance(node.operand.value, int)
            and not isinstance(node.operand.value, bool)
        )

    def _const_int(self, node: ast.expr, what: str) -> int:
        if not self._is_const_int(node):
            raise self._fail(node, f"{what} must be an integer literal")
        if isinstance(node, ast.Constant):
            return node.value
        return -node.operand.value  # type: ignore[union-attr]

    def _const_cell(self, node: ast.expr) -> Cell:
        if isinstance(node, ast.Constant) and isinstance(node.value, (bool, int, float, str)):
            return node.value
        if (
            isinstance(node, ast.UnaryOp)
            and isinstance(node.op, ast.USub)
            and isinstance(node.operand, ast.Constant)
            and isinstance(node.operand.value, (int, float))
            and not isinstance(node.operand.value, bool)
        ):
            return -node.operand.value
        raise self._fail(node, "list items must be scalar literals")

    def _const_list(self, node: ast.expr) -> tuple[Cell, ...]:
        if not isinstance(node, (ast.List, ast.Tuple)):
            raise self._fail(node, "isin argument must be a list literal")
        return tuple(self._const_cell(e) for e in node.elts)
