"""Parser and sandboxed evaluator for the single-line table-expression dialect."""

from importlib import resources

from .errors import ErrorKind, EvalError
from .evaluator import coerce_truth, evaluate, execute_answer, execute_verdict
from .parser import parse
from .values import ListVal, Scalar, Shape, SubTable, Value, Vector, render_value, value_to_jsonable

GRAMMAR_VERSION = "1.0"


def grammar_text() -> str:
    """The versioned grammar reference shipped with the package."""
    return resources.files(__package__).joinpath("grammar.md").read_text(encoding="utf-8")


__all__ = [
    "ErrorKind",
    "EvalError",
    "GRAMMAR_VERSION",
    "ListVal",
    "Scalar",
    "Shape",
    "SubTable",
    "Value",
    "Vector",
    "coerce_truth",
    "evaluate",
    "execute_answer",
    "execute_verdict",
    "grammar_text",
    "parse",
    "render_value",
    "value_to_jsonable",
]
