"""Evaluation errors with stable, single-line messages.

Error text is a wire format: it gets embedded verbatim in syntax-correction
prompts, so messages must be deterministic for a given (expression, table)
pair and must never span lines.
"""

from __future__ import annotations

from enum import Enum


class ErrorKind(str, Enum):
    PARSE_ERROR = "ParseError"
    UNKNOWN_COLUMN = "UnknownColumn"
    UNKNOWN_METHOD = "UnknownMethod"
    TYPE_MISMATCH = "TypeMismatch"
    INDEX_OUT_OF_RANGE = "IndexOutOfRange"
    DIVISION_BY_ZERO = "DivisionByZero"
    AMBIGUOUS_TRUTH = "AmbiguousTruth"
    UNSUPPORTED_SYNTAX = "UnsupportedSyntax"


class EvalError(Exception):
    def __init__(self, kind: ErrorKind, message: str):
        self.kind = kind
        self.message = " ".join(message.split())  # force single-line
        super().__init__(f"{kind.value}: {self.message}")

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.message}"


def parse_error(message: str, offset: int | None = None) -> EvalError:
    if offset is not None:
        message = f"{message} (offset {offset})"
    return EvalError(ErrorKind.PARSE_ERROR, message)


def unsupported(construct: str, offset: int | None = None) -> EvalError:
    message = construct if offset is None else f"{construct} (offset {offset})"
    return EvalError(ErrorKind.UNSUPPORTED_SYNTAX, message)
