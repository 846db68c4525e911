"""Denotation-to-gold answer matching.

Concrete rules for the approximate match used in QA scoring: both sides
are trimmed and casefolded, numbers compare with absolute tolerance 1e-6
(so 3.0 matches "3"), multi-valued denotations compare as multisets, and
null never matches anything. Gold strings may carry several values
separated by '|' (the WikiTableQuestions convention).
"""

from __future__ import annotations

from .engine.values import ListVal, Scalar, Shape, Value, Vector
from .tables import Cell

NUMERIC_TOLERANCE = 1e-6


def flatten_value(value: Value) -> list[Cell]:
    """The atoms a denotation contributes to answer matching.

    Single-column or single-row tables flatten to their cells, so a result
    like df[mask][['col']] scores the same as the bare column.
    """
    if isinstance(value, Scalar):
        return [value.value]
    if isinstance(value, (Vector, ListVal)):
        return list(value.values)
    if isinstance(value, Shape):
        return list(value.components())
    table = value.table
    return [cell for row in table.rows for cell in row]


def _as_number(text: str) -> float | None:
    try:
        number = float(text.replace(",", "")) if "," in text else float(text)
    except ValueError:
        return None
    return number if number == number else None


def _atom_matches(predicted: Cell, gold: str) -> bool:
    if predicted is None:
        return False
    gold = gold.strip()
    if isinstance(predicted, bool):
        return str(predicted).casefold() == gold.casefold()
    if isinstance(predicted, (int, float)):
        gold_number = _as_number(gold)
        return gold_number is not None and abs(float(predicted) - gold_number) <= NUMERIC_TOLERANCE
    predicted_text = str(predicted).strip()
    predicted_number = _as_number(predicted_text)
    gold_number = _as_number(gold)
    if predicted_number is not None and gold_number is not None:
        return abs(predicted_number - gold_number) <= NUMERIC_TOLERANCE
    return predicted_text.casefold() == gold.casefold()


def match_answer(predicted: Value, gold: str) -> bool:
    """True when the denotation matches the gold answer text."""
    atoms = flatten_value(predicted)
    gold_parts = [p for p in (gold or "").split("|")]
    if len(atoms) != len(gold_parts):
        return False
    remaining = list(atoms)
    for part in gold_parts:
        for i, atom in enumerate(remaining):
            if _atom_matches(atom, part):
                del remaining[i]
                break
        else:
            return False
    return True
