"""Post-processing passes over candidate queries.

Three composable stages refine model-generated queries: logic correction
(training-time only, needs a gold label), iterative syntax correction
driven by evaluator error messages, and filtering. The same syntax loop
also runs at inference time with a default budget of 4 refinements.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

from .engine import EvalError, execute_answer, execute_verdict
from .gateway import ExtractError, Gateway, GatewayError, PromptKind, extract_payload
from .matching import match_answer
from .records import ENTAILED, FACT, DatasetEntry, DroppedEntry
from .tables import Table, render_for_prompt

# Evaluator messages embedded in correction prompts are capped so prompts
# stay bounded; messages are single-line by construction.
MAX_ERROR_CHARS = 500


@dataclass
class CorrectionPolicy:
    syntax_budget: int = 4
    logic_passes: int = 1
    enable_logic: bool = True
    enable_syntax: bool = True
    enable_filter: bool = True

    def __post_init__(self) -> None:
        if self.syntax_budget < 0 or self.logic_passes < 0:
            raise ValueError("correction budgets must be >= 0")

    def disabled(self) -> "CorrectionPolicy":
        """The ablation baseline: every pass switched off."""
        return replace(self, enable_logic=False, enable_syntax=False, enable_filter=False)


@dataclass
class CandidateQuery:
    source: str
    origin: str = "generated"  # generated | logic_corrected | syntax_corrected
    attempts: int = 0
    last_error: EvalError | None = None


@dataclass(frozen=True)
class AttemptRecord:
    stage: str
    attempt: int
    query: str
    error: str | None
    outcome: str  # ok | error | extract_error | gateway_error


@dataclass(frozen=True)
class SyntaxLoopResult:
    candidate: CandidateQuery
    ok: bool
    failure: str | None  # budget_exhausted | gateway | disabled
    trace: tuple[AttemptRecord, ...]

    @property
    def gateway_calls(self) -> int:
        return self.candidate.attempts


def try_execute(source: str, table: Table, mode: str) -> EvalError | None:
    """None when the query runs end to end in the given mode."""
    try:
        if mode == FACT:
            execute_verdict(source, table)
        else:
            execute_answer(source, table)
    except EvalError as exc:
        return exc
    return None


def run_syntax_loop(
    candidate: CandidateQuery,
    statement: str,
    table: Table,
    gateway: Gateway,
    policy: CorrectionPolicy,
    mode: str = FACT,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> SyntaxLoopResult:
    """Iteratively repair a failing query by feeding the error to the model.

    Performs at most policy.syntax_budget gateway calls; stops at the first
    query that executes. The trace records every attempt.
    """
    trace: list[AttemptRecord] = []
    error = try_execute(candidate.source, table, mode)
    candidate.last_error = error
    trace.append(
        AttemptRecord("execute", 0, candidate.source,
                      str(error) if error else None, "error" if error else "ok")
    )
    if error is None:
        return SyntaxLoopResult(candidate, True, None, tuple(trace))
    if not policy.enable_syntax:
        return SyntaxLoopResult(candidate, False, "disabled", tuple(trace))

    table_text = render_for_prompt(table, max_rows, max_chars)
    while candidate.attempts < policy.syntax_budget:
        slots = {
            "table": table_text,
            "statement": statement,
            "query": candidate.source,
            "error": str(error)[:MAX_ERROR_CHARS],
        }
        try:
            raw = gateway.complete(PromptKind.FACT_SYNTAX_CORRECT, slots)
        except GatewayError as exc:
            trace.append(
                AttemptRecord("syntax_correct", candidate.attempts + 1,
                              candidate.source, str(exc), "gateway_error")
            )
            return SyntaxLoopResult(candidate, False, "gateway", tuple(trace))
        candidate.attempts += 1
        try:
            fixed = extract_payload(raw, "CORRECT PANDA")
        except ExtractError as exc:
            trace.append(
                AttemptRecord("syntax_correct", candidate.attempts,
                              candidate.source, str(exc), "extract_error")
            )
            continue
        candidate.source = fixed
        candidate.origin = "syntax_corrected"
        error = try_execute(fixed, table, mode)
        candidate.last_error = error
        trace.append(
            AttemptRecord("syntax_correct", candidate.attempts, fixed,
                          str(error) if error else None, "error" if error else "ok")
        )
        if error is None:
            return SyntaxLoopResult(candidate, True, None, tuple(trace))
    return SyntaxLoopResult(candidate, False, "budget_exhausted", tuple(trace))


def _label_as_bool_text(label: str) -> str:
    return "True" if label == ENTAILED else "False"


def run_logic_pass(
    entry: DatasetEntry,
    table: Table,
    gateway: Gateway,
    policy: CorrectionPolicy,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> DatasetEntry:
    """Ask the model to repair a query whose verdict contradicts the label.

    Training-dataset stage only (needs the gold label). The corrected query
    is adopted only when it executes AND matches the label; otherwise the
    original is kept and the entry is flagged in its provenance.
    """
    if not policy.enable_logic or entry.mode != FACT:
        return entry
    want = entry.label == ENTAILED
    try:
        if execute_verdict(entry.query, table) == want:
            return entry
    except EvalError:
        return entry  # not executable: that is the syntax stage's job
    table_text = render_for_prompt(table, max_rows, max_chars)
    result = entry
    for _ in range(policy.logic_passes):
        slots = {
            "table": table_text,
            "statement": entry.text,
            "query": result.query,
            "label": _label_as_bool_text(entry.label),
        }
        try:
            raw = gateway.complete(PromptKind.FACT_LOGIC_CORRECT, slots)
            fixed = extract_payload(raw, "CORRECT PANDA")
        except GatewayError:
            return entry.tagged("logic:gateway_error")
        try:
            if execute_verdict(fixed, table) == want:
                return replace(
                    result, query=fixed, provenance=result.provenance + ("logic:corrected",)
                )
        except EvalError:
            pass
    return entry.tagged("logic:uncorrected")


def filter_entries(
    entries: list[DatasetEntry],
    tables: Callable[[str], Table],
) -> tuple[list[DatasetEntry], list[DroppedEntry]]:
    """Keep exactly the entries whose query executes and matches gold.

    Fact entries must verdict-match their label; QA entries must
    denotation-match their answer. Dropped entries carry the reason.
    """
    kept: list[DatasetEntry] = []
    dropped: list[DroppedEntry] = []
    for entry in entries:
        table = tables(entry.table_ref)
        try:
            if entry.mode == FACT:
                matches = execute_verdict(entry.query, table) == (entry.label == ENTAILED)
                mismatch_reason = "label_mismatch"
            else:
                matches = match_answer(execute_answer(entry.query, table), entry.answer or "")
                mismatch_reason = "answer_mismatch"
        except EvalError:
            dropped.append(DroppedEntry(entry, "exec_error"))
            continue
        if matches:
            kept.append(entry)
        else:
            dropped.append(DroppedEntry(entry, mismatch_reason))
    return kept, dropped
