"""End-to-end claim verification, question answering, and evaluation.

Inference runs generate -> extract -> syntax-repair -> execute. Failures
are never surfaced as exceptions: they are encoded in the Verdict and
score as incorrect, which keeps accuracy definitions honest across
ablations.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .corrections import AttemptRecord, CandidateQuery, CorrectionPolicy, run_syntax_loop
from .engine import Value, execute_answer, execute_verdict, value_to_jsonable
from .gateway import Gateway, GatewayError, PromptKind, extract_payload
from .matching import match_answer
from .records import ENTAILED, FACT, REFUTED, DatasetEntry
from .tables import Table, render_for_prompt

FAILED = "failed"


@dataclass(frozen=True)
class Verdict:
    outcome: str  # entailed | refuted | failed
    query: str
    trace: tuple[AttemptRecord, ...]
    latency: float


@dataclass(frozen=True)
class QaOutcome:
    value: Value | None  # None when failed
    failed: bool
    query: str
    trace: tuple[AttemptRecord, ...]
    latency: float


def _generate_query(
    kind: PromptKind, slots: dict[str, str], gateway: Gateway
) -> tuple[str | None, AttemptRecord | None]:
    try:
        raw = gateway.complete(kind, slots)
        return extract_payload(raw, "PANDA"), None
    except GatewayError as exc:
        record = AttemptRecord("generate", 0, "", str(exc), "gateway_error")
        return None, record


def verify_claim(
    statement: str,
    table: Table,
    gateway: Gateway,
    policy: CorrectionPolicy | None = None,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> Verdict:
    """Classify a statement as entailed or refuted by executing a generated query.

    A query that cannot be generated or repaired within budget yields a
    'failed' verdict; callers score that as incorrect, never as a guess.
    """
    policy = policy or CorrectionPolicy()
    started = time.monotonic()
    slots = {"statement": statement, "table": render_for_prompt(table, max_rows, max_chars)}
    query, failure = _generate_query(PromptKind.FACT_GENERATE, slots, gateway)
    if query is None:
        return Verdict(FAILED, "", (failure,), time.monotonic() - started)
    result = run_syntax_loop(
        CandidateQuery(query), statement, table, gateway, policy, FACT, max_rows, max_chars
    )
    latency = time.monotonic() - started
    if not result.ok:
        return Verdict(FAILED, result.candidate.source, result.trace, latency)
    verdict = execute_verdict(result.candidate.source, table)
    return Verdict(
        ENTAILED if verdict else REFUTED, result.candidate.source, result.trace, latency
    )


def answer_question(
    question: str,
    table: Table,
    gateway: Gateway,
    policy: CorrectionPolicy | None = None,
    max_rows: int = 50,
    max_chars: int = 4000,
    gold_answer: str = "",
) -> QaOutcome:
    """Retrieve an answer denotation by executing a generated query.

    The QA template carries an answer slot because dataset generation knows
    the target; at inference it renders empty so evaluation never leaks the
    gold answer into the prompt.
    """
    policy = policy or CorrectionPolicy()
    started = time.monotonic()
    slots = {
        "question": question,
        "answer": gold_answer,
        "table": render_for_prompt(table, max_rows, max_chars),
    }
    query, failure = _generate_query(PromptKind.QA_GENERATE, slots, gateway)
    if query is None:
        return QaOutcome(None, True, "", (failure,), time.monotonic() - started)
    result = run_syntax_loop(
        CandidateQuery(query), question, table, gateway, policy, "qa", max_rows, max_chars
    )
    latency = time.monotonic() - started
    if not result.ok:
        return QaOutcome(None, True, result.candidate.source, result.trace, latency)
    value = execute_answer(result.candidate.source, table)
    return QaOutcome(value, False, result.candidate.source, result.trace, latency)


@dataclass(frozen=True)
class EntryResult:
    entry_id: str
    query: str
    outcome: str  # entailed | refuted | failed | answer text repr
    y: int  # the 0/1 correctness indicator
    label: str | None
    failed: bool
    trace: tuple[AttemptRecord, ...]

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.entry_id,
            "query": self.query,
            "outcome": self.outcome,
            "y": self.y,
            "label": self.label,
            "failed": self.failed,
            "trace": [
                {
                    "stage": t.stage, "attempt": t.attempt, "query": t.query,
                    "error": t.error, "outcome": t.outcome,
                }
                for t in self.trace
            ],
        }


@dataclass(frozen=True)
class LabelStats:
    n: int
    correct: int

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.n if self.n else None


@dataclass
class Report:
    """Accuracy aggregates over one evaluation run."""

    n: int
    correct: int
    failures: int
    per_label: dict[str, LabelStats]
    per_entry: list[EntryResult]
    ablation: dict[str, float | None] | None = None

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.n if self.n else None

    @property
    def failure_rate(self) -> float | None:
        return self.failures / self.n if self.n else None

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "failure_rate": self.failure_rate,
            "per_label": {
                label: {"n": stats.n, "accuracy": stats.accuracy}
                for label, stats in sorted(self.per_label.items())
            },
            "ablation": self.ablation,
        }


def evaluate(
    entries: list[DatasetEntry],
    tables,
    gateway: Gateway,
    policy: CorrectionPolicy | None = None,
    mode: str = FACT,
    workers: int = 1,
    results_path: Path | str | None = None,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> Report:
    """Score a dataset: the indicator is 1 iff the pipeline output equals gold.

    Fact mode compares the verdict with the entry label; QA mode matches
    the denotation against the gold answer. Failed entries score 0 and are
    counted in failure_rate.
    """
    policy = policy or CorrectionPolicy()
    if any(e.mode != mode for e in entries):
        raise ValueError(f"dataset is not homogeneous in mode {mode!r}")

    def score(entry: DatasetEntry) -> EntryResult:
        table = tables(entry.table_ref)
        if mode == FACT:
            verdict = verify_claim(entry.text, table, gateway, policy, max_rows, max_chars)
            y = int(verdict.outcome == entry.label)
            return EntryResult(
                entry.id, verdict.query, verdict.outcome, y, entry.label,
                verdict.outcome == FAILED, verdict.trace,
            )
        qa = answer_question(entry.text, table, gateway, policy, max_rows, max_chars)
        y = int(not qa.failed and match_answer(qa.value, entry.answer or ""))
        outcome = FAILED if qa.failed else json.dumps(value_to_jsonable(qa.value))
        return EntryResult(entry.id, qa.query, outcome, y, None, qa.failed, qa.trace)

    if workers <= 1:
        results = [score(e) for e in entries]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(score, entries))

    per_label: dict[str, LabelStats] = {}
    if mode == FACT:
        for label in (ENTAILED, REFUTED):
            scored = [r for e, r in zip(entries, results) if e.label == label]
            if scored:
                per_label[label] = LabelStats(len(scored), sum(r.y for r in scored))
    report = Report(
        n=len(results),
        correct=sum(r.y for r in results),
        failures=sum(1 for r in results if r.failed),
        per_label=per_label,
        per_entry=results,
    )
    if results_path is not None:
        path = Path(results_path)
        with open(path, "w", encoding="utf-8") as fh:
            for r in results:
                fh.write(json.dumps(r.to_json(), ensure_ascii=False) + "\n")
    return report


def run_ablation(
    entries: list[DatasetEntry],
    tables,
    gateway: Gateway,
    policy: CorrectionPolicy | None = None,
    mode: str = FACT,
    workers: int = 1,
    results_path: Path | str | None = None,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> Report:
    """Evaluate twice - corrections disabled, then enabled - and report both."""
    policy = policy or CorrectionPolicy()
    without = evaluate(
        entries, tables, gateway, policy.disabled(), mode, workers,
        None, max_rows, max_chars,
    )
    with_corr = evaluate(
        entries, tables, gateway, policy, mode, workers, results_path, max_rows, max_chars,
    )
    with_corr.ablation = {"no_corr": without.accuracy, "with_corr": with_corr.accuracy}
    return with_corr


def render_report(report: Report, title: str = "evaluation") -> str:
    """Human-readable report table."""

    def pct(x: float | None) -> str:
        return "n/a" if x is None else f"{100 * x:.2f}%"

    lines = [
        f"== {title} ==",
        f"instances: {report.n}",
        f"accuracy:  {pct(report.accuracy)}",
        f"failures:  {report.failures} ({pct(report.failure_rate)})",
    ]
    if report.per_label:
        lines.append("per label:")
        naming = {REFUTED: "All False", ENTAILED: "All True"}
        for label in (REFUTED, ENTAILED):
            if label in report.per_label:
                stats = report.per_label[label]
                lines.append(f"  {naming[label]:<9} {pct(stats.accuracy)}  (n={stats.n})")
        lines.append(f"  {'Overall':<9} {pct(report.accuracy)}  (n={report.n})")
    if report.ablation is not None:
        lines.append(
            f"ablation:  No Corr. {pct(report.ablation['no_corr'])} | "
            f"With Corr. {pct(report.ablation['with_corr'])}"
        )
    return "\n".join(lines)
