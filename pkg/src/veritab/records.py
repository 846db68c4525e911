"""Dataset entry and stage-accounting records shared across pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

ENTAILED = "entailed"
REFUTED = "refuted"

FACT = "fact"
QA = "qa"


@dataclass(frozen=True)
class DatasetEntry:
    """One statement/question paired with a table reference and a query.

    Fact entries carry a label, QA entries carry an answer. `query` may be
    empty for evaluation-only sets (claims derived from QA pairs), where
    queries are generated at inference time.
    """

    id: str
    mode: str  # FACT or QA
    text: str  # the statement (fact) or question (qa)
    table_ref: str
    query: str = ""
    label: str | None = None
    answer: str | None = None
    provenance: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in (FACT, QA):
            raise ValueError(f"mode must be '{FACT}' or '{QA}', got {self.mode!r}")
        if self.mode == FACT and self.label not in (ENTAILED, REFUTED):
            raise ValueError(f"fact entry {self.id} needs an entailed/refuted label")
        if self.mode == QA and self.answer is None:
            raise ValueError(f"qa entry {self.id} needs an answer")
        if "\n" in self.query or "\r" in self.query:
            raise ValueError(f"entry {self.id}: query must be a single line")

    def tagged(self, *tags: str) -> "DatasetEntry":
        return replace(self, provenance=self.provenance + tags)

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "mode": self.mode,
            "text": self.text,
            "table_ref": self.table_ref,
            "query": self.query,
            "label": self.label,
            "answer": self.answer,
            "provenance": list(self.provenance),
        }

    @classmethod
    def from_json(cls, record: dict[str, Any]) -> "DatasetEntry":
        return cls(
            id=record["id"],
            mode=record["mode"],
            text=record["text"],
            table_ref=record["table_ref"],
            query=record.get("query", ""),
            label=record.get("label"),
            answer=record.get("answer"),
            provenance=tuple(record.get("provenance", ())),
        )


@dataclass(frozen=True)
class StageCount:
    stage: str
    valid_count: int
    accuracy_pct: float


@dataclass
class StageStats:
    """Per-stage counts of executable, gold-consistent queries.

    accuracy_pct is valid_count / total_source_count * 100; valid counts
    must be non-decreasing across Initial -> Logic -> Syntax.
    """

    total_source_count: int
    stages: list[StageCount] = field(default_factory=list)

    def add(self, stage: str, valid_count: int) -> None:
        pct = 100.0 * valid_count / self.total_source_count if self.total_source_count else 0.0
        self.stages.append(StageCount(stage, valid_count, pct))

    def validate_monotone(self) -> None:
        counts = [s.valid_count for s in self.stages]
        if any(b < a for a, b in zip(counts, counts[1:])):
            raise ValueError(f"stage valid counts decreased: {counts}")

    def to_json(self) -> dict[str, Any]:
        return {
            "total_source_count": self.total_source_count,
            "stages": [
                {
                    "stage": s.stage,
                    "valid_count": s.valid_count,
                    "accuracy_pct": round(s.accuracy_pct, 2),
                }
                for s in self.stages
            ],
        }


@dataclass(frozen=True)
class DroppedEntry:
    entry: DatasetEntry
    reason: str  # generation_failed | exec_error | label_mismatch | answer_mismatch
