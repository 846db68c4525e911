"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, model_validator


class TableSource(BaseModel):
    """A table either inline (text) or by server-side path."""

    text: Optional[str] = None
    path: Optional[str] = None
    format: str = "csv"
    name: str = "table"
    delimiter: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self) -> "TableSource":
        if (self.text is None) == (self.path is None):
            raise ValueError("provide exactly one of 'text' or 'path'")
        return self


class ErrorInfo(BaseModel):
    kind: str
    message: str


class ExecuteRequest(BaseModel):
    table: TableSource
    expression: str
    mode: Literal["value", "verdict"] = "value"


class ExecuteResponse(BaseModel):
    ok: bool
    rendered: Optional[str] = None
    result: Optional[dict[str, Any]] = None
    verdict: Optional[bool] = None
    error: Optional[ErrorInfo] = None


class AttemptModel(BaseModel):
    stage: str
    attempt: int
    query: str
    error: Optional[str] = None
    outcome: str


class VerifyRequest(BaseModel):
    statement: str = Field(min_length=1)
    table: TableSource


class VerdictResponse(BaseModel):
    outcome: Literal["entailed", "refuted", "failed"]
    query: str
    trace: list[AttemptModel]
    latency: float


class AnswerRequest(BaseModel):
    question: str = Field(min_length=1)
    table: TableSource
    gold_answer: str = ""


class AnswerResponse(BaseModel):
    failed: bool
    rendered: Optional[str] = None
    value: Optional[dict[str, Any]] = None
    query: str
    trace: list[AttemptModel]
    latency: float


class BuildRequest(BaseModel):
    dataset: Literal["pantabfact", "panwiki", "wikifact", "balanced-ood"]
    source: str  # statements JSON (tabfact), records TSV (wtq), entries JSONL (balanced-ood)
    limit: Optional[int] = Field(default=None, ge=1)
    n: Optional[int] = Field(default=None, ge=0)  # balanced-ood pair count
    seed: Optional[int] = None
    output_name: Optional[str] = None


class StageCountModel(BaseModel):
    stage: str
    valid_count: int
    accuracy_pct: float


class BuildResponse(BaseModel):
    dataset: str
    entries_path: str
    manifest_path: str
    entry_count: int
    stage_stats: Optional[dict[str, Any]] = None
    dropped: dict[str, int] = Field(default_factory=dict)


class EvaluateRequest(BaseModel):
    dataset_path: str
    mode: Literal["fact", "qa"]
    ablate: bool = False
    no_corrections: bool = False
    workers: Optional[int] = Field(default=None, ge=1)
    limit: Optional[int] = Field(default=None, ge=1)


class PerLabelModel(BaseModel):
    n: int
    accuracy: Optional[float] = None


class ReportResponse(BaseModel):
    n: int
    accuracy: Optional[float] = None
    failure_rate: Optional[float] = None
    per_label: dict[str, PerLabelModel] = Field(default_factory=dict)
    ablation: Optional[dict[str, Optional[float]]] = None
    results_path: Optional[str] = None
    report_path: Optional[str] = None
    rendered: str = ""


class HealthResponse(BaseModel):
    status: str
    version: str
    grammar_version: str


class GrammarResponse(BaseModel):
    version: str
    text: str
