"""FastAPI service wrapping the verification engine.

The service owns the shared gateway (rate limits, transcripts) and the
table store, so many clients can verify claims, answer questions, execute
expressions, build datasets, and run evaluations against one process. The
CLI is a thin client of these endpoints.
"""

from __future__ import annotations

from dataclasses import asdict, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import RunConfig, build_gateway, build_table_store
from ..corrections import AttemptRecord
from ..datasets import (
    CorpusError,
    PerturbRejected,
    build_balanced_ood,
    build_panwiki,
    build_pantabfact,
    derive_wikifact,
    read_entries_jsonl,
    read_tabfact_statements,
    read_wtq_records,
    write_entries_jsonl,
    write_manifest,
)
from ..engine import (
    GRAMMAR_VERSION,
    EvalError,
    coerce_truth,
    execute_answer,
    grammar_text,
    render_value,
    value_to_jsonable,
)
from ..gateway import GatewayError
from ..records import DroppedEntry, StageStats
from ..tables import Table, TableError, load_table
from ..verify import Report, answer_question, evaluate, render_report, run_ablation, verify_claim
from . import schemas


def _load_request_table(source: schemas.TableSource) -> Table:
    try:
        if source.text is not None:
            return load_table(
                source.text, source.format, name=source.name, delimiter=source.delimiter
            )
        path = Path(source.path)
        if not path.is_file():
            raise HTTPException(status_code=400, detail=f"table file not found: {path}")
        return load_table(
            path.read_bytes(), source.format, name=source.name, delimiter=source.delimiter
        )
    except (TableError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"cannot load table: {exc}") from None


def _trace_models(trace: tuple[AttemptRecord, ...]) -> list[schemas.AttemptModel]:
    return [
        schemas.AttemptModel(
            stage=t.stage, attempt=t.attempt, query=t.query, error=t.error, outcome=t.outcome
        )
        for t in trace
    ]


def create_app(config: RunConfig) -> FastAPI:
    app = FastAPI(title="veritab", version=__version__)
    app.state.config = config
    app.state.tables = build_table_store(config)
    app.state.gateway = build_gateway(config)

    def require_gateway():
        if app.state.gateway is None:
            raise HTTPException(
                status_code=400,
                detail="no model gateway configured (set model.base_url or a replay transcript)",
            )
        return app.state.gateway

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(
            status="ok", version=__version__, grammar_version=GRAMMAR_VERSION
        )

    @app.get("/grammar", response_model=schemas.GrammarResponse)
    def grammar() -> schemas.GrammarResponse:
        return schemas.GrammarResponse(version=GRAMMAR_VERSION, text=grammar_text())

    @app.post("/execute", response_model=schemas.ExecuteResponse)
    def execute(request: schemas.ExecuteRequest) -> schemas.ExecuteResponse:
        table = _load_request_table(request.table)
        try:
            value = execute_answer(request.expression, table)
            if request.mode == "verdict":
                return schemas.ExecuteResponse(
                    ok=True, verdict=coerce_truth(value), rendered=None
                )
            return schemas.ExecuteResponse(
                ok=True, rendered=render_value(value), result=value_to_jsonable(value)
            )
        except EvalError as exc:
            return schemas.ExecuteResponse(
                ok=False, error=schemas.ErrorInfo(kind=exc.kind.value, message=exc.message)
            )

    @app.post("/claims/verify", response_model=schemas.VerdictResponse)
    def verify(request: schemas.VerifyRequest) -> schemas.VerdictResponse:
        gateway = require_gateway()
        table = _load_request_table(request.table)
        verdict = verify_claim(
            request.statement, table, gateway, config.corrections,
            config.prompt.max_rows, config.prompt.max_chars,
        )
        return schemas.VerdictResponse(
            outcome=verdict.outcome, query=verdict.query,
            trace=_trace_models(verdict.trace), latency=verdict.latency,
        )

    @app.post("/questions/answer", response_model=schemas.AnswerResponse)
    def answer(request: schemas.AnswerRequest) -> schemas.AnswerResponse:
        gateway = require_gateway()
        table = _load_request_table(request.table)
        outcome = answer_question(
            request.question, table, gateway, config.corrections,
            config.prompt.max_rows, config.prompt.max_chars,
            gold_answer=request.gold_answer,
        )
        return schemas.AnswerResponse(
            failed=outcome.failed,
            rendered=None if outcome.failed else render_value(outcome.value),
            value=None if outcome.failed else value_to_jsonable(outcome.value),
            query=outcome.query,
            trace=_trace_models(outcome.trace),
            latency=outcome.latency,
        )

    @app.post("/datasets/build", response_model=schemas.BuildResponse)
    def build(request: schemas.BuildRequest) -> schemas.BuildResponse:
        return _build_dataset(app, request)

    @app.post("/evaluate", response_model=schemas.ReportResponse)
    def run_evaluation(request: schemas.EvaluateRequest) -> schemas.ReportResponse:
        return _evaluate_dataset(app, request)

    return app


def _dropped_histogram(dropped: list[DroppedEntry]) -> dict[str, int]:
    histogram: dict[str, int] = {}
    for item in dropped:
        histogram[item.reason] = histogram.get(item.reason, 0) + 1
    return histogram


def _build_dataset(app: FastAPI, request: schemas.BuildRequest) -> schemas.BuildResponse:
    config: RunConfig = app.state.config
    tables = app.state.tables
    source = Path(request.source)
    if not source.is_file():
        raise HTTPException(status_code=400, detail=f"source not found: {source}")
    if request.dataset != "wikifact" and app.state.gateway is None:
        raise HTTPException(
            status_code=400, detail=f"building {request.dataset} requires a model gateway"
        )
    seed = request.seed if request.seed is not None else config.seed
    limits = (config.prompt.max_rows, config.prompt.max_chars)
    stats: StageStats | None = None
    dropped: list[DroppedEntry] = []
    skipped_count = 0

    try:
        if request.dataset == "pantabfact":
            records = read_tabfact_statements(source)[: request.limit]
            entries, stats, dropped = build_pantabfact(
                records, tables, app.state.gateway, config.corrections,
                config.workers, *limits,
            )
        elif request.dataset == "panwiki":
            records = read_wtq_records(source)[: request.limit]
            policy = replace(config.corrections, enable_logic=False)
            entries, stats, dropped = build_panwiki(
                records, tables, app.state.gateway, policy, config.workers, *limits
            )
        elif request.dataset == "wikifact":
            records = read_wtq_records(source)[: request.limit]
            entries, skipped = derive_wikifact(
                records, tables, app.state.gateway, config.workers, *limits
            )
            skipped_count = len(skipped)
        else:  # balanced-ood
            if request.n is None:
                raise HTTPException(status_code=400, detail="balanced-ood requires 'n'")
            pool = read_entries_jsonl(source)
            entries = build_balanced_ood(
                pool, tables, app.state.gateway, request.n, seed,
                config.corrections, max_rows=limits[0], max_chars=limits[1],
            )
    except (CorpusError, PerturbRejected, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
    except GatewayError as exc:
        raise HTTPException(status_code=502, detail=f"gateway failure: {exc}") from None

    name = request.output_name or request.dataset
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    entries_path = output_dir / f"{name}.jsonl"
    manifest_path = output_dir / f"{name}.manifest.json"
    manifest = {
        "dataset": request.dataset,
        "source": str(source),
        "entry_count": len(entries),
        "seed": seed,
        "policy": asdict(config.corrections),
        "model_fingerprint": config.model.fingerprint() if config.model else None,
        "stage_stats": stats.to_json() if stats else None,
        "dropped": _dropped_histogram(dropped),
        "skipped": skipped_count,
        "grammar_version": GRAMMAR_VERSION,
    }
    write_entries_jsonl(entries_path, entries)
    write_manifest(manifest_path, manifest)
    return schemas.BuildResponse(
        dataset=request.dataset,
        entries_path=str(entries_path),
        manifest_path=str(manifest_path),
        entry_count=len(entries),
        stage_stats=stats.to_json() if stats else None,
        dropped=_dropped_histogram(dropped),
    )


def _evaluate_dataset(app: FastAPI, request: schemas.EvaluateRequest) -> schemas.ReportResponse:
    config: RunConfig = app.state.config
    gateway = app.state.gateway
    if gateway is None:
        raise HTTPException(status_code=400, detail="evaluation requires a model gateway")
    dataset_path = Path(request.dataset_path)
    if not dataset_path.is_file():
        raise HTTPException(status_code=400, detail=f"dataset not found: {dataset_path}")
    entries = read_entries_jsonl(dataset_path)[: request.limit]
    if not entries:
        raise HTTPException(status_code=400, detail="dataset is empty")
    if any(e.mode != request.mode for e in entries):
        raise HTTPException(
            status_code=400,
            detail=f"dataset {dataset_path.name} is not homogeneous in mode '{request.mode}'",
        )
    policy = config.corrections.disabled() if request.no_corrections else config.corrections
    workers = request.workers or config.workers
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    stem = dataset_path.stem
    results_path = output_dir / f"{stem}.results.jsonl"
    report_path = output_dir / f"{stem}.report.json"
    try:
        if request.ablate:
            report: Report = run_ablation(
                entries, app.state.tables, gateway, policy, request.mode,
                workers, results_path, config.prompt.max_rows, config.prompt.max_chars,
            )
        else:
            report = evaluate(
                entries, app.state.tables, gateway, policy, request.mode,
                workers, results_path, config.prompt.max_rows, config.prompt.max_chars,
            )
    except CorpusError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
    rendered = render_report(report, title=f"{stem} ({request.mode})")
    write_manifest(report_path, report.to_json())
    per_label = {
        label: schemas.PerLabelModel(n=stats.n, accuracy=stats.accuracy)
        for label, stats in report.per_label.items()
    }
    return schemas.ReportResponse(
        n=report.n,
        accuracy=report.accuracy,
        failure_rate=report.failure_rate,
        per_label=per_label,
        ablation=report.ablation,
        results_path=str(results_path),
        report_path=str(report_path),
        rendered=rendered,
    )
