"""Run configuration: one declarative YAML file with a section per module.

CLI flags override config values; environment variables override secrets
only (MODEL_API_KEY; MODEL_BASE_URL fills in a missing model.base_url).
Unknown keys are rejected so typos fail fast, before any pipeline starts.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .corrections import CorrectionPolicy
from .datasets import CorpusProfile, TableStore
from .gateway import (
    Gateway,
    HttpGateway,
    ModelConfig,
    TranscriptRecorder,
    TranscriptReplayGateway,
)
from .tables import TableFormat


class ConfigError(Exception):
    pass


@dataclass
class PromptLimits:
    max_rows: int = 50
    max_chars: int = 4000


@dataclass
class RunConfig:
    corpora: dict[str, CorpusProfile] = field(default_factory=dict)
    model: ModelConfig | None = None
    corrections: CorrectionPolicy = field(default_factory=CorrectionPolicy)
    prompt: PromptLimits = field(default_factory=PromptLimits)
    workers: int = 1
    seed: int = 0
    output_dir: Path = Path("out")
    transcript_record: Path | None = None
    transcript_replay: Path | None = None
    audit_log: Path | None = None

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError("run.workers must be >= 1")


def _check_keys(section: str, mapping: dict, allowed: set[str]) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(unknown))}")


def _corpus_profile(name: str, raw: dict) -> CorpusProfile:
    _check_keys(f"corpora.{name}", raw, {"root", "table_format", "delimiter", "encoding", "null_tokens"})
    if "root" not in raw:
        raise ConfigError(f"corpora.{name} needs a 'root' path")
    try:
        fmt = TableFormat(raw.get("table_format", "csv"))
    except ValueError:
        raise ConfigError(
            f"corpora.{name}.table_format must be one of "
            f"{', '.join(f.value for f in TableFormat)}"
        ) from None
    null_tokens = raw.get("null_tokens")
    return CorpusProfile(
        root=Path(raw["root"]),
        table_format=fmt,
        delimiter=raw.get("delimiter"),
        encoding=raw.get("encoding", "utf-8"),
        null_tokens=tuple(null_tokens) if null_tokens is not None else None,
    )


def _model_config(raw: dict) -> ModelConfig:
    allowed = {f.name for f in fields(ModelConfig)}
    _check_keys("model", raw, allowed)
    base_url = raw.get("base_url") or os.environ.get("MODEL_BASE_URL", "")
    if not base_url:
        raise ConfigError("model.base_url missing (or set MODEL_BASE_URL)")
    try:
        return ModelConfig(**{**raw, "base_url": base_url})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model config: {exc}") from None


def _corrections(raw: dict) -> CorrectionPolicy:
    allowed = {f.name for f in fields(CorrectionPolicy)}
    _check_keys("corrections", raw, allowed)
    try:
        return CorrectionPolicy(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid corrections config: {exc}") from None


def parse_config(data: dict[str, Any]) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys("config", data, {"corpora", "model", "corrections", "prompt", "run"})
    corpora = {
        name: _corpus_profile(name, raw or {})
        for name, raw in (data.get("corpora") or {}).items()
    }
    model = _model_config(data["model"]) if data.get("model") else None
    corrections = _corrections(data.get("corrections") or {})
    prompt_raw = data.get("prompt") or {}
    _check_keys("prompt", prompt_raw, {"max_rows", "max_chars"})
    prompt = PromptLimits(**prompt_raw)
    run_raw = data.get("run") or {}
    _check_keys(
        "run",
        run_raw,
        {"workers", "seed", "output_dir", "transcript_record", "transcript_replay", "audit_log"},
    )
    to_path = lambda v: Path(v) if v else None  # noqa: E731
    return RunConfig(
        corpora=corpora,
        model=model,
        corrections=corrections,
        prompt=prompt,
        workers=int(run_raw.get("workers", 1)),
        seed=int(run_raw.get("seed", 0)),
        output_dir=Path(run_raw.get("output_dir", "out")),
        transcript_record=to_path(run_raw.get("transcript_record")),
        transcript_replay=to_path(run_raw.get("transcript_replay")),
        audit_log=to_path(run_raw.get("audit_log")),
    )


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    return parse_config(data)


def build_gateway(config: RunConfig) -> Gateway | None:
    """Wire the configured gateway, honoring transcript record/replay."""
    if config.transcript_replay is not None:
        if not Path(config.transcript_replay).is_file():
            raise ConfigError(f"transcript not found: {config.transcript_replay}")
        gateway: Gateway = TranscriptReplayGateway(config.transcript_replay)
    elif config.model is not None:
        gateway = HttpGateway(config.model, audit_log=config.audit_log)
    else:
        return None
    if config.transcript_record is not None:
        gateway = TranscriptRecorder(gateway, config.transcript_record)
    return gateway


def build_table_store(config: RunConfig) -> TableStore:
    return TableStore(config.corpora)
