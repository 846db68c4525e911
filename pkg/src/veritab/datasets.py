"""Dataset construction: corpus ingestion, builders, and stage accounting.

Builds the fact-checking training set (pantabfact) and the QA training set
(panwiki), derives entailed claims from QA pairs (wikifact), and
synthesizes the balanced true/false evaluation set (balanced-ood). Every
build re-verifies its output and reports per-stage statistics.
"""

from __future__ import annotations

import json
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .corrections import (
    CandidateQuery,
    CorrectionPolicy,
    filter_entries,
    run_logic_pass,
    run_syntax_loop,
    try_execute,
)
from .engine import execute_answer, execute_verdict
from .gateway import (
    Gateway,
    GatewayError,
    PromptKind,
    extract_payload,
    derive_claim,
    fallback_claim,
    perturb_statement,
)
from .matching import match_answer
from .records import ENTAILED, FACT, QA, REFUTED, DatasetEntry, DroppedEntry, StageStats
from .tables import Table, TableFormat, load_table, render_for_prompt


class CorpusError(Exception):
    pass


class PerturbRejected(Exception):
    """Perturbation kept verifying true (or unverifiable) after all retries."""


@dataclass(frozen=True)
class CorpusProfile:
    """Where a corpus lives and how its table files parse."""

    root: Path
    table_format: TableFormat = TableFormat.CSV
    delimiter: str | None = None
    encoding: str = "utf-8"
    null_tokens: tuple[str, ...] | None = None


@dataclass(frozen=True)
class FactRecord:
    statement: str
    table_ref: str
    label: str  # entailed | refuted


@dataclass(frozen=True)
class QaRecord:
    question: str
    table_ref: str
    answer: str


class TableStore:
    """Resolves 'profile:relative/path' references to cached Tables."""

    def __init__(self, profiles: Mapping[str, CorpusProfile]):
        self.profiles = dict(profiles)
        self._cache: dict[str, Table] = {}
        self._lock = threading.Lock()

    @classmethod
    def in_memory(cls, tables: Mapping[str, Table]) -> "TableStore":
        """A store over already-built tables; used by fixtures and embedders."""
        store = cls({})
        store._cache.update(tables)
        return store

    def resolve(self, ref: str) -> Table:
        with self._lock:
            if ref in self._cache:
                return self._cache[ref]
        table = self._load(ref)
        with self._lock:
            self._cache[ref] = table
        return table

    def __call__(self, ref: str) -> Table:
        return self.resolve(ref)

    def _load(self, ref: str) -> Table:
        profile_name, _, rel = ref.partition(":")
        if rel and profile_name in self.profiles:
            profile = self.profiles[profile_name]
            path = Path(profile.root) / rel
        else:
            # Bare filesystem path; format guessed from the extension.
            path = Path(ref)
            fmt = TableFormat.TSV if path.suffix == ".tsv" else TableFormat.CSV
            profile = CorpusProfile(root=path.parent, table_format=fmt)
        if not path.is_file():
            raise CorpusError(f"table file not found: {path}")
        raw: bytes | str = path.read_bytes()
        if profile.encoding.lower() not in ("utf-8", "utf8"):
            try:
                raw = raw.decode(profile.encoding)
            except (UnicodeDecodeError, LookupError) as exc:
                raise CorpusError(f"cannot decode {path} as {profile.encoding}: {exc}") from None
        kwargs: dict[str, Any] = {"name": ref, "delimiter": profile.delimiter}
        if profile.null_tokens is not None:
            kwargs["null_tokens"] = profile.null_tokens
        return load_table(raw, profile.table_format, **kwargs)


def read_tabfact_statements(
    path: Path | str, profile: str = "tabfact", table_subdir: str = "all_csv"
) -> list[FactRecord]:
    """Read a TabFact statement file: {table_file: [[statements], [labels], caption]}."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    records: list[FactRecord] = []
    for table_file in sorted(payload):
        statements, labels = payload[table_file][0], payload[table_file][1]
        if len(statements) != len(labels):
            raise CorpusError(f"{path}: {table_file} statement/label count mismatch")
        ref = f"{profile}:{table_subdir}/{table_file}" if table_subdir else f"{profile}:{table_file}"
        for statement, label in zip(statements, labels):
            records.append(FactRecord(statement, ref, ENTAILED if label else REFUTED))
    return records


def read_wtq_records(path: Path | str, profile: str = "wikitablequestions") -> list[QaRecord]:
    """Read a WikiTableQuestions examples TSV (id, utterance, context, targetValue)."""
    records: list[QaRecord] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        try:
            q_col, ctx_col, ans_col = (
                header.index("utterance"), header.index("context"), header.index("targetValue")
            )
        except ValueError as exc:
            raise CorpusError(f"{path}: missing expected column: {exc}") from None
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) < len(header):
                continue
            records.append(
                QaRecord(parts[q_col], f"{profile}:{parts[ctx_col]}", parts[ans_col])
            )
    return records


@dataclass
class BuildResult:
    entries: list[DatasetEntry]
    stage_stats: StageStats | None
    dropped: list[DroppedEntry] = field(default_factory=list)


def _parallel_in_order(fn, items: list, workers: int) -> list:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _generate_fact_entry(
    i: int,
    record: FactRecord,
    tables: TableStore,
    gateway: Gateway,
    max_rows: int,
    max_chars: int,
) -> DatasetEntry | DroppedEntry:
    table = tables.resolve(record.table_ref)
    slots = {
        "statement": record.statement,
        "table": render_for_prompt(table, max_rows, max_chars),
    }
    placeholder = DatasetEntry(
        id=f"pantabfact-{i:06d}", mode=FACT, text=record.statement,
        table_ref=record.table_ref, label=record.label,
    )
    try:
        raw = gateway.complete(PromptKind.FACT_GENERATE, slots)
        query = extract_payload(raw, "PANDA")
    except GatewayError:
        return DroppedEntry(placeholder, "generation_failed")
    return DatasetEntry(
        id=placeholder.id, mode=FACT, text=record.statement,
        table_ref=record.table_ref, query=query, label=record.label,
        provenance=("generated",),
    )


def _count_fact_valid(entries: Iterable[DatasetEntry], tables: TableStore) -> int:
    valid = 0
    for entry in entries:
        table = tables.resolve(entry.table_ref)
        try:
            if execute_verdict(entry.query, table) == (entry.label == ENTAILED):
                valid += 1
        except Exception:
            continue
    return valid


def build_pantabfact(
    records: list[FactRecord],
    tables: TableStore,
    gateway: Gateway,
    policy: CorrectionPolicy | None = None,
    workers: int = 1,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> tuple[list[DatasetEntry], StageStats, list[DroppedEntry]]:
    """Generate, correct, filter; report valid counts after every stage.

    Stage order: generate, logic-correct label-mismatching executables,
    syntax-correct non-executables, filter. Valid means the query executes
    and its verdict equals the gold label.
    """
    policy = policy or CorrectionPolicy()
    stats = StageStats(total_source_count=len(records))
    produced = _parallel_in_order(
        lambda pair: _generate_fact_entry(pair[0], pair[1], tables, gateway, max_rows, max_chars),
        list(enumerate(records)),
        workers,
    )
    dropped = [p for p in produced if isinstance(p, DroppedEntry)]
    entries = [p for p in produced if isinstance(p, DatasetEntry)]
    stats.add("Initial Generation", _count_fact_valid(entries, tables))

    if policy.enable_logic:
        entries = _parallel_in_order(
            lambda e: run_logic_pass(e, tables.resolve(e.table_ref), gateway, policy,
                                     max_rows, max_chars),
            entries,
            workers,
        )
    stats.add("Logic Correction", _count_fact_valid(entries, tables))

    if policy.enable_syntax:
        entries = _parallel_in_order(
            lambda e: _syntax_repair_entry(e, tables, gateway, policy, FACT, max_rows, max_chars),
            entries,
            workers,
        )
    stats.add("Syntax Correction", _count_fact_valid(entries, tables))

    if policy.enable_filter:
        kept, filtered_out = filter_entries(entries, tables)
        dropped.extend(filtered_out)
    else:
        kept = entries
    return kept, stats, dropped


def _syntax_repair_entry(
    entry: DatasetEntry,
    tables: TableStore,
    gateway: Gateway,
    policy: CorrectionPolicy,
    mode: str,
    max_rows: int,
    max_chars: int,
) -> DatasetEntry:
    table = tables.resolve(entry.table_ref)
    if try_execute(entry.query, table, mode) is None:
        return entry
    result = run_syntax_loop(
        CandidateQuery(entry.query), entry.text, table, gateway, policy,
        mode, max_rows, max_chars,
    )
    if result.ok:
        return DatasetEntry(
            id=entry.id, mode=entry.mode, text=entry.text, table_ref=entry.table_ref,
            query=result.candidate.source, label=entry.label, answer=entry.answer,
            provenance=entry.provenance + ("syntax:corrected",),
        )
    return entry.tagged(f"syntax:{result.failure}")


def _generate_qa_entry(
    i: int,
    record: QaRecord,
    tables: TableStore,
    gateway: Gateway,
    max_rows: int,
    max_chars: int,
) -> DatasetEntry | DroppedEntry:
    table = tables.resolve(record.table_ref)
    slots = {
        "question": record.question,
        "answer": record.answer,
        "table": render_for_prompt(table, max_rows, max_chars),
    }
    placeholder = DatasetEntry(
        id=f"panwiki-{i:06d}", mode=QA, text=record.question,
        table_ref=record.table_ref, answer=record.answer,
    )
    try:
        raw = gateway.complete(PromptKind.QA_GENERATE, slots)
        query = extract_payload(raw, "PANDA")
    except GatewayError:
        return DroppedEntry(placeholder, "generation_failed")
    return DatasetEntry(
        id=placeholder.id, mode=QA, text=record.question,
        table_ref=record.table_ref, query=query, answer=record.answer,
        provenance=("generated",),
    )


def _count_qa_valid(entries: Iterable[DatasetEntry], tables: TableStore) -> int:
    valid = 0
    for entry in entries:
        table = tables.resolve(entry.table_ref)
        try:
            if match_answer(execute_answer(entry.query, table), entry.answer or ""):
                valid += 1
        except Exception:
            continue
    return valid


def build_panwiki(
    records: list[QaRecord],
    tables: TableStore,
    gateway: Gateway,
    policy: CorrectionPolicy | None = None,
    workers: int = 1,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> tuple[list[DatasetEntry], StageStats, list[DroppedEntry]]:
    """QA dataset build: an entry is kept iff its denotation matches gold.

    Logic correction needs a label, so this builder disables it by default;
    syntax correction and filtering follow the policy.
    """
    policy = policy or CorrectionPolicy(enable_logic=False)
    stats = StageStats(total_source_count=len(records))
    produced = _parallel_in_order(
        lambda pair: _generate_qa_entry(pair[0], pair[1], tables, gateway, max_rows, max_chars),
        list(enumerate(records)),
        workers,
    )
    dropped = [p for p in produced if isinstance(p, DroppedEntry)]
    entries = [p for p in produced if isinstance(p, DatasetEntry)]
    stats.add("Initial Generation", _count_qa_valid(entries, tables))
    stats.add("Logic Correction", _count_qa_valid(entries, tables))  # not applicable to QA

    if policy.enable_syntax:
        entries = _parallel_in_order(
            lambda e: _syntax_repair_entry(e, tables, gateway, policy, QA, max_rows, max_chars),
            entries,
            workers,
        )
    stats.add("Syntax Correction", _count_qa_valid(entries, tables))

    if policy.enable_filter:
        kept, filtered_out = filter_entries(entries, tables)
        dropped.extend(filtered_out)
    else:
        kept = entries
    return kept, stats, dropped


def derive_wikifact(
    records: list[QaRecord],
    tables: TableStore,
    gateway: Gateway | None = None,
    workers: int = 1,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> tuple[list[DatasetEntry], list[tuple[QaRecord, str]]]:
    """Turn QA pairs into declarative claims, all labeled entailed.

    With a gateway the claim text comes from the model; without one (or on
    gateway failure) a deterministic rule-based template is used, so the
    derivation also runs model-free.
    """
    skipped: list[tuple[QaRecord, str]] = []
    eligible: list[tuple[int, QaRecord]] = []
    for i, record in enumerate(records):
        if not record.answer.strip():
            skipped.append((record, "empty_answer"))
            continue
        eligible.append((i, record))

    def derive(pair: tuple[int, QaRecord]) -> DatasetEntry:
        i, record = pair
        provenance = ("derived:wikifact",)
        claim = ""
        if gateway is not None:
            try:
                claim = derive_claim(
                    record.question, record.answer, tables.resolve(record.table_ref),
                    gateway, max_rows, max_chars,
                )
            except GatewayError:
                claim = ""
        if not claim:
            claim = fallback_claim(record.question, record.answer)
            provenance += ("claim:fallback",)
        return DatasetEntry(
            id=f"wikifact-{i:06d}", mode=FACT, text=claim,
            table_ref=record.table_ref, label=ENTAILED, answer=record.answer,
            provenance=provenance,
        )

    entries = _parallel_in_order(derive, eligible, workers)
    return entries, skipped


def _perturb_and_verify(
    entry: DatasetEntry,
    table: Table,
    gateway: Gateway,
    policy: CorrectionPolicy,
    attempts: int,
    max_rows: int,
    max_chars: int,
) -> tuple[str, str]:
    """Produce a refuted twin of an entailed claim, or raise PerturbRejected.

    Acceptance is gated by execution: a check query generated for the
    perturbed claim must verify False.
    """
    table_text = render_for_prompt(table, max_rows, max_chars)
    for _ in range(max(1, attempts)):
        try:
            candidate_text = perturb_statement(entry.text, table, gateway, max_rows, max_chars)
            raw = gateway.complete(
                PromptKind.FACT_GENERATE,
                {"statement": candidate_text, "table": table_text},
            )
            check_query = extract_payload(raw, "PANDA")
        except GatewayError:
            continue
        loop = run_syntax_loop(
            CandidateQuery(check_query), candidate_text, table, gateway, policy,
            FACT, max_rows, max_chars,
        )
        if not loop.ok:
            continue
        if execute_verdict(loop.candidate.source, table) is False:
            return candidate_text, loop.candidate.source
    raise PerturbRejected(entry.id)


def build_balanced_ood(
    wikifact: list[DatasetEntry],
    tables: TableStore,
    gateway: Gateway,
    n: int,
    seed: int = 0,
    policy: CorrectionPolicy | None = None,
    perturb_attempts: int = 3,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> list[DatasetEntry]:
    """Sample n entailed claims and pair each with a verified refuted twin.

    Sampling is seeded; entries whose perturbation keeps verifying true are
    skipped and replaced by the next sample, so the output is exactly
    n entailed + n refuted.
    """
    policy = policy or CorrectionPolicy()
    pool = [e for e in wikifact if e.label == ENTAILED]
    if n > len(pool):
        raise ValueError(f"cannot sample {n} entries from {len(pool)} entailed claims")
    order = random.Random(seed).sample(range(len(pool)), len(pool))
    out: list[DatasetEntry] = []
    produced = 0
    for idx in order:
        if produced == n:
            break
        entry = pool[idx]
        table = tables.resolve(entry.table_ref)
        try:
            perturbed_text, check_query = _perturb_and_verify(
                entry, table, gateway, policy, perturb_attempts, max_rows, max_chars
            )
        except PerturbRejected:
            continue
        out.append(entry.tagged("ood:original"))
        out.append(
            DatasetEntry(
                id=f"{entry.id}-perturbed", mode=FACT, text=perturbed_text,
                table_ref=entry.table_ref, query=check_query, label=REFUTED,
                provenance=("ood:perturbed", "verified:refuted"),
            )
        )
        produced += 1
    if produced < n:
        raise PerturbRejected(
            f"only {produced} of {n} requested perturbations verified refuted"
        )
    return out


# -- dataset files -----------------------------------------------------------


def write_entries_jsonl(path: Path | str, entries: Iterable[DatasetEntry]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_json(), ensure_ascii=False) + "\n")
    tmp.replace(path)


def read_entries_jsonl(path: Path | str) -> list[DatasetEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entries.append(DatasetEntry.from_json(json.loads(line)))
    return entries


def write_manifest(path: Path | str, manifest: dict[str, Any]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, ensure_ascii=False, sort_keys=True)
        fh.write("\n")
    tmp.replace(path)
