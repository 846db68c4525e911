"""Chat-completion gateway: prompt templates, transport, payload extraction.

One gateway abstraction serves every pipeline role (dataset generation,
inference, correction); which endpoint it points at is pure configuration.
Requests are built deterministically from (prompt kind, slots, config), so
runs can be recorded to and replayed from transcripts byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx

from .tables import Table, render_for_prompt


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    pass


class AuthError(GatewayError):
    pass


class EndpointError(GatewayError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"endpoint returned {status}: {body[:200]}")


class ExtractError(GatewayError):
    """Model text did not contain the requested JSON payload."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason  # no_json | wrong_key | non_string
        super().__init__(f"{reason}: {detail}" if detail else reason)


class PromptKind(str, Enum):
    FACT_GENERATE = "fact_generate"
    FACT_LOGIC_CORRECT = "fact_logic_correct"
    FACT_SYNTAX_CORRECT = "fact_syntax_correct"
    QA_GENERATE = "qa_generate"
    PERTURB = "perturb"
    CLAIM_DERIVE = "claim_derive"


@dataclass(frozen=True)
class PromptTemplate:
    instructions: str
    sections: tuple[tuple[str, str], ...]  # (heading, slot name)
    payload_key: str

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(slot for _, slot in self.sections)


_FACT_GENERATE_INSTRUCTIONS = """\
You are a Python expert specializing in pandas. Your task is to translate the given natural language statement into a single-line pandas expression.
This expression must be valid and executable to verify the truth of the statement using the provided table.
Consider the following:

1. The table is represented as a pandas DataFrame named df.

2. Do not include explanations, comments, or multiline outputs.

3. Ensure the output is concise, correct, and when run outputs either True or False, and strictly in the following Json Format with a single key "PANDA":
{"PANDA": "<your Pandas code>"}"""

_FACT_LOGIC_CORRECT_INSTRUCTIONS = """\
You are an expert in Python with a specialization in pandas. Your task is to verify and correct a given pandas code that translates a natural language statement into a pandas expression. The corrected pandas code must accurately evaluate the truth of the statement when applied to the given table.
Requirements:

1. The table is represented as a pandas DataFrame named df.

2. The pandas code must evaluate to a boolean value (True or False) using the snippet: str(bool(eval(pandas_code))).

3. The corrected pandas code should match the truth value indicated by the provided "Label".

4. Ensure the output is concise, correct, and when run outputs either True or False, and strictly in the following Json Format with a single key "CORRECT PANDA":
{"CORRECT PANDA": "<your Pandas code>"}"""

_FACT_SYNTAX_CORRECT_INSTRUCTIONS = """\
You are a Python expert specializing in pandas. Your task is to correct a pandas code that translates a given natural language statement into a pandas expression. The code, along with the specific error it contains, is provided. Your corrected pandas_code must be valid and executable by running the code snippet str(bool(eval(pandas_code))) ensuring it accurately evaluates the truth of the statement using the provided table with no errors.

Make sure the pandas_code is of type boolean.
Consider the following:

1. The table is represented as a pandas DataFrame named df.

2. Do not include explanations, comments, or multiline outputs.

3. Ensure the output is concise, correct, and when run outputs either True or False, and strictly in the following Json Format with a single key "CORRECT PANDA":
{"CORRECT PANDA": "<your Pandas code>"}"""

_QA_GENERATE_INSTRUCTIONS = """\
You are a Python expert specializing in pandas. You are given a table, a question, and an answer. Your task is to translate the given natural language question into a single-line pandas expression.
This expression, which acts like a query, must be valid and executable so that running the pandas expression will output the answer to the question.
Consider the following:

1. The table is represented as a pandas DataFrame named df.

2. Do not include explanations, comments, or multiline outputs.

3. Ensure the output is concise, correct, and when run, it outputs the correct given answer, and strictly follows the Json format:
{"PANDA": "<your Pandas code>"}"""

# The two prompts below have no published wording; they follow the same
# conventions as the generation prompts above.
_PERTURB_INSTRUCTIONS = """\
You are a careful editor of factual statements about tables. You are given a table and a statement that is true based on the table. Your task is to slightly modify the statement, altering one fact based on the table, so that the modified statement is factually incorrect according to the table.
Consider the following:

1. Change as little wording as possible; alter exactly one fact (a value, a name, or a relation).

2. The modified statement must be contradicted by the table.

3. Output strictly in the following Json Format with a single key "STATEMENT":
{"STATEMENT": "<your modified statement>"}"""

_CLAIM_DERIVE_INSTRUCTIONS = """\
You are a precise technical writer. You are given a table, a question about the table, and the correct answer. Your task is to rewrite the question and its answer as one short declarative statement that asserts the answer as a fact based on the table.
Consider the following:

1. The statement must be true given the table and must mention the answer explicitly.

2. Do not add information that is not in the question or the answer.

3. Output strictly in the following Json Format with a single key "STATEMENT":
{"STATEMENT": "<your statement>"}"""

TEMPLATES: dict[PromptKind, PromptTemplate] = {
    PromptKind.FACT_GENERATE: PromptTemplate(
        _FACT_GENERATE_INSTRUCTIONS,
        (("Table", "table"), ("Statement", "statement")),
        "PANDA",
    ),
    PromptKind.FACT_LOGIC_CORRECT: PromptTemplate(
        _FACT_LOGIC_CORRECT_INSTRUCTIONS,
        (("Table", "table"), ("Statement", "statement"),
         ("Pandas code", "query"), ("Label", "label")),
        "CORRECT PANDA",
    ),
    PromptKind.FACT_SYNTAX_CORRECT: PromptTemplate(
        _FACT_SYNTAX_CORRECT_INSTRUCTIONS,
        (("Table", "table"), ("Statement", "statement"),
         ("Pandas code", "query"), ("Error", "error")),
        "CORRECT PANDA",
    ),
    PromptKind.QA_GENERATE: PromptTemplate(
        _QA_GENERATE_INSTRUCTIONS,
        (("Table", "table"), ("Question", "question"), ("Answer", "answer")),
        "PANDA",
    ),
    PromptKind.PERTURB: PromptTemplate(
        _PERTURB_INSTRUCTIONS,
        (("Table", "table"), ("Statement", "statement")),
        "STATEMENT",
    ),
    PromptKind.CLAIM_DERIVE: PromptTemplate(
        _CLAIM_DERIVE_INSTRUCTIONS,
        (("Table", "table"), ("Question", "question"), ("Answer", "answer")),
        "STATEMENT",
    ),
}


def render_prompt(kind: PromptKind, slots: Mapping[str, str]) -> str:
    template = TEMPLATES[kind]
    missing = [s for s in template.slots if s not in slots]
    if missing:
        raise ValueError(f"prompt {kind.value} is missing slots: {', '.join(missing)}")
    parts = [template.instructions]
    for heading, slot in template.sections:
        parts.append(f"{heading}:\n{slots[slot]}")
    return "\n\n".join(parts)


def request_key(kind: PromptKind, slots: Mapping[str, str]) -> str:
    canonical = json.dumps(
        {"kind": kind.value, "slots": dict(sorted(slots.items()))},
        sort_keys=True, ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RawModelOutput:
    text: str
    usage: dict = field(default_factory=dict)
    latency: float = 0.0


class Gateway(Protocol):
    def complete(self, kind: PromptKind, slots: Mapping[str, str]) -> RawModelOutput: ...


@dataclass
class ModelConfig:
    base_url: str
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 0.5
    max_in_flight: int = 8
    requests_per_second: float | None = None
    api_key_env: str = "MODEL_API_KEY"

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def fingerprint(self) -> str:
        """Hash of the non-secret fields, recorded in dataset manifests."""
        payload = {k: v for k, v in self.__dict__.items() if k != "api_key_env"}
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode("utf-8")
        ).hexdigest()[:16]


class _TokenBucket:
    def __init__(self, rate: float):
        self.rate = rate
        self.capacity = max(1.0, rate)
        self.tokens = self.capacity
        self.updated = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


class HttpGateway:
    """OpenAI-compatible chat-completion client with retries and rate limits.

    Thread-safe: a bounded in-flight semaphore and an optional token-bucket
    rate limit apply across all callers. Requests are idempotent, so retry
    never duplicates side effects.
    """

    def __init__(
        self,
        config: ModelConfig,
        transport: httpx.BaseTransport | None = None,
        audit_log: Path | str | None = None,
    ):
        self.config = config
        self._api_key = os.environ.get(config.api_key_env, "")
        self._client = httpx.Client(timeout=config.timeout, transport=transport)
        self._in_flight = threading.Semaphore(max(1, config.max_in_flight))
        self._bucket = (
            _TokenBucket(config.requests_per_second)
            if config.requests_per_second
            else None
        )
        self._audit_path = Path(audit_log) if audit_log else None
        self._audit_lock = threading.Lock()

    def complete(self, kind: PromptKind, slots: Mapping[str, str]) -> RawModelOutput:
        prompt = render_prompt(kind, slots)
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        last_error: Exception | None = None
        started = time.monotonic()
        with self._in_flight:
            for attempt in range(self.config.max_retries + 1):
                if self._bucket:
                    self._bucket.acquire()
                try:
                    response = self._client.post(url, json=body, headers=headers)
                except httpx.HTTPError as exc:
                    last_error = exc
                else:
                    if response.status_code in (401, 403):
                        raise AuthError(f"endpoint rejected credentials ({response.status_code})")
                    if 200 <= response.status_code < 300:
                        output = self._parse_response(response, started)
                        self._audit(kind, slots, prompt, output)
                        return output
                    if response.status_code < 500:
                        raise EndpointError(response.status_code, response.text)
                    last_error = EndpointError(response.status_code, response.text)
                if attempt < self.config.max_retries:
                    time.sleep(self.config.backoff_base * (2 ** attempt))
        raise TransportError(
            f"request failed after {self.config.max_retries + 1} attempts: {last_error}"
        )

    def _parse_response(self, response: httpx.Response, started: float) -> RawModelOutput:
        try:
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EndpointError(response.status_code, f"malformed completion body: {exc}")
        return RawModelOutput(
            text=text,
            usage=payload.get("usage") or {},
            latency=time.monotonic() - started,
        )

    def _audit(
        self, kind: PromptKind, slots: Mapping[str, str], prompt: str, output: RawModelOutput
    ) -> None:
        if self._audit_path is None:
            return
        record = {
            "ts": time.time(),
            "kind": kind.value,
            "key": request_key(kind, slots),
            "prompt": prompt,
            "response": output.text,
            "usage": output.usage,
            "latency": output.latency,
        }
        line = json.dumps(record, ensure_ascii=False)
        with self._audit_lock:
            with open(self._audit_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


class ScriptedGateway:
    """In-process stub: answers from a callable. Used by tests and demos."""

    def __init__(self, script: Callable[[PromptKind, Mapping[str, str]], str]):
        self.script = script
        self.calls: list[tuple[PromptKind, dict[str, str]]] = []
        self._lock = threading.Lock()

    def complete(self, kind: PromptKind, slots: Mapping[str, str]) -> RawModelOutput:
        render_prompt(kind, slots)  # validate slots exactly like the live gateway
        with self._lock:
            self.calls.append((kind, dict(slots)))
        return RawModelOutput(text=self.script(kind, slots))


class TranscriptRecorder:
    """Wraps a gateway and appends every exchange to a JSON-lines transcript."""

    def __init__(self, inner: Gateway, path: Path | str):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()

    def complete(self, kind: PromptKind, slots: Mapping[str, str]) -> RawModelOutput:
        output = self.inner.complete(kind, slots)
        record = {
            "key": request_key(kind, slots),
            "kind": kind.value,
            "slots": dict(slots),
            "text": output.text,
            "usage": output.usage,
        }
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        return output


class TranscriptReplayGateway:
    """Replays a recorded transcript; requests not in it fail as transport errors.

    Responses for a repeated identical request are served in recorded order,
    then the last one sticks, which keeps deterministic retry loops working.
    """

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._responses: dict[str, deque[str]] = {}
        self._last: dict[str, str] = {}
        self._lock = threading.Lock()
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                self._responses.setdefault(record["key"], deque()).append(record["text"])
                self._last[record["key"]] = record["text"]

    def complete(self, kind: PromptKind, slots: Mapping[str, str]) -> RawModelOutput:
        key = request_key(kind, slots)
        with self._lock:
            queue = self._responses.get(key)
            if queue is None:
                raise TransportError(f"transcript {self.path} has no response for {kind.value}")
            text = queue.popleft() if queue else self._last[key]
        return RawModelOutput(text=text)


def extract_payload(raw: RawModelOutput | str, key: str) -> str:
    """Pull the value of `key` out of the first JSON object in model text.

    Purely textual: surrounding prose and code fences are skipped by
    scanning for decodable JSON objects. The returned query is trimmed to a
    single line. Model text is never executed here.
    """
    text = raw.text if isinstance(raw, RawModelOutput) else raw
    decoder = json.JSONDecoder()
    found_object = False
    found_non_string = False
    position = text.find("{")
    while position != -1:
        try:
            obj, _ = decoder.raw_decode(text, position)
        except ValueError:
            position = text.find("{", position + 1)
            continue
        if isinstance(obj, dict):
            found_object = True
            if key in obj:
                if isinstance(obj[key], str):
                    return " ".join(obj[key].splitlines()).strip()
                found_non_string = True
        position = text.find("{", position + 1)
    if found_non_string:
        raise ExtractError("non_string", f"key {key!r} is present but not a string")
    if found_object:
        raise ExtractError("wrong_key", f"no JSON object contains key {key!r}")
    raise ExtractError("no_json", "no JSON object found in model output")


def perturb_statement(
    statement: str,
    table: Table,
    gateway: Gateway,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> str:
    """Ask the model for a minimally edited, now-false version of a statement.

    The caller must verify the result actually refutes before accepting it;
    this function only produces candidate text.
    """
    if not statement.strip():
        raise ValueError("statement must be non-empty")
    slots = {
        "statement": statement,
        "table": render_for_prompt(table, max_rows, max_chars),
    }
    raw = gateway.complete(PromptKind.PERTURB, slots)
    return extract_payload(raw, "STATEMENT")


def derive_claim(
    question: str,
    answer: str,
    table: Table,
    gateway: Gateway,
    max_rows: int = 50,
    max_chars: int = 4000,
) -> str:
    """Turn a QA pair into a declarative claim via the model."""
    slots = {
        "question": question,
        "answer": answer,
        "table": render_for_prompt(table, max_rows, max_chars),
    }
    raw = gateway.complete(PromptKind.CLAIM_DERIVE, slots)
    return extract_payload(raw, "STATEMENT")


def fallback_claim(question: str, answer: str) -> str:
    """Deterministic rule-based claim used when no gateway is configured."""
    return f"the answer to: {question.strip()} is {answer.strip()}"
