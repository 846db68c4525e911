"""Command-line client for the veritab service.

Every subcommand talks to the HTTP service API: against a remote server
when --server is given, otherwise against an in-process instance of the
app (no sockets involved). Exit codes: 0 success, 1 I/O or configuration
errors, 2 expression evaluation errors.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path
from typing import Any

import httpx

from .config import ConfigError, RunConfig, load_config


class ClientError(Exception):
    """A 4xx/5xx response or transport failure, mapped to exit code 1."""


class ServiceClient:
    """Thin JSON-over-HTTP client; in-process ASGI unless a server URL is set."""

    def __init__(self, server: str | None, config: RunConfig):
        self.server = server
        self.config = config
        self._app = None

    def _get_app(self):
        if self._app is None:
            from .service.app import create_app

            self._app = create_app(self.config)
        return self._app

    def request(self, method: str, path: str, payload: dict | None = None) -> dict[str, Any]:
        async def go() -> tuple[int, Any]:
            if self.server:
                client = httpx.AsyncClient(base_url=self.server, timeout=None)
            else:
                transport = httpx.ASGITransport(app=self._get_app())
                client = httpx.AsyncClient(
                    transport=transport, base_url="http://veritab.local", timeout=None
                )
            async with client:
                response = await client.request(method, path, json=payload)
                try:
                    body = response.json()
                except ValueError:
                    body = {"detail": response.text}
                return response.status_code, body

        try:
            status, body = asyncio.run(go())
        except httpx.HTTPError as exc:
            raise ClientError(f"cannot reach service: {exc}") from None
        if status >= 400:
            detail = body.get("detail", body) if isinstance(body, dict) else body
            raise ClientError(f"service error ({status}): {detail}")
        return body

    def get(self, path: str) -> dict[str, Any]:
        return self.request("GET", path)

    def post(self, path: str, payload: dict) -> dict[str, Any]:
        return self.request("POST", path, payload)


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "workers", None) is not None:
        config.workers = args.workers
    if getattr(args, "output_dir", None):
        config.output_dir = Path(args.output_dir)
    if getattr(args, "transcript_record", None):
        config.transcript_record = Path(args.transcript_record)
    if getattr(args, "transcript_replay", None):
        config.transcript_replay = Path(args.transcript_replay)
    if getattr(args, "no_corrections", False):
        config.corrections = config.corrections.disabled()
    return config


def _table_payload(path: str, fmt: str | None, delimiter: str | None) -> dict[str, Any]:
    table_path = Path(path)
    try:
        text = table_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ClientError(f"cannot read table file: {exc}") from None
    if fmt is None:
        fmt = "tsv" if table_path.suffix == ".tsv" else "csv"
    return {"text": text, "format": fmt, "name": table_path.name, "delimiter": delimiter}


def cmd_exec(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server, _load_run_config(args))
    payload = {
        "table": _table_payload(args.table, args.format, args.delimiter),
        "expression": args.expression,
        "mode": "verdict" if args.verdict else "value",
    }
    body = client.post("/execute", payload)
    if not body["ok"]:
        error = body["error"]
        print(f"{error['kind']}: {error['message']}", file=sys.stderr)
        return 2
    print(body["verdict"] if args.verdict else body["rendered"])
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server, _load_run_config(args))
    payload = {
        "statement": args.statement,
        "table": _table_payload(args.table, args.format, args.delimiter),
    }
    body = client.post("/claims/verify", payload)
    print(f"{body['outcome']}\t{body['query']}")
    return 0


def cmd_ask(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server, _load_run_config(args))
    payload = {
        "question": args.question,
        "table": _table_payload(args.table, args.format, args.delimiter),
    }
    body = client.post("/questions/answer", payload)
    if body["failed"]:
        print("failed", file=sys.stderr)
        print(json.dumps(body["trace"], indent=2), file=sys.stderr)
        return 0
    print(f"{body['rendered']}\t{body['query']}")
    return 0


def cmd_build(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server, _load_run_config(args))
    payload = {
        "dataset": args.dataset,
        "source": args.source,
        "limit": args.limit,
        "n": args.n,
        "seed": args.seed,
        "output_name": args.output_name,
    }
    body = client.post("/datasets/build", payload)
    print(f"wrote {body['entry_count']} entries to {body['entries_path']}")
    print(f"manifest: {body['manifest_path']}")
    if body.get("stage_stats"):
        for stage in body["stage_stats"]["stages"]:
            print(
                f"  {stage['stage']:<20} valid={stage['valid_count']:<8} "
                f"accuracy={stage['accuracy_pct']:.2f}%"
            )
    if body.get("dropped"):
        drops = ", ".join(f"{k}={v}" for k, v in sorted(body["dropped"].items()))
        print(f"  dropped: {drops}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server, _load_run_config(args))
    payload = {
        "dataset_path": args.dataset_path,
        "mode": args.mode,
        "ablate": args.ablate,
        "no_corrections": args.no_corrections,
        "workers": args.workers,
        "limit": args.limit,
    }
    body = client.post("/evaluate", payload)
    print(body["rendered"])
    print(f"results: {body['results_path']}")
    print(f"report:  {body['report_path']}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    app = create_app(_load_run_config(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run configuration YAML")
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    parser.add_argument("--transcript-record", help="record gateway exchanges to this JSONL")
    parser.add_argument("--transcript-replay", help="replay gateway exchanges from this JSONL")


def _add_table_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("table", help="path to the table file")
    parser.add_argument(
        "--format", choices=["csv", "tsv", "tabfact_json", "wtq_tsv"],
        help="table format (default: by extension)",
    )
    parser.add_argument("--delimiter", help="override the cell delimiter")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veritab",
        description="Execution-based tabular fact verification and question answering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exec", help="evaluate one expression against a table")
    _add_table_args(p)
    p.add_argument("expression", help="single-line table expression")
    p.add_argument("--verdict", action="store_true", help="coerce the result to True/False")
    _add_common(p)
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("verify", help="verify one claim against a table")
    _add_table_args(p)
    p.add_argument("statement", help="the claim to verify")
    p.add_argument("--no-corrections", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ask", help="answer one question from a table")
    _add_table_args(p)
    p.add_argument("question", help="the question to answer")
    p.add_argument("--no-corrections", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("build", help="build a dataset")
    p.add_argument(
        "dataset", choices=["pantabfact", "panwiki", "wikifact", "balanced-ood"],
    )
    p.add_argument("source", help="corpus file (statements JSON / records TSV / entries JSONL)")
    p.add_argument("--limit", type=int, help="use only the first N source records")
    p.add_argument("--n", type=int, help="balanced-ood: number of true/false pairs")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--output-name")
    p.add_argument("--no-corrections", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("evaluate", help="evaluate a dataset end to end")
    p.add_argument("dataset_path", help="entries JSONL produced by 'build'")
    p.add_argument("--mode", choices=["fact", "qa"], required=True)
    p.add_argument("--ablate", action="store_true", help="also run with corrections disabled")
    p.add_argument("--no-corrections", action="store_true")
    p.add_argument("--limit", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ClientError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
