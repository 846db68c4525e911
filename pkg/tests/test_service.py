"""HTTP service endpoints, exercised through the ASGI test client."""

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from conftest import FACT_FIXTURES, SIMPLE_CSV, oracle_script
from veritab.config import RunConfig
from veritab.corrections import CorrectionPolicy
from veritab.datasets import read_tabfact_statements, write_entries_jsonl
from veritab.gateway import ScriptedGateway, TranscriptRecorder
from veritab.records import ENTAILED, DatasetEntry
from veritab.service.app import create_app
from veritab.verify import evaluate


def bare_config(tmp_path: Path, **overrides) -> RunConfig:
    defaults = dict(output_dir=tmp_path / "out")
    defaults.update(overrides)
    return RunConfig(**defaults)


@pytest.fixture
def bare_client(tmp_path):
    return TestClient(create_app(bare_config(tmp_path)))


def inline_table(text: str = SIMPLE_CSV, fmt: str = "csv") -> dict:
    return {"text": text, "format": fmt}


class TestHealthAndGrammar:
    def test_health(self, bare_client):
        body = bare_client.get("/health").json()
        assert body["status"] == "ok"
        assert body["grammar_version"] == "1.0"

    def test_grammar_document_served(self, bare_client):
        body = bare_client.get("/grammar").json()
        assert body["version"] == "1.0"
        assert "Truthiness coercion" in body["text"]


class TestExecuteEndpoint:
    def test_value(self, bare_client):
        response = bare_client.post(
            "/execute", json={"table": inline_table(), "expression": "len(df)"}
        )
        body = response.json()
        assert body["ok"] and body["rendered"] == "2"
        assert body["result"] == {"kind": "scalar", "value": 2}

    def test_verdict(self, bare_client):
        body = bare_client.post(
            "/execute",
            json={
                "table": inline_table(),
                "expression": "df['age'].sum() == 8",
                "mode": "verdict",
            },
        ).json()
        assert body["ok"] and body["verdict"] is True

    def test_eval_error_is_domain_result(self, bare_client):
        body = bare_client.post(
            "/execute", json={"table": inline_table(), "expression": "df['nope']"}
        ).json()
        assert not body["ok"]
        assert body["error"]["kind"] == "UnknownColumn"

    def test_bad_table_is_400(self, bare_client):
        response = bare_client.post(
            "/execute", json={"table": inline_table("a\n"), "expression": "len(df)"}
        )
        assert response.status_code == 400

    def test_table_by_server_path(self, bare_client, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text(SIMPLE_CSV, encoding="utf-8")
        body = bare_client.post(
            "/execute",
            json={"table": {"path": str(path)}, "expression": "df['age'].max()"},
        ).json()
        assert body["rendered"] == "5"

    def test_table_needs_exactly_one_source(self, bare_client):
        response = bare_client.post(
            "/execute", json={"table": {"format": "csv"}, "expression": "len(df)"}
        )
        assert response.status_code == 422


class TestVerifyEndpointWithTranscript:
    def test_verify_via_replay(self, tmp_path, simple_table):
        transcript = tmp_path / "t.jsonl"
        recorder = TranscriptRecorder(
            ScriptedGateway(lambda k, s: json.dumps({"PANDA": "df['age'].max() == 5"})),
            transcript,
        )
        from veritab.verify import verify_claim

        verify_claim("the max age is 5", simple_table, recorder)

        config = bare_config(tmp_path, transcript_replay=transcript)
        client = TestClient(create_app(config))
        body = client.post(
            "/claims/verify",
            json={"statement": "the max age is 5", "table": inline_table()},
        ).json()
        assert body["outcome"] == "entailed"
        assert body["query"] == "df['age'].max() == 5"
        assert body["trace"][0]["outcome"] == "ok"

    def test_no_gateway_is_400(self, bare_client):
        response = bare_client.post(
            "/claims/verify", json={"statement": "s", "table": inline_table()}
        )
        assert response.status_code == 400

    def test_answer_via_replay(self, tmp_path, olympics_table):
        from conftest import OLYMPICS_CSV
        from veritab.verify import answer_question

        transcript = tmp_path / "t.jsonl"
        recorder = TranscriptRecorder(
            ScriptedGateway(
                lambda k, s: json.dumps({"PANDA": "df[df['year']==2008]['host'].iloc[0]"})
            ),
            transcript,
        )
        answer_question("who hosted in 2008?", olympics_table, recorder)

        client = TestClient(create_app(bare_config(tmp_path, transcript_replay=transcript)))
        body = client.post(
            "/questions/answer",
            json={
                "question": "who hosted in 2008?",
                "table": inline_table(OLYMPICS_CSV),
            },
        ).json()
        assert not body["failed"]
        assert body["rendered"] == "beijing"


@pytest.fixture
def corpus_config(tabfact_corpus, tmp_path):
    _, store, root = tabfact_corpus
    return bare_config(tmp_path, corpora=dict(store.profiles))


class TestBuildEndpoint:
    def test_pantabfact_via_replay(self, tabfact_corpus, corpus_config, tmp_path):
        statements_path, store, _ = tabfact_corpus
        records = read_tabfact_statements(statements_path)
        transcript = tmp_path / "build.jsonl"
        recorder = TranscriptRecorder(
            ScriptedGateway(oracle_script({s: q for s, q, _ in FACT_FIXTURES})), transcript
        )
        from veritab.datasets import build_pantabfact

        build_pantabfact(records, store, recorder, CorrectionPolicy())

        corpus_config.transcript_replay = transcript
        client = TestClient(create_app(corpus_config))
        body = client.post(
            "/datasets/build",
            json={"dataset": "pantabfact", "source": str(statements_path)},
        ).json()
        assert body["entry_count"] == len(records)
        stages = body["stage_stats"]["stages"]
        assert [s["stage"] for s in stages] == [
            "Initial Generation", "Logic Correction", "Syntax Correction",
        ]
        assert all(s["accuracy_pct"] == 100.0 for s in stages)
        entries_path = Path(body["entries_path"])
        assert entries_path.is_file()
        manifest = json.loads(Path(body["manifest_path"]).read_text())
        assert manifest["dataset"] == "pantabfact"
        assert manifest["seed"] == corpus_config.seed
        assert manifest["policy"]["syntax_budget"] == 4
        assert manifest["grammar_version"] == "1.0"

    def test_wikifact_without_gateway(self, wtq_corpus, tmp_path):
        records_path, store, _ = wtq_corpus
        config = bare_config(tmp_path, corpora=dict(store.profiles))
        client = TestClient(create_app(config))
        body = client.post(
            "/datasets/build",
            json={"dataset": "wikifact", "source": str(records_path)},
        ).json()
        assert body["entry_count"] == 5
        lines = Path(body["entries_path"]).read_text().splitlines()
        first = json.loads(lines[0])
        assert first["label"] == "entailed"
        assert first["text"].startswith("the answer to:")

    def test_gatewayless_pantabfact_is_400(self, tabfact_corpus, corpus_config):
        statements_path, _, _ = tabfact_corpus
        client = TestClient(create_app(corpus_config))
        response = client.post(
            "/datasets/build",
            json={"dataset": "pantabfact", "source": str(statements_path)},
        )
        assert response.status_code == 400

    def test_bad_source_is_400_and_no_partial_files(self, corpus_config):
        client = TestClient(create_app(corpus_config))
        response = client.post(
            "/datasets/build", json={"dataset": "wikifact", "source": "/no/such/file.tsv"}
        )
        assert response.status_code == 400
        out = Path(corpus_config.output_dir)
        assert not out.exists() or list(out.iterdir()) == []

    def test_balanced_ood_requires_n(self, wtq_corpus, tmp_path):
        records_path, store, _ = wtq_corpus
        entries = [
            DatasetEntry(id="e", mode="fact", text="c",
                         table_ref="wikitablequestions:csv/204-csv/590.csv", label=ENTAILED)
        ]
        pool_path = tmp_path / "pool.jsonl"
        write_entries_jsonl(pool_path, entries)
        config = bare_config(
            tmp_path, corpora=dict(store.profiles),
            transcript_replay=None,
        )
        # any gateway at all; request validation fires before gateway use
        config.model = None
        client = TestClient(create_app(config))
        response = client.post(
            "/datasets/build", json={"dataset": "balanced-ood", "source": str(pool_path)}
        )
        assert response.status_code == 400


class TestEvaluateEndpoint:
    @pytest.fixture
    def fact_dataset(self, tabfact_corpus, tmp_path):
        statements_path, store, _ = tabfact_corpus
        records = read_tabfact_statements(statements_path)
        entries = [
            DatasetEntry(
                id=f"f{i}", mode="fact", text=r.statement, table_ref=r.table_ref,
                label=r.label,
            )
            for i, r in enumerate(records)
        ]
        dataset_path = tmp_path / "fixture.jsonl"
        write_entries_jsonl(dataset_path, entries)
        transcript = tmp_path / "eval.jsonl"
        recorder = TranscriptRecorder(
            ScriptedGateway(oracle_script({s: q for s, q, _ in FACT_FIXTURES})), transcript
        )
        evaluate(entries, store, recorder, CorrectionPolicy(), mode="fact")
        return dataset_path, transcript, store

    def test_fact_evaluation_via_replay(self, fact_dataset, tmp_path):
        dataset_path, transcript, store = fact_dataset
        config = bare_config(
            tmp_path, corpora=dict(store.profiles), transcript_replay=transcript
        )
        client = TestClient(create_app(config))
        body = client.post(
            "/evaluate", json={"dataset_path": str(dataset_path), "mode": "fact"}
        ).json()
        assert body["n"] == len(FACT_FIXTURES)
        assert body["accuracy"] == 1.0
        assert body["per_label"]["entailed"]["accuracy"] == 1.0
        assert Path(body["results_path"]).is_file()
        assert Path(body["report_path"]).is_file()
        assert "Overall" in body["rendered"]

    def test_ablation_flag(self, fact_dataset, tmp_path):
        dataset_path, transcript, store = fact_dataset
        config = bare_config(
            tmp_path, corpora=dict(store.profiles), transcript_replay=transcript
        )
        client = TestClient(create_app(config))
        body = client.post(
            "/evaluate",
            json={"dataset_path": str(dataset_path), "mode": "fact", "ablate": True},
        ).json()
        assert body["ablation"]["with_corr"] == 1.0
        assert body["ablation"]["no_corr"] == 1.0

    def test_mode_mismatch_is_400(self, fact_dataset, tmp_path):
        dataset_path, transcript, store = fact_dataset
        config = bare_config(
            tmp_path, corpora=dict(store.profiles), transcript_replay=transcript
        )
        client = TestClient(create_app(config))
        response = client.post(
            "/evaluate", json={"dataset_path": str(dataset_path), "mode": "qa"}
        )
        assert response.status_code == 400
        assert "not homogeneous" in response.json()["detail"]

    def test_missing_dataset_is_400(self, bare_client):
        response = bare_client.post(
            "/evaluate", json={"dataset_path": "/no/file.jsonl", "mode": "fact"}
        )
        assert response.status_code == 400
