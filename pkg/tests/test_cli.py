"""CLI thin client: exit codes, output, config handling."""

import json
from pathlib import Path

import pytest
import yaml

from conftest import FACT_FIXTURES, oracle_script
from veritab.cli import main
from veritab.corrections import CorrectionPolicy
from veritab.datasets import read_tabfact_statements, write_entries_jsonl
from veritab.gateway import ScriptedGateway, TranscriptRecorder
from veritab.records import DatasetEntry
from veritab.verify import evaluate


@pytest.fixture
def table_file(tmp_path):
    path = tmp_path / "fixture.csv"
    path.write_text("a,b\n1,x\n2,y\n3,z\n", encoding="utf-8")
    return path


class TestExec:
    def test_prints_value_exit_zero(self, table_file, capsys):
        assert main(["exec", str(table_file), "len(df)"]) == 0
        assert capsys.readouterr().out.strip() == "3"

    def test_eval_error_exit_two(self, table_file, capsys):
        assert main(["exec", str(table_file), "df['nope']"]) == 2
        assert "UnknownColumn" in capsys.readouterr().err

    def test_missing_file_exit_one(self, tmp_path, capsys):
        assert main(["exec", str(tmp_path / "missing.csv"), "len(df)"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_verdict_mode(self, table_file, capsys):
        assert main(["exec", str(table_file), "df['a'].sum() == 6", "--verdict"]) == 0
        assert capsys.readouterr().out.strip() == "True"

    def test_malformed_table_exit_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1\n", encoding="utf-8")
        assert main(["exec", str(bad), "len(df)"]) == 1

    def test_vector_rendering(self, table_file, capsys):
        assert main(["exec", str(table_file), "df['b'].tolist()"]) == 0
        assert capsys.readouterr().out.strip() == "[x, y, z]"


def write_config(tmp_path: Path, tabfact_root=None, wtq_root=None, **run) -> Path:
    corpora = {}
    if tabfact_root:
        corpora["tabfact"] = {"root": str(tabfact_root), "table_format": "tabfact_json"}
    if wtq_root:
        corpora["wikitablequestions"] = {"root": str(wtq_root), "table_format": "csv"}
    config = {
        "corpora": corpora,
        "run": {"output_dir": str(tmp_path / "out"), **run},
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return path


class TestVerifyAndAsk:
    def test_verify_via_replay(self, tmp_path, capsys):
        table_path = tmp_path / "t.csv"
        table_path.write_text("team,pts\nreds,9\nblues,4\n", encoding="utf-8")
        from veritab.tables import load_table
        from veritab.verify import verify_claim

        transcript = tmp_path / "t.jsonl"
        recorder = TranscriptRecorder(
            ScriptedGateway(
                lambda k, s: json.dumps({"PANDA": "df[df['team'] == 'reds']['pts'].iloc[0] == 9"})
            ),
            transcript,
        )
        table = load_table(table_path.read_bytes(), "csv")
        verify_claim("the reds have 9 points", table, recorder)

        code = main([
            "verify", str(table_path), "the reds have 9 points",
            "--transcript-replay", str(transcript),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("entailed\t")

    def test_ask_via_replay(self, tmp_path, capsys):
        table_path = tmp_path / "t.csv"
        table_path.write_text("team,pts\nreds,9\nblues,4\n", encoding="utf-8")
        from veritab.tables import load_table
        from veritab.verify import answer_question

        transcript = tmp_path / "t.jsonl"
        recorder = TranscriptRecorder(
            ScriptedGateway(lambda k, s: json.dumps({"PANDA": "df['pts'].idxmax()"})),
            transcript,
        )
        table = load_table(table_path.read_bytes(), "csv")
        answer_question("which row has the most points?", table, recorder)

        code = main([
            "ask", str(table_path), "which row has the most points?",
            "--transcript-replay", str(transcript),
        ])
        assert code == 0
        assert capsys.readouterr().out.startswith("0\t")

    def test_verify_without_gateway_exit_one(self, table_file, capsys):
        assert main(["verify", str(table_file), "a claim"]) == 1
        assert "gateway" in capsys.readouterr().err


class TestBuild:
    def test_wikifact_without_gateway(self, wtq_corpus, tmp_path, capsys):
        records_path, _, root = wtq_corpus
        config = write_config(tmp_path, wtq_root=root)
        code = main(["build", "wikifact", str(records_path), "--config", str(config)])
        assert code == 0
        out = capsys.readouterr().out
        assert "wrote 5 entries" in out
        entries_file = tmp_path / "out" / "wikifact.jsonl"
        assert entries_file.is_file()
        manifest = json.loads((tmp_path / "out" / "wikifact.manifest.json").read_text())
        assert manifest["entry_count"] == 5

    def test_pantabfact_via_replay_transcript(self, tabfact_corpus, tmp_path, capsys):
        statements_path, store, root = tabfact_corpus
        records = read_tabfact_statements(statements_path)
        transcript = tmp_path / "build.jsonl"
        recorder = TranscriptRecorder(
            ScriptedGateway(oracle_script({s: q for s, q, _ in FACT_FIXTURES})), transcript
        )
        from veritab.datasets import build_pantabfact

        build_pantabfact(records, store, recorder, CorrectionPolicy())

        config = write_config(tmp_path, tabfact_root=root)
        code = main([
            "build", "pantabfact", str(statements_path),
            "--config", str(config), "--transcript-replay", str(transcript),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "Initial Generation" in out and "accuracy=100.00%" in out

    def test_bad_source_exit_one_no_partial_files(self, tmp_path, capsys):
        config = write_config(tmp_path)
        code = main(["build", "wikifact", str(tmp_path / "ghost.tsv"), "--config", str(config)])
        assert code == 1
        out_dir = tmp_path / "out"
        assert not out_dir.exists() or list(out_dir.iterdir()) == []

    def test_gatewayless_pantabfact_exit_one(self, tabfact_corpus, tmp_path):
        statements_path, _, root = tabfact_corpus
        config = write_config(tmp_path, tabfact_root=root)
        code = main(["build", "pantabfact", str(statements_path), "--config", str(config)])
        assert code == 1


class TestEvaluate:
    def test_oracle_replay_reports_full_accuracy(self, tabfact_corpus, tmp_path, capsys):
        statements_path, store, root = tabfact_corpus
        records = read_tabfact_statements(statements_path)
        entries = [
            DatasetEntry(id=f"f{i}", mode="fact", text=r.statement,
                         table_ref=r.table_ref, label=r.label)
            for i, r in enumerate(records)
        ]
        dataset = tmp_path / "fixture.jsonl"
        write_entries_jsonl(dataset, entries)
        transcript = tmp_path / "eval.jsonl"
        recorder = TranscriptRecorder(
            ScriptedGateway(oracle_script({s: q for s, q, _ in FACT_FIXTURES})), transcript
        )
        evaluate(entries, store, recorder, CorrectionPolicy(), mode="fact")

        config = write_config(tmp_path, tabfact_root=root)
        code = main([
            "evaluate", str(dataset), "--mode", "fact",
            "--config", str(config), "--transcript-replay", str(transcript),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "accuracy:  100.00%" in out
        assert (tmp_path / "out" / "fixture.results.jsonl").is_file()

    def test_mode_mismatch_exit_one(self, tabfact_corpus, tmp_path, capsys):
        statements_path, store, root = tabfact_corpus
        records = read_tabfact_statements(statements_path)[:2]
        entries = [
            DatasetEntry(id=f"f{i}", mode="fact", text=r.statement,
                         table_ref=r.table_ref, label=r.label)
            for i, r in enumerate(records)
        ]
        dataset = tmp_path / "fixture.jsonl"
        write_entries_jsonl(dataset, entries)
        transcript = tmp_path / "eval.jsonl"
        transcript.write_text("", encoding="utf-8")  # mismatch fires before any gateway use
        config = write_config(tmp_path, tabfact_root=root)
        code = main([
            "evaluate", str(dataset), "--mode", "qa",
            "--config", str(config), "--transcript-replay", str(transcript),
        ])
        assert code == 1
        assert "not homogeneous" in capsys.readouterr().err


class TestConfigHandling:
    def test_unknown_key_rejected(self, tmp_path, capsys):
        path = tmp_path / "config.yaml"
        path.write_text("run:\n  wrokers: 3\n", encoding="utf-8")
        code = main(["build", "wikifact", "x.tsv", "--config", str(path)])
        assert code == 1
        assert "wrokers" in capsys.readouterr().err

    def test_config_file_missing(self, tmp_path, capsys):
        code = main(["exec", "t.csv", "len(df)", "--config", str(tmp_path / "nope.yaml")])
        assert code == 1

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("run: [unclosed", encoding="utf-8")
        assert main(["build", "wikifact", "x.tsv", "--config", str(path)]) == 1
