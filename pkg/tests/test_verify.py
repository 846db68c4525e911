"""Inference orchestration: verdicts, QA, answer matching, reports, ablation."""

import json

import pytest

from conftest import (
    FACT_FIXTURES,
    QA_FIXTURES,
    corruption_script,
    oracle_script,
    panda_json,
)
from veritab.corrections import CorrectionPolicy
from veritab.engine.values import ListVal, Scalar, SubTable, Vector
from veritab.gateway import ScriptedGateway, TransportError
from veritab.matching import match_answer
from veritab.records import ENTAILED, FACT, QA, REFUTED, DatasetEntry
from veritab.tables import ColumnType, load_table
from veritab.verify import (
    FAILED,
    Report,
    answer_question,
    evaluate,
    render_report,
    run_ablation,
    verify_claim,
)


class TestVerifyClaim:
    def test_entailed(self, simple_table):
        gateway = ScriptedGateway(lambda k, s: panda_json("df['age'].max() == 5"))
        verdict = verify_claim("the max age is 5", simple_table, gateway)
        assert verdict.outcome == ENTAILED
        assert verdict.query == "df['age'].max() == 5"
        assert verdict.latency >= 0

    def test_refuted(self, simple_table):
        gateway = ScriptedGateway(lambda k, s: panda_json("df.shape[0] == 0"))
        assert verify_claim("no rows", simple_table, gateway).outcome == REFUTED

    def test_permanently_broken_fails_after_budget(self, simple_table):
        gateway = ScriptedGateway(
            lambda k, s: panda_json("df['age'].sum( == 8")
            if k.value == "fact_generate"
            else json.dumps({"CORRECT PANDA": "df['age'].sum( == 8"})
        )
        verdict = verify_claim(
            "claim", simple_table, gateway, CorrectionPolicy(syntax_budget=4)
        )
        assert verdict.outcome == FAILED
        # generation + 4 corrections
        assert len(gateway.calls) == 5

    def test_gateway_down_encoded_as_failed(self, simple_table):
        class Down:
            def complete(self, kind, slots):
                raise TransportError("down")

        verdict = verify_claim("claim", simple_table, Down())
        assert verdict.outcome == FAILED
        assert verdict.trace[0].outcome == "gateway_error"

    def test_repaired_claim_verifies(self, simple_table):
        gold = {"the ages sum to 8": "df['age'].sum() == 8"}
        gateway = ScriptedGateway(corruption_script(gold, lambda q: q + " ("))
        verdict = verify_claim("the ages sum to 8", simple_table, gateway)
        assert verdict.outcome == ENTAILED
        assert verdict.query == "df['age'].sum() == 8"


class TestAnswerQuestion:
    def test_gold_denotation(self, olympics_table):
        gateway = ScriptedGateway(
            lambda k, s: panda_json("df[df['year']==2008]['host'].iloc[0]")
        )
        outcome = answer_question("who hosted 2008?", olympics_table, gateway)
        assert not outcome.failed
        assert outcome.value == Scalar("beijing")

    def test_broken_stub_fails(self, olympics_table):
        gateway = ScriptedGateway(lambda k, s: "garbage")
        outcome = answer_question("q", olympics_table, gateway)
        assert outcome.failed and outcome.value is None

    def test_single_element_vector_flattens_in_scoring(self, olympics_table):
        gateway = ScriptedGateway(lambda k, s: panda_json("df[df['year']==2008]['host']"))
        outcome = answer_question("who hosted 2008?", olympics_table, gateway)
        assert isinstance(outcome.value, Vector) and len(outcome.value) == 1
        assert match_answer(outcome.value, "beijing")


class TestMatchAnswer:
    def test_numeric_normalization(self):
        assert match_answer(Scalar(3.0), "3")
        assert match_answer(Scalar(3), "3.0")
        assert match_answer(Scalar(3.0000004), "3")
        assert not match_answer(Scalar(3.1), "3")

    def test_casefold(self):
        assert match_answer(Scalar("Beijing"), "beijing")
        assert match_answer(Scalar("beijing"), "  BEIJING ")

    def test_null_never_matches(self):
        assert not match_answer(Scalar(None), "")
        assert not match_answer(Scalar(None), "nan")

    def test_multiset_order_insensitive(self):
        assert match_answer(ListVal(("b", "a")), "a|b")
        assert match_answer(Vector((2, 1), ColumnType.INT), "1|2")
        assert not match_answer(ListVal(("a", "a")), "a|b")
        assert not match_answer(ListVal(("a",)), "a|b")

    def test_bool_renders_as_text(self):
        assert match_answer(Scalar(True), "true")
        assert match_answer(Scalar(False), "False")

    def test_single_column_table_flattens(self):
        table = load_table("host\nbeijing\n", "csv")
        assert match_answer(SubTable(table), "beijing")

    def test_thousands_separator_in_gold(self):
        assert match_answer(Scalar(1234), "1,234")


def fact_entries(store_ref="league") -> list[DatasetEntry]:
    return [
        DatasetEntry(
            id=f"f{i}", mode=FACT, text=statement, table_ref=store_ref,
            label=ENTAILED if label else REFUTED,
        )
        for i, (statement, _, label) in enumerate(FACT_FIXTURES)
    ]


def qa_entries(store_ref="games") -> list[DatasetEntry]:
    return [
        DatasetEntry(
            id=f"q{i}", mode=QA, text=question, table_ref=store_ref, answer=answer
        )
        for i, (question, _, answer) in enumerate(QA_FIXTURES)
    ]


@pytest.fixture
def league_resolver():
    from conftest import FIXTURE_TABLE_CSV

    table = load_table(FIXTURE_TABLE_CSV, "tabfact_json", name="league")
    return lambda ref: table


@pytest.fixture
def games_resolver():
    from conftest import WTQ_TABLE_TSV

    table = load_table(WTQ_TABLE_TSV, "tsv", name="games")
    return lambda ref: table


class TestEvaluate:
    def test_oracle_gateway_scores_one(self, league_resolver, fact_oracle_gateway):
        report = evaluate(fact_entries(), league_resolver, fact_oracle_gateway, mode=FACT)
        assert report.accuracy == 1.0
        assert report.failure_rate == 0.0
        assert report.per_label[ENTAILED].accuracy == 1.0
        assert report.per_label[REFUTED].accuracy == 1.0

    def test_all_failing_stub(self, league_resolver):
        gateway = ScriptedGateway(lambda k, s: "nope")
        report = evaluate(fact_entries(), league_resolver, gateway, mode=FACT)
        assert report.accuracy == 0.0
        assert report.failure_rate == 1.0

    def test_three_quarters(self, league_resolver):
        gold = {s: q for s, q, _ in FACT_FIXTURES}
        wrong = FACT_FIXTURES[0][0]

        def script(kind, slots):
            statement = slots["statement"]
            query = gold[statement]
            return panda_json(f"~({query})" if statement == wrong else query)

        entries = fact_entries()[:4]
        report = evaluate(entries, league_resolver, ScriptedGateway(script), mode=FACT)
        assert report.accuracy == 0.75

    def test_qa_oracle(self, games_resolver, qa_oracle_gateway):
        report = evaluate(qa_entries(), games_resolver, qa_oracle_gateway, mode=QA)
        assert report.accuracy == 1.0

    def test_mode_mismatch_rejected(self, league_resolver, fact_oracle_gateway):
        with pytest.raises(ValueError, match="homogeneous"):
            evaluate(fact_entries(), league_resolver, fact_oracle_gateway, mode=QA)

    def test_empty_dataset_reports_null(self, league_resolver, fact_oracle_gateway):
        report = evaluate([], league_resolver, fact_oracle_gateway, mode=FACT)
        assert report.n == 0
        assert report.accuracy is None
        assert report.to_json()["accuracy"] is None

    def test_overall_is_label_weighted_mean(self, league_resolver):
        gold = {s: q for s, q, _ in FACT_FIXTURES}
        wrong = {FACT_FIXTURES[0][0], FACT_FIXTURES[1][0]}

        def script(kind, slots):
            statement = slots["statement"]
            query = gold[statement]
            return panda_json(f"~({query})" if statement in wrong else query)

        report = evaluate(fact_entries(), league_resolver, ScriptedGateway(script), mode=FACT)
        weighted = sum(
            stats.accuracy * stats.n for stats in report.per_label.values()
        ) / report.n
        assert report.accuracy == pytest.approx(weighted)

    def test_indicator_is_binary_and_consistent(self, league_resolver, fact_oracle_gateway):
        report = evaluate(fact_entries(), league_resolver, fact_oracle_gateway, mode=FACT)
        assert all(r.y in (0, 1) for r in report.per_entry)
        for entry, result in zip(fact_entries(), report.per_entry):
            assert result.y == int(result.outcome == entry.label)

    def test_per_entry_results_persisted_and_self_consistent(
        self, tmp_path, league_resolver, fact_oracle_gateway
    ):
        path = tmp_path / "results.jsonl"
        report = evaluate(
            fact_entries(), league_resolver, fact_oracle_gateway, mode=FACT,
            results_path=path,
        )
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(rows) == report.n
        assert sum(r["y"] for r in rows) == report.correct

    def test_workers_match_serial(self, league_resolver, fact_oracle_gateway):
        serial = evaluate(fact_entries(), league_resolver, fact_oracle_gateway, mode=FACT)
        threaded = evaluate(
            fact_entries(), league_resolver, fact_oracle_gateway, mode=FACT, workers=4
        )
        assert serial.accuracy == threaded.accuracy
        assert [r.entry_id for r in serial.per_entry] == [
            r.entry_id for r in threaded.per_entry
        ]

    def test_failed_scores_zero_not_excluded(self, league_resolver):
        gold = {s: q for s, q, _ in FACT_FIXTURES}
        broken = FACT_FIXTURES[0][0]

        def script(kind, slots):
            if slots.get("statement") == broken:
                return panda_json("df['pts'].sum( ==")
            if kind.value == "fact_syntax_correct":
                return json.dumps({"CORRECT PANDA": "df['pts'].sum( =="})
            return panda_json(gold[slots["statement"]])

        entries = fact_entries()[:4]
        report = evaluate(entries, league_resolver, ScriptedGateway(script), mode=FACT)
        assert report.n == 4  # the failure stays in the denominator
        assert report.accuracy == 0.75
        assert report.failures == 1


class TestAblation:
    def test_corruption_recovery_ordering(self, league_resolver):
        gold = {s: q for s, q, _ in FACT_FIXTURES}
        gateway = ScriptedGateway(corruption_script(gold, lambda q: q + " ("))
        report = run_ablation(fact_entries(), league_resolver, gateway, mode=FACT)
        assert report.ablation["with_corr"] == 1.0
        assert report.ablation["no_corr"] == 0.0
        assert report.ablation["with_corr"] > report.ablation["no_corr"]

    def test_oracle_gateway_equal_accuracies(self, league_resolver, fact_oracle_gateway):
        report = run_ablation(fact_entries(), league_resolver, fact_oracle_gateway, mode=FACT)
        assert report.ablation == {"no_corr": 1.0, "with_corr": 1.0}

    def test_empty_dataset(self, league_resolver, fact_oracle_gateway):
        report = run_ablation([], league_resolver, fact_oracle_gateway, mode=FACT)
        assert report.ablation == {"no_corr": None, "with_corr": None}


class TestRenderReport:
    def test_layout_mentions_label_rows(self, league_resolver, fact_oracle_gateway):
        report = run_ablation(fact_entries(), league_resolver, fact_oracle_gateway, mode=FACT)
        text = render_report(report, title="fixture")
        assert "All False" in text and "All True" in text and "Overall" in text
        assert "No Corr." in text and "With Corr." in text

    def test_handles_empty(self):
        text = render_report(Report(n=0, correct=0, failures=0, per_label={}, per_entry=[]))
        assert "n/a" in text
