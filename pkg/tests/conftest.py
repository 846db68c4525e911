"""Shared fixtures: sample tables, fixture corpora, and scripted gateways."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from veritab.datasets import CorpusProfile, TableStore
from veritab.gateway import PromptKind, ScriptedGateway
from veritab.tables import TableFormat, load_table

# oldest-player claims run against this
SIMPLE_CSV = "age,name\n3,ann\n5,bob\n"

OLYMPICS_CSV = (
    "year,host,gold\n"
    "2004,athens,30\n"
    "2008,beijing,48\n"
    "2012,london,29\n"
)


@pytest.fixture
def simple_table():
    return load_table(SIMPLE_CSV, "csv", name="simple")


@pytest.fixture
def olympics_table():
    return load_table(OLYMPICS_CSV, "csv", name="olympics")


# -- fixture corpora -----------------------------------------------------------

# (statement, gold query, label) over the fixture TabFact-style table below.
FIXTURE_TABLE_CSV = "team#pts#wins\nreds#9#3\nblues#4#1\ngreens#7#2\n"

FACT_FIXTURES = [
    ("the reds have 9 points", "df[df['team'] == 'reds']['pts'].iloc[0] == 9", 1),
    ("the blues have 9 points", "df[df['team'] == 'blues']['pts'].iloc[0] == 9", 0),
    ("three teams are listed", "df.shape[0] == 3", 1),
    ("five teams are listed", "df.shape[0] == 5", 0),
    ("total points exceed 15", "df['pts'].sum() > 15", 1),
    ("total points exceed 50", "df['pts'].sum() > 50", 0),
    ("the greens won 2 games", "df[df['team'] == 'greens']['wins'].iloc[0] == 2", 1),
    ("the greens won 9 games", "df[df['team'] == 'greens']['wins'].iloc[0] == 9", 0),
    ("the top score is 9", "df['pts'].max() == 9", 1),
    ("the top score is 4", "df['pts'].max() == 4", 0),
]

# (question, gold query, answer) over the WTQ-style fixture table below.
WTQ_TABLE_TSV = "year\tcity\tmedals\n2004\tathens\t30\n2008\tbeijing\t48\n2012\tlondon\t29\n"

QA_FIXTURES = [
    ("which city hosted in 2008?", "df[df['year'] == 2008]['city'].iloc[0]", "beijing"),
    ("how many games are listed?", "len(df)", "3"),
    ("what is the highest medal count?", "df['medals'].max()", "48"),
    ("which city had the most medals?",
     "df.sort_values('medals', ascending=False).head(1)['city'].iloc[0]", "beijing"),
    ("what is the total medal count?", "df['medals'].sum()", "107"),
]


@pytest.fixture
def tabfact_corpus(tmp_path: Path):
    """A miniature TabFact release: '#'-delimited table + statements JSON."""
    root = tmp_path / "tabfact"
    (root / "all_csv").mkdir(parents=True)
    (root / "all_csv" / "2-100.html.csv").write_text(FIXTURE_TABLE_CSV, encoding="utf-8")
    statements = {
        "2-100.html.csv": [
            [s for s, _, _ in FACT_FIXTURES],
            [label for _, _, label in FACT_FIXTURES],
            "fixture league table",
        ]
    }
    statements_path = root / "train_examples.json"
    statements_path.write_text(json.dumps(statements), encoding="utf-8")
    profiles = {"tabfact": CorpusProfile(root=root, table_format=TableFormat.TABFACT_JSON)}
    return statements_path, TableStore(profiles), root


@pytest.fixture
def wtq_corpus(tmp_path: Path):
    """A miniature WikiTableQuestions release: TSV records + csv table."""
    root = tmp_path / "wtq"
    (root / "csv" / "204-csv").mkdir(parents=True)
    table_rel = "csv/204-csv/590.csv"
    (root / table_rel).write_text(WTQ_TABLE_TSV.replace("\t", ","), encoding="utf-8")
    lines = ["id\tutterance\tcontext\ttargetValue"]
    for i, (question, _, answer) in enumerate(QA_FIXTURES):
        lines.append(f"nu-{i}\t{question}\t{table_rel}\t{answer}")
    records_path = root / "training.tsv"
    records_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    profiles = {"wikitablequestions": CorpusProfile(root=root, table_format=TableFormat.CSV)}
    return records_path, TableStore(profiles), root


# -- scripted gateways -----------------------------------------------------------


def panda_json(query: str) -> str:
    return json.dumps({"PANDA": query})


def correct_panda_json(query: str) -> str:
    return json.dumps({"CORRECT PANDA": query})


def oracle_script(gold_by_text: dict[str, str]):
    """A gateway script that answers generation prompts with gold queries."""

    def script(kind: PromptKind, slots) -> str:
        if kind is PromptKind.FACT_GENERATE:
            return panda_json(gold_by_text[slots["statement"]])
        if kind is PromptKind.QA_GENERATE:
            return panda_json(gold_by_text[slots["question"]])
        raise AssertionError(f"oracle gateway got unexpected prompt {kind}")

    return script


@pytest.fixture
def fact_oracle_gateway():
    return ScriptedGateway(oracle_script({s: q for s, q, _ in FACT_FIXTURES}))


@pytest.fixture
def qa_oracle_gateway():
    return ScriptedGateway(oracle_script({q: query for q, query, _ in QA_FIXTURES}))


def corruption_script(gold_by_text: dict[str, str], corrupt):
    """Generation returns a corrupted gold query; syntax correction repairs it."""

    def script(kind: PromptKind, slots) -> str:
        if kind in (PromptKind.FACT_GENERATE, PromptKind.QA_GENERATE):
            key = slots.get("statement") or slots.get("question")
            return panda_json(corrupt(gold_by_text[key]))
        if kind is PromptKind.FACT_SYNTAX_CORRECT:
            return correct_panda_json(gold_by_text[slots["statement"]])
        raise AssertionError(f"corruption gateway got unexpected prompt {kind}")

    return script
