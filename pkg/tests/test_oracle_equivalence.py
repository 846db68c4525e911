"""Evaluator equivalence against the reference dataframe runtime.

Every generated in-grammar expression is executed by the engine and by
plain eval over a real pandas DataFrame; values and error kinds must agree
on 100% of cases.
"""

import random
import time

from oracle_utils import (
    engine_execute,
    generate_expressions,
    make_random_table,
    outcomes_agree,
    reference_execute,
    to_dataframe,
)


def run_equivalence(seed: int, table_count: int) -> tuple[int, list[str]]:
    rng = random.Random(seed)
    total = 0
    disagreements = []
    for t in range(table_count):
        table = make_random_table(rng, name=f"t{t}")
        df = to_dataframe(table)
        for source in generate_expressions(rng, table):
            mine = engine_execute(source, table)
            reference = reference_execute(source, df)
            total += 1
            if not outcomes_agree(mine, reference):
                disagreements.append(
                    f"{source!r}: engine={mine} reference={reference}\non table "
                    f"{table.rows!r}"
                )
    return total, disagreements


def test_oracle_equivalence_on_generated_corpus():
    started = time.monotonic()
    total, disagreements = run_equivalence(seed=20240811, table_count=8)
    elapsed = time.monotonic() - started
    assert not disagreements, "\n".join(disagreements[:10])
    assert total >= 200, f"only {total} cases generated"
    assert elapsed < 10, f"oracle run took {elapsed:.1f}s"


def test_oracle_equivalence_second_seed():
    total, disagreements = run_equivalence(seed=7, table_count=5)
    assert not disagreements, "\n".join(disagreements[:10])
    assert total >= 200
