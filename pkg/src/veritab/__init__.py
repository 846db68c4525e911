"""veritab: execution-based tabular fact verification and question answering.

Natural-language claims and questions are translated into single-line
table expressions by a chat-completion model, executed in a sandboxed
interpreter, repaired through correction loops, and scored against gold
labels or answers. The package also builds the training/evaluation
datasets the pipeline consumes.
"""

__version__ = "0.1.0"

from .engine import (  # noqa: E402
    EvalError,
    coerce_truth,
    evaluate,
    execute_answer,
    execute_verdict,
    parse,
)
from .matching import match_answer  # noqa: E402
from .tables import Table, load_table, render_for_prompt  # noqa: E402

__all__ = [
    "EvalError",
    "Table",
    "__version__",
    "coerce_truth",
    "evaluate",
    "execute_answer",
    "execute_verdict",
    "load_table",
    "match_answer",
    "parse",
    "render_for_prompt",
]
