"""
Question answering over abstracts, with a scripted model
========================================================

Runs the structured QA protocol against a mock chat transport, so the
whole loop (prompt, parse, store, log) works offline.  The same
documents then go through the regex baseline, and the two answer sets
are cross-tabulated on the hyperparameter-optimization and comparison
questions.  Finally the free-text frequency answers are folded into
coarse bins.

Run with:  python3 demos/04_qa_protocol.py
"""

import tempfile
from pathlib import Path

from litmine.corpus import Document
from litmine.qa import (
    bin_frequency,
    compare_answers,
    load_answers,
    regex_baseline,
    run_protocol,
    tally_verdicts,
)
from litmine.transports import MockChatTransport, RetryPolicy

DOCS = [
    Document(
        id="qa-00",
        title="Comparing tree ensembles for return prediction",
        abstract="We compare gradient boosting against random forests on daily returns "
        "after a grid search over depth and learning rate.",
    ),
    Document(
        id="qa-01",
        title="A single spectral model for yield curves",
        abstract="One model, no comparison: weekly observations are fit by a spectral "
        "method with fixed settings.",
    ),
    Document(
        id="qa-02",
        title="Order flow imbalance and short-horizon moves",
        abstract="Minute-level order flow imbalance predicts the next move; the network "
        "minimizes mean squared error.",
    ),
]

# One scripted reply per document, consumed in order.  The reply format
# is the same rigid block the real transport would have to produce.
REPLIES = [
    "Q1_VERDICT: YES\nQ1_ELABORATION: boosting is compared to random forests\n"
    "Q2_VERDICT: YES\nQ2_ELABORATION: grid search over depth and rate\n"
    "Q3_VERDICT: YES\nQ3_ELABORATION: daily\n"
    "Q4_VERDICT: NO\nQ4_ELABORATION:\n"
    "Q5_VERDICT: YES\nQ5_ELABORATION: gradient boosting\n"
    "ATTENTION_CHECK: I screened one abstract against five questions.",
    "Q1_VERDICT: NO\nQ1_ELABORATION:\n"
    "Q2_VERDICT: NO\nQ2_ELABORATION:\n"
    "Q3_VERDICT: YES\nQ3_ELABORATION: weekly\n"
    "Q4_VERDICT: NOT APPLICABLE\nQ4_ELABORATION:\n"
    "Q5_VERDICT: NO\nQ5_ELABORATION:\n"
    "ATTENTION_CHECK: I screened one abstract against five questions.",
    "Q1_VERDICT: NO\nQ1_ELABORATION:\n"
    "Q2_VERDICT: NO\nQ2_ELABORATION:\n"
    "Q3_VERDICT: YES\nQ3_ELABORATION: minute-level\n"
    "Q4_VERDICT: YES\nQ4_ELABORATION: mean squared error\n"
    "Q5_VERDICT: NO\nQ5_ELABORATION:\n"
    "ATTENTION_CHECK: I screened one abstract against five questions.",
]

with tempfile.TemporaryDirectory() as tmp:
    store = Path(tmp) / "answers.jsonl"
    transport = MockChatTransport({"*": [{"content": r} for r in REPLIES]})
    summary = run_protocol(
        DOCS, transport, store, model="scripted-demo", policy=RetryPolicy(sleep=lambda _: None)
    )
    print(f"protocol: stored {summary.stored} of {summary.total} "
          f"(too large {summary.too_large}, failed {summary.transport_failed})\n")
    llm_records = load_answers(store)

print("verdict tally from the scripted model:")
for key, counter in tally_verdicts(llm_records).items():
    print(f"  {key:<12} {dict(counter)}")

# ------------------------------------------------------------------
# The regex baseline answers the same questions without any model.

baseline_records = [regex_baseline(doc) for doc in DOCS]
print("\nconfusion on (hpo, comparison), scripted model vs baseline:")
matrix = compare_answers(llm_records, baseline_records)
for label, a, b, diff in matrix.rows():
    print(f"  {label:<24} {a:>3} {b:>3} {diff:>+3}")

# ------------------------------------------------------------------
# Free-text frequency answers fold into coarse bins.

print("\nfrequency bins:")
for rec in llm_records:
    answer = rec.elaboration("frequency")
    print(f"  {rec.doc_id}: {answer!r} -> {bin_frequency(answer)}")
