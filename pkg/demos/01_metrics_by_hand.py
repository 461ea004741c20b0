"""Scoring a handful of predictions and reading the confusion matrix.

Run: python demos/01_metrics_by_hand.py
"""

from cmrbench import build_confusion, compute_metrics

codes = ["A", "B", "C"]
truth = ["A", "A", "B", "B", "C", "C"]
# The last prediction could not be parsed, so it is None and lands in "unparsed".
preds = ["A", "B", "B", "B", "C", None]

cm = build_confusion(zip(truth, preds), codes)
print(cm.to_csv())

m = compute_metrics(cm, "toy")
print(f"accuracy  {m.accuracy:.4f}")
print(f"precision {m.macro_precision:.4f}")
print(f"recall    {m.macro_recall:.4f}")
print(f"f1        {m.macro_f1:.4f}")
print("parse failures:", m.parse_failure_count)

# An unparsed answer is an error for its true class, never silently dropped.
for c in m.per_class:
    print(f"  {c.code}: p={c.precision:.3f} r={c.recall:.3f} f1={c.f1:.3f} support={c.support}")

micro = compute_metrics(cm, "toy", averaging="micro")
print(f"micro f1  {micro.macro_f1:.4f}")
