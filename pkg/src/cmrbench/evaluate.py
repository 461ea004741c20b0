"""Confusion matrices, classification metrics, latency summaries and ranking."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import UNPARSED, LabelSet, Prediction


class EmptyInput(ValueError):
    pass


class UnknownLabel(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true labels; columns are predicted labels plus a trailing ``unparsed``."""

    labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    @property
    def columns(self) -> tuple[str, ...]:
        return self.labels + (UNPARSED,)

    @property
    def n(self) -> int:
        return sum(sum(row) for row in self.counts)

    def row_sums(self) -> list[int]:
        return [sum(row) for row in self.counts]

    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.labels)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["true\\predicted", *self.columns])
        for code, row in zip(self.labels, self.counts):
            writer.writerow([code, *row])
        return buf.getvalue()


def build_confusion(
    records: Iterable[tuple[str, Optional[str]]], labels: LabelSet | Sequence[str]
) -> ConfusionMatrix:
    """Count ``(true, predicted)`` pairs; a ``None`` prediction lands in ``unparsed``."""
    codes = tuple(labels.codes) if isinstance(labels, LabelSet) else tuple(labels)
    index = {code: i for i, code in enumerate(codes)}
    k = len(codes)
    counts = [[0] * (k + 1) for _ in range(k)]
    for truth, pred in records:
        if truth not in index:
            raise UnknownLabel(f"true label {truth!r} is not in the label set")
        if pred is None:
            j = k
        elif pred in index:
            j = index[pred]
        else:
            raise UnknownLabel(f"predicted label {pred!r} is not in the label set")
        counts[index[truth]][j] += 1
    return ConfusionMatrix(codes, tuple(tuple(row) for row in counts))


@dataclass(frozen=True)
class ClassMetrics:
    code: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsSummary:
    model_ref: str
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: tuple[ClassMetrics, ...]
    n: int
    parse_failure_count: int
    averaging: str = "macro"

    @property
    def mean_score(self) -> float:
        return (self.accuracy + self.macro_precision + self.macro_recall + self.macro_f1) / 4

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_class"] = [asdict(c) for c in self.per_class]
        return out


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def compute_metrics(cm: ConfusionMatrix, model_ref: str = "", averaging: str = "macro") -> MetricsSummary:
    """Accuracy plus averaged precision, recall and F1 from a confusion matrix.

    Zero denominators give 0. Macro averages take the unweighted mean over
    classes with non-zero support. With ``averaging="micro"`` the three
    averaged fields are computed from counts pooled over all classes.
    """
    n = cm.n
    if n == 0:
        raise EmptyInput("confusion matrix is empty")
    k = len(cm.labels)
    per_class = []
    tp_sum = fp_sum = fn_sum = 0
    for c in range(k):
        tp = cm.counts[c][c]
        support = sum(cm.counts[c])
        fp = sum(cm.counts[r][c] for r in range(k) if r != c)
        fn = support - tp
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append(ClassMetrics(cm.labels[c], precision, recall, f1, support))
        tp_sum, fp_sum, fn_sum = tp_sum + tp, fp_sum + fp, fn_sum + fn

    scored = [m for m in per_class if m.support > 0]
    if averaging == "macro":
        p = sum(m.precision for m in scored) / len(scored)
        r = sum(m.recall for m in scored) / len(scored)
        f = sum(m.f1 for m in scored) / len(scored)
    elif averaging == "micro":
        p = _ratio(tp_sum, tp_sum + fp_sum)
        r = _ratio(tp_sum, tp_sum + fn_sum)
        f = 2 * p * r / (p + r) if p + r else 0.0
    else:
        raise ValueError(f"unknown averaging {averaging!r}")

    failures = sum(row[k] for row in cm.counts)
    return MetricsSummary(model_ref, cm.trace() / n, p, r, f, tuple(per_class), n, failures, averaging)


@dataclass(frozen=True)
class TimingStats:
    model_ref: str
    mean_seconds_per_case: float
    median: float
    p95: float
    min: float
    max: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def timing_summary(predictions: Sequence[Prediction]) -> TimingStats:
    if not predictions:
        raise EmptyInput("no predictions to summarize")
    models = {p.model_ref for p in predictions}
    if len(models) != 1:
        raise ValueError(f"predictions span several models: {sorted(models)}")
    lat = np.array([p.latency for p in predictions], dtype=float)
    lo, hi = float(lat.min()), float(lat.max())
    # Clamp guards the mean against summation round-off on constant inputs.
    mean = min(max(float(lat.mean()), lo), hi)
    return TimingStats(
        model_ref=predictions[0].model_ref,
        mean_seconds_per_case=mean,
        median=float(np.median(lat)),
        p95=float(np.percentile(lat, 95)),
        min=lo,
        max=hi,
        n=len(lat),
    )


@dataclass(frozen=True)
class RankEntry:
    model_ref: str
    mean_score: float
    mean_seconds_per_case: Optional[float]


def rank_models(
    summaries: Sequence[MetricsSummary], timings: Optional[dict[str, TimingStats]] = None
) -> list[RankEntry]:
    """Best mean of the four headline metrics first; faster, then name, on ties."""
    timings = timings or {}
    entries = []
    for s in summaries:
        t = timings.get(s.model_ref)
        entries.append(RankEntry(s.model_ref, s.mean_score, t.mean_seconds_per_case if t else None))
    return sorted(
        entries,
        key=lambda e: (
            -e.mean_score,
            e.mean_seconds_per_case if e.mean_seconds_per_case is not None else float("inf"),
            e.model_ref,
        ),
    )


def summary_json(summaries: Sequence[MetricsSummary], extra: Optional[dict] = None) -> str:
    payload = {"models": [s.to_dict() for s in summaries]}
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def markdown_table(
    summaries: Sequence[MetricsSummary],
    timings: Optional[dict[str, TimingStats]] = None,
    ranking: Optional[Sequence[RankEntry]] = None,
) -> str:
    timings = timings or {}
    by_model = {s.model_ref: s for s in summaries}
    order = [e.model_ref for e in ranking] if ranking else [s.model_ref for s in summaries]
    lines = [
        "| rank | model | accuracy | precision | recall | f1 | mean | s/case | n | unparsed |",
        "|---:|---|---:|---:|---:|---:|---:|---:|---:|---:|",
    ]
    for rank, model in enumerate(order, 1):
        s = by_model[model]
        t = timings.get(model)
        secs = f"{t.mean_seconds_per_case:.3f}" if t else "-"
        lines.append(
            f"| {rank} | {model} | {s.accuracy:.4f} | {s.macro_precision:.4f} | {s.macro_recall:.4f} "
            f"| {s.macro_f1:.4f} | {s.mean_score:.4f} | {secs} | {s.n} | {s.parse_failure_count} |"
        )
    return "\n".join(lines) + "\n"
