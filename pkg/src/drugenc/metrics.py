"""Classification metrics (accuracy, macro/weighted F1) and Precision@K."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Container, Sequence

import numpy as np

from .errors import LengthMismatchError


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-rest counts per class."""

    true_positive: np.ndarray   # (L,)
    false_positive: np.ndarray  # (L,)
    false_negative: np.ndarray  # (L,)
    support: np.ndarray         # (L,) gold count per class
    total: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_f1: float
    weighted_f1: float
    precision: np.ndarray  # (L,)
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray


def confusion(preds: Sequence[int], golds: Sequence[int], label_count: int) -> ConfusionCounts:
    preds = np.asarray(preds, dtype=np.int64)
    golds = np.asarray(golds, dtype=np.int64)
    if preds.shape != golds.shape:
        raise LengthMismatchError(
            f"{len(preds)} predictions vs {len(golds)} gold labels"
        )
    if preds.size and (min(preds.min(), golds.min()) < 0
                       or max(preds.max(), golds.max()) >= label_count):
        raise ValueError(f"labels must lie in [0, {label_count})")

    tp = np.zeros(label_count, dtype=np.int64)
    fp = np.zeros(label_count, dtype=np.int64)
    fn = np.zeros(label_count, dtype=np.int64)
    hit = preds == golds
    np.add.at(tp, golds[hit], 1)
    np.add.at(fp, preds[~hit], 1)
    np.add.at(fn, golds[~hit], 1)
    support = np.bincount(golds, minlength=label_count)
    return ConfusionCounts(
        true_positive=tp,
        false_positive=fp,
        false_negative=fn,
        support=support,
        total=int(preds.size),
    )


def report(counts: ConfusionCounts) -> MetricsReport:
    """Accuracy, per-class P/R/F1, macro F1 over all classes (absent classes
    contribute 0), and support-weighted F1."""
    if counts.total <= 0:
        raise ValueError("cannot compute metrics over zero predictions")
    tp = counts.true_positive.astype(np.float64)
    fp = counts.false_positive.astype(np.float64)
    fn = counts.false_negative.astype(np.float64)

    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f1 = np.where(
            precision + recall > 0,
            2.0 * precision * recall / (precision + recall),
            0.0,
        )
    weights = counts.support / counts.total
    return MetricsReport(
        accuracy=float(tp.sum() / counts.total),
        macro_f1=float(f1.mean()),
        weighted_f1=float((weights * f1).sum()),
        precision=precision,
        recall=recall,
        f1=f1,
        support=counts.support.copy(),
    )


def precision_at_k(
    retrieved: Sequence[str],
    correct: Container[str] | Callable[[str], bool],
    k: int,
) -> float:
    """Fraction M/K of the first min(K, len) retrieved items passing the
    membership test; the denominator is always K."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    test = correct if callable(correct) else correct.__contains__
    hits = sum(1 for item in retrieved[:k] if test(item))
    return hits / k


def mean_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Field-wise mean over reports on the same gold labels."""
    if not reports:
        raise ValueError("no reports to average")
    first = reports[0]
    for r in reports[1:]:
        if not np.array_equal(r.support, first.support):
            raise ValueError("reports cover different gold labels")
    return MetricsReport(
        accuracy=float(np.mean([r.accuracy for r in reports])),
        macro_f1=float(np.mean([r.macro_f1 for r in reports])),
        weighted_f1=float(np.mean([r.weighted_f1 for r in reports])),
        precision=np.mean([r.precision for r in reports], axis=0),
        recall=np.mean([r.recall for r in reports], axis=0),
        f1=np.mean([r.f1 for r in reports], axis=0),
        support=first.support.copy(),
    )


def format_report(rep: MetricsReport) -> str:
    """Key-value text block, fixed six decimals."""
    lines = [
        f"accuracy\t{rep.accuracy:.6f}",
        f"macro_f1\t{rep.macro_f1:.6f}",
        f"weighted_f1\t{rep.weighted_f1:.6f}",
    ]
    for i in range(len(rep.f1)):
        lines.append(
            f"class_{i}\tprecision={rep.precision[i]:.6f}"
            f"\trecall={rep.recall[i]:.6f}"
            f"\tf1={rep.f1[i]:.6f}"
            f"\tsupport={int(rep.support[i])}"
        )
    return "\n".join(lines) + "\n"


def save_report(rep: MetricsReport, path: str | Path) -> None:
    Path(path).write_text(format_report(rep), encoding="utf-8")
