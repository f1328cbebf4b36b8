"""Evaluation mathematics for binary Normal/Pneumonia classification.

Positive class is Pneumonia (label 1) everywhere. The decision rule is
"predict positive iff score >= threshold", so tied scores are predicted
positive.

ROC and PR curves sweep every distinct score as a threshold, grouping tied
scores into a single step. Both AUCs integrate with the trapezoid rule;
with tie grouping the ROC AUC equals the pairwise concordance statistic
(ties counted 1/2). PR AUC integrates precision over recall starting from
the conventional anchor point (recall 0, precision 1); average precision is
also reported as a secondary number.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

POSITIVE_CLASS = "pneumonia"
NEGATIVE_CLASS = "normal"


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    @property
    def accuracy(self) -> float:
        # Integer sums first so the ratio is exact.
        return (self.tn + self.tp) / self.total


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


@dataclass(frozen=True)
class CurvePoints:
    """Threshold sweep points; x/y are (FPR, TPR) for ROC, (recall, precision) for PR."""
    thresholds: np.ndarray
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class EvaluationReport:
    confusion: ConfusionMatrix
    accuracy: float
    per_class: dict[str, ClassMetrics]
    roc: CurvePoints
    roc_auc: float
    pr: CurvePoints
    pr_auc: float
    average_precision: float
    threshold: float


def _as_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.size == 0:
        raise InputError("empty input")
    if s.size != y.size:
        raise InputError(f"{s.size} scores vs {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise InputError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def confusion_at_threshold(scores, labels, threshold: float = 0.5) -> ConfusionMatrix:
    s, y = _as_scores_labels(scores, labels)
    pred = s >= threshold
    pos = y == 1
    return ConfusionMatrix(
        tn=int((~pred & ~pos).sum()),
        fp=int((pred & ~pos).sum()),
        fn=int((~pred & pos).sum()),
        tp=int((pred & pos).sum()),
    )


def _prf(correct: int, predicted: int, actual: int) -> ClassMetrics:
    degenerate = predicted == 0 or actual == 0
    precision = correct / predicted if predicted else 0.0
    recall = correct / actual if actual else 0.0
    if precision + recall == 0.0:
        return ClassMetrics(precision, recall, 0.0, degenerate=True)
    f1 = 2.0 * precision * recall / (precision + recall)
    return ClassMetrics(precision, recall, f1, degenerate=degenerate)


def precision_recall_f1(cm: ConfusionMatrix) -> dict[str, ClassMetrics]:
    """Per-class precision/recall/F1 for both classes.

    Zero denominators yield 0 with ``degenerate=True`` instead of raising.
    """
    return {
        NEGATIVE_CLASS: _prf(cm.tn, cm.tn + cm.fn, cm.tn + cm.fp),
        POSITIVE_CLASS: _prf(cm.tp, cm.tp + cm.fp, cm.tp + cm.fn),
    }


def _threshold_sweep(s: np.ndarray, y: np.ndarray):
    """Cumulative tp/fp after each distinct-score group, scores descending."""
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    last_of_group = np.r_[np.diff(s_sorted) != 0, True]
    tp = np.cumsum(y_sorted)[last_of_group]
    fp = np.cumsum(1 - y_sorted)[last_of_group]
    return s_sorted[last_of_group], tp, fp


def _trapezoid(ys: np.ndarray, xs: np.ndarray) -> float:
    return float(0.5 * ((ys[1:] + ys[:-1]) * np.diff(xs)).sum())


def roc_curve_auc(scores, labels) -> tuple[CurvePoints, float]:
    """ROC points (FPR, TPR) over all distinct thresholds and trapezoidal AUC.

    The sentinel point (0, 0) at threshold +inf is always present; the lowest
    threshold predicts everything positive, giving (1, 1).
    """
    s, y = _as_scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("ROC requires at least one positive and one negative label")
    thresholds, tp, fp = _threshold_sweep(s, y)
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    thresholds = np.r_[np.inf, thresholds]
    points = CurvePoints(thresholds=thresholds, x=fpr, y=tpr)
    return points, _trapezoid(tpr, fpr)


def pr_curve_auc(scores, labels) -> tuple[CurvePoints, float]:
    """PR points (recall, precision) over all distinct thresholds, recall-sorted,
    with the anchor (0, 1) at threshold +inf; AUC by trapezoid over recall."""
    s, y = _as_scores_labels(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise InputError("PR curve requires at least one positive label")
    thresholds, tp, fp = _threshold_sweep(s, y)
    recall = np.r_[0.0, tp / n_pos]
    precision = np.r_[1.0, tp / (tp + fp)]
    thresholds = np.r_[np.inf, thresholds]
    points = CurvePoints(thresholds=thresholds, x=recall, y=precision)
    return points, _trapezoid(precision, recall)


def average_precision(scores, labels) -> float:
    """Sum of precision weighted by recall increments (step integration)."""
    points, _ = pr_curve_auc(scores, labels)
    recall, precision = points.x, points.y
    return float((np.diff(recall) * precision[1:]).sum())


def evaluate_scores(scores, labels, threshold: float = 0.5) -> EvaluationReport:
    cm = confusion_at_threshold(scores, labels, threshold)
    roc, roc_auc = roc_curve_auc(scores, labels)
    pr, pr_auc = pr_curve_auc(scores, labels)
    ap = float((np.diff(pr.x) * pr.y[1:]).sum())
    return EvaluationReport(
        confusion=cm,
        accuracy=cm.accuracy,
        per_class=precision_recall_f1(cm),
        roc=roc,
        roc_auc=roc_auc,
        pr=pr,
        pr_auc=pr_auc,
        average_precision=ap,
        threshold=threshold,
    )


def report_to_dict(report: EvaluationReport) -> dict:
    cm = report.confusion
    return {
        "total": cm.total,
        "confusion": {"tn": cm.tn, "fp": cm.fp, "fn": cm.fn, "tp": cm.tp},
        "accuracy": report.accuracy,
        "threshold": report.threshold,
        "per_class": {
            name: {"precision": m.precision, "recall": m.recall,
                   "f1": m.f1, "degenerate": m.degenerate}
            for name, m in report.per_class.items()
        },
        "roc_auc": report.roc_auc,
        "pr_auc": report.pr_auc,
        "average_precision": report.average_precision,
    }


def _write_curve_csv(path: Path, points: CurvePoints, x_name: str, y_name: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["threshold", x_name, y_name])
        for t, x, y in zip(points.thresholds, points.x, points.y):
            writer.writerow([repr(float(t)), repr(float(x)), repr(float(y))])


def write_report(report: EvaluationReport, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json plus roc.csv and pr.csv curve data; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.json",
        "roc": out / "roc.csv",
        "pr": out / "pr.csv",
    }
    with open(paths["report"], "w") as f:
        json.dump(report_to_dict(report), f, indent=2, sort_keys=True)
        f.write("\n")
    _write_curve_csv(paths["roc"], report.roc, "fpr", "tpr")
    _write_curve_csv(paths["pr"], report.pr, "recall", "precision")
    return paths
