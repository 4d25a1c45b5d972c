"""Classification metrics: accuracy, macro scores, confusion, one-vs-rest ROC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import N_MODES

__all__ = ["ClassificationMetrics", "confusion_matrix", "classification_metrics", "roc_curve", "auc"]


@dataclass
class ClassificationMetrics:
    accuracy: float
    macro_f1: float
    macro_precision: float
    macro_recall: float
    per_class_f1: np.ndarray
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray
    confusion: np.ndarray
    absent_classes: list[int] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
        }


def confusion_matrix(y_true, y_pred, n_classes: int = N_MODES) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("predictions and labels must align")
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (y_true, y_pred), 1)
    return matrix


def classification_metrics(y_true, y_pred, n_classes: int = N_MODES) -> ClassificationMetrics:
    """Metrics from aligned label/prediction sequences.

    Macro scores are unweighted means over all ``n_classes`` classes; a class
    absent from the labels contributes 0 to every macro score and is flagged
    in ``absent_classes``.
    """
    matrix = confusion_matrix(y_true, y_pred, n_classes)
    support = matrix.sum(axis=1)
    predicted = matrix.sum(axis=0)
    tp = np.diag(matrix).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        f1 = np.where(precision + recall > 0, 2.0 * precision * recall / (precision + recall), 0.0)
    absent = np.nonzero(support == 0)[0]
    f1[absent] = 0.0
    total = matrix.sum()
    return ClassificationMetrics(
        accuracy=float(tp.sum() / total) if total else 0.0,
        macro_f1=float(f1.mean()),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        per_class_f1=f1,
        per_class_precision=precision,
        per_class_recall=recall,
        confusion=matrix,
        absent_classes=[int(c) for c in absent],
    )


def roc_curve(positive: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-vs-rest ROC points from a boolean positive mask and raw scores.

    Returns (fpr, tpr, thresholds) sweeping the decision threshold from +inf
    downward; the first point is (0, 0) and the last (1, 1).
    """
    positive = np.asarray(positive, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    positive = positive[order]
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both positive and negative examples")
    tp = np.cumsum(positive)
    fp = np.cumsum(~positive)
    distinct = np.nonzero(np.diff(scores[order], append=-np.inf))[0]
    tpr = np.concatenate(([0.0], tp[distinct] / n_pos))
    fpr = np.concatenate(([0.0], fp[distinct] / n_neg))
    thresholds = np.concatenate(([np.inf], scores[order][distinct]))
    return fpr, tpr, thresholds


def auc(fpr: np.ndarray, tpr: np.ndarray) -> float:
    """Trapezoid-rule area under a ROC curve."""
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(tpr, fpr))
