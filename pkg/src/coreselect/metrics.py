"""Multiclass evaluation: accuracy, macro precision/recall/F1, macro specificity.

Per-class values are averaged without class weighting (macro). Any 0/0
ratio (a class never predicted, or absent from the truth) is defined as 0,
keeping every metric a total, deterministic function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    specificity_macro: float
    per_class: dict  # class id -> {precision, recall, f1, specificity}
    confusion: np.ndarray  # (J, J) counts, true class by predicted class

    def to_dict(self) -> dict:
        return {
            "acc": self.acc,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
            "specificity_macro": self.specificity_macro,
            "per_class": {str(c): dict(v) for c, v in self.per_class.items()},
            "confusion": self.confusion.tolist(),
        }


def _check_pair(labels, preds, num_classes: int):
    labels = np.asarray(labels, dtype=np.int64)
    preds = np.asarray(preds, dtype=np.int64)
    if labels.ndim != 1 or labels.shape != preds.shape:
        raise ShapeError("labels and predictions must be 1-D and aligned")
    if labels.size == 0:
        raise ValidationError("cannot score an empty prediction set")
    if num_classes < 2:
        raise ValidationError("num_classes must be >= 2")
    for name, arr in (("label", labels), ("prediction", preds)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise ValidationError(
                f"{name} {int(arr[np.argmax((arr < 0) | (arr >= num_classes))])} "
                f"out of range for {num_classes} classes"
            )
    return labels, preds


def confusion_matrix(labels, preds, num_classes: int) -> np.ndarray:
    """J x J count matrix; entry [t][p] counts samples of true class t
    predicted as class p."""
    labels, preds = _check_pair(labels, preds, num_classes)
    flat = labels * num_classes + preds
    counts = np.bincount(flat, minlength=num_classes * num_classes)
    return counts.reshape(num_classes, num_classes)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def report(labels, preds, num_classes: int) -> MetricsReport:
    """Full metric suite from labels and predictions.

    Per class c: precision TP/(TP+FP), recall TP/(TP+FN), specificity
    TN/(TN+FP), and F1 as the harmonic mean of precision and recall.
    """
    cm = confusion_matrix(labels, preds, num_classes)
    n = cm.sum()
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    tn = n - tp - fp - fn

    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    specificity = _ratio(tn, tn + fp)
    f1 = _ratio(2.0 * precision * recall, precision + recall)

    per_class = {
        int(c): {
            "precision": float(precision[c]),
            "recall": float(recall[c]),
            "f1": float(f1[c]),
            "specificity": float(specificity[c]),
        }
        for c in range(num_classes)
    }
    return MetricsReport(
        acc=float(tp.sum() / n),
        precision_macro=float(precision.mean()),
        recall_macro=float(recall.mean()),
        f1_macro=float(f1.mean()),
        specificity_macro=float(specificity.mean()),
        per_class=per_class,
        confusion=cm,
    )
