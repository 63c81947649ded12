"""Confusion-matrix classification metrics: OA, AA, Cohen's kappa."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import ShapeError


@dataclass
class Metrics:
    confusion: np.ndarray  # (classes, classes) int64, rows = truth
    oa: float
    aa: float
    kappa: float

    def summary(self) -> str:
        return f"oa={self.oa:.4f} aa={self.aa:.4f} kappa={self.kappa:.4f}"


def confusion_matrix(truth, pred, n_classes: int) -> np.ndarray:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ShapeError(f"truth {truth.shape} vs pred {pred.shape}")
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (truth, pred), 1)
    return conf


def metrics_from_confusion(confusion: np.ndarray) -> Metrics:
    conf = np.asarray(confusion, dtype=np.int64)
    if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
        raise ShapeError(f"confusion matrix must be square, got {conf.shape}")
    total = conf.sum()
    if total <= 0:
        raise ShapeError("confusion matrix is empty")

    oa = conf.trace() / total

    row = conf.sum(axis=1)
    col = conf.sum(axis=0)
    support = row > 0
    recalls = np.divide(np.diag(conf), row, out=np.zeros(len(row)), where=support)
    aa = float(recalls[support].mean()) if support.any() else 0.0

    pe = float((row * col).sum()) / float(total) ** 2
    if oa >= 1.0:
        kappa = 1.0
    elif pe >= 1.0:
        kappa = 0.0
    else:
        kappa = (oa - pe) / (1.0 - pe)

    return Metrics(confusion=conf, oa=float(oa), aa=aa, kappa=float(kappa))
