"""Classification metrics: balanced accuracy, Cohen's kappa, AUROC (binary),
macro F1, and their chance baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAgreement, EmptyClass, OneClassOnly


@dataclass
class MetricReport:
    bac: float
    f1_macro: float
    kappa: float
    auroc: float | None = None
    provenance: dict = field(default_factory=dict)


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """K x K counts, rows = true class, cols = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred lengths differ")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def balanced_accuracy(cm: np.ndarray) -> float:
    """Unweighted mean per-class recall."""
    cm = np.asarray(cm, dtype=np.float64)
    row_sums = cm.sum(axis=1)
    if not row_sums.all():
        raise EmptyClass(f"true classes with zero samples: {np.where(row_sums == 0)[0].tolist()}")
    return float((cm.diagonal() / row_sums).mean())


def cohens_kappa(cm: np.ndarray) -> float:
    """(p_o - p_e) / (1 - p_e), p_e from the marginal product."""
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    p_o = np.trace(cm) / total
    p_e = float(np.dot(cm.sum(axis=1), cm.sum(axis=0))) / (total * total)
    if p_e >= 1.0 - 1e-15:
        raise DegenerateAgreement("chance agreement p_e == 1")
    return float((p_o - p_e) / (1.0 - p_e))


def f1_macro(cm: np.ndarray) -> float:
    """Unweighted mean per-class F1; a class with precision + recall == 0
    contributes 0."""
    cm = np.asarray(cm, dtype=np.float64)
    if cm.sum() <= 0:
        raise ValueError("empty confusion matrix")
    tp = cm.diagonal()
    # 2pr/(p+r) simplifies to 2*tp/(pred+true); both give 0 when tp == 0,
    # and tp <= min(pred, true) makes the clamped denominator safe
    denom = cm.sum(axis=0) + cm.sum(axis=1)
    f1 = 2.0 * tp / np.maximum(denom, 1.0)
    return float(f1.mean())


def auroc(scores, labels) -> float:
    """P(score+ > score-) + 0.5 P(tie), via a single rank pass."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("AUROC needs both classes present")
    # midranks handle ties: sum of positive ranks gives the Mann-Whitney U
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def chance_level(metric: str, n_classes: int) -> float:
    """Random-chance baseline used as P_chance in the efficiency ratios."""
    if n_classes < 2:
        raise ValueError("n_classes must be >= 2")
    if metric in ("bac", "f1_macro"):
        return 1.0 / n_classes
    if metric == "kappa":
        return 0.0
    if metric == "auroc":
        return 0.5
    raise ValueError(f"unknown metric {metric!r}")


def score_predictions(y_true, proba: np.ndarray, n_classes: int,
                      provenance: dict | None = None) -> MetricReport:
    """Metric report for one evaluation cell; AUROC only for binary tasks."""
    proba = np.asarray(proba, dtype=np.float64)
    y_pred = proba.argmax(axis=1)
    cm = confusion_matrix(y_true, y_pred, n_classes)
    roc = auroc(proba[:, 1], y_true) if n_classes == 2 else None
    return MetricReport(
        bac=balanced_accuracy(cm),
        f1_macro=f1_macro(cm),
        kappa=cohens_kappa(cm),
        auroc=roc,
        provenance=provenance or {},
    )
