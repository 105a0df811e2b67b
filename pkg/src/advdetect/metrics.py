"""Threshold-free detector evaluation: ROC/PR curves, AUROC, AUPR.

Positives are adversarial examples, negatives are clean ones; a detector
score is "higher = more adversarial". AUROC is the probability that a
positive outscores a negative (ties count half, the Mann-Whitney convention)
and is reported in percent, as is AUPR.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import EmptyPoolError
from .validation import as_float_vector

CURVE_CSV_HEADER = ["threshold", "tp", "fp", "tn", "fn", "tpr", "fpr", "precision", "recall"]


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    tpr: float
    fpr: float
    precision: float
    recall: float


def _check_pools(pos, neg):
    pos = as_float_vector(pos, name="pos")
    neg = as_float_vector(neg, name="neg")
    if pos.size == 0 or neg.size == 0:
        raise EmptyPoolError("both score pools must be nonempty")
    return pos, neg


def ordered_pair_counts(pos, neg):
    """Exact counts of (p > n) and (p == n) pairs across the two pools."""
    pos, neg = _check_pools(pos, neg)
    neg_sorted = np.sort(neg)
    lo = np.searchsorted(neg_sorted, pos, side="left")
    hi = np.searchsorted(neg_sorted, pos, side="right")
    return int(lo.sum()), int((hi - lo).sum())


def auroc(pos, neg):
    """Rank-based AUROC in percent: [#(p>n) + 0.5*#(p=n)] / (|pos|*|neg|).

    Computed as one integer-valued numerator times 50.0 over the pair count,
    so auroc(pos, neg) + auroc(neg, pos) == 100.0 holds exactly.
    """
    gt, eq = ordered_pair_counts(pos, neg)
    pos, neg = _check_pools(pos, neg)
    total = pos.size * neg.size
    return (2 * gt + eq) * 50.0 / total


def _confusion_sweep(pos, neg):
    """Counts at each distinct threshold, descending ("score >= threshold"
    predicts positive)."""
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    tp = pos.size - np.searchsorted(pos_sorted, thresholds, side="left")
    fp = neg.size - np.searchsorted(neg_sorted, thresholds, side="left")
    return thresholds, tp, fp


def aupr(pos, neg):
    """Area under the precision-recall curve in percent.

    Interpolation-free step integration sum (R_i - R_{i-1}) * P_i over the
    descending-threshold sweep, with recall starting at 0.
    """
    pos, neg = _check_pools(pos, neg)
    _, tp, fp = _confusion_sweep(pos, neg)
    recall = tp / pos.size
    precision = tp / np.maximum(tp + fp, 1)
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision) * 100.0)


def roc_points(pos, neg):
    """One CurvePoint per distinct threshold, descending, plus the (0, 0)
    endpoint; the sweep ends at (fpr, tpr) = (1, 1)."""
    pos, neg = _check_pools(pos, neg)
    thresholds, tp, fp = _confusion_sweep(pos, neg)
    points = [_make_point(np.inf, 0, 0, pos.size, neg.size)]
    for theta, tp_i, fp_i in zip(thresholds, tp, fp):
        points.append(_make_point(float(theta), int(tp_i), int(fp_i), pos.size, neg.size))
    return points


def pr_points(pos, neg):
    pos, neg = _check_pools(pos, neg)
    thresholds, tp, fp = _confusion_sweep(pos, neg)
    return [
        _make_point(float(theta), int(tp_i), int(fp_i), pos.size, neg.size)
        for theta, tp_i, fp_i in zip(thresholds, tp, fp)
    ]


def _make_point(threshold, tp, fp, n_pos, n_neg):
    fn = n_pos - tp
    tn = n_neg - fp
    # precision at tp+fp == 0 defined as 1.0 so the PR sweep starts well defined
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    return CurvePoint(
        threshold=threshold,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        tpr=tp / n_pos,
        fpr=fp / n_neg,
        precision=precision,
        recall=tp / n_pos,
    )


def write_curve_csv(path, points):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_CSV_HEADER)
        for p in points:
            writer.writerow(
                [p.threshold, p.tp, p.fp, p.tn, p.fn, p.tpr, p.fpr, p.precision, p.recall]
            )
