"""Link-prediction scoring: distances, threshold-sweep ROC, AUC, histograms."""

import csv
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._util import atomic_write
from .embed import embed, pair_arrays
from .errors import DegenerateInputError, ParameterError


class RocPoint(NamedTuple):
    threshold: float
    true_positive_rate: float
    false_positive_rate: float


@dataclass(frozen=True)
class RocCurve:
    """Exact stepwise ROC; a pair is predicted positive when distance <= threshold.

    Holds cumulative true/false positive counts at each threshold, starting
    at -inf (nothing predicted) and ending at +inf (everything predicted).
    """

    thresholds: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    n_pos: int
    n_neg: int

    @property
    def tpr(self):
        return self.tp / self.n_pos

    @property
    def fpr(self):
        return self.fp / self.n_neg

    def __len__(self):
        return len(self.thresholds)

    def __iter__(self):
        for t, a, b in zip(self.thresholds.tolist(), self.tpr.tolist(), self.fpr.tolist()):
            yield RocPoint(t, a, b)


def pair_distances(model, features, pairs):
    """Style-space distance and label for each pair, in input order.

    Returns ``(distances, positive)`` arrays.
    """
    if not pairs:
        return np.zeros(0), np.zeros(0, dtype=bool)
    xa, xb, positive = pair_arrays(features, pairs)
    diff = embed(model, xa) - embed(model, xb)
    return np.sqrt((diff * diff).sum(axis=1)), positive


def _as_arrays(distances, positive):
    d = np.asarray(distances, dtype=np.float64).ravel()
    y = np.asarray(positive, dtype=bool).ravel()
    if d.shape != y.shape:
        raise ParameterError("distances and labels differ in length")
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ParameterError("distances must be finite and nonnegative")
    return d, y


def roc_curve(distances, positive):
    d, y = _as_arrays(distances, positive)
    n_pos = int(y.sum())
    n_neg = int(len(y) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("ROC needs at least one positive and one negative")
    values, inverse = np.unique(d, return_inverse=True)
    tp = np.cumsum(np.bincount(inverse, weights=y, minlength=len(values)).astype(np.int64))
    fp = np.cumsum(np.bincount(inverse, weights=~y, minlength=len(values)).astype(np.int64))
    thresholds = np.concatenate([[-np.inf], values, [np.inf]])
    tp = np.concatenate([[0], tp, [n_pos]])
    fp = np.concatenate([[0], fp, [n_neg]])
    return RocCurve(thresholds, tp, fp, n_pos, n_neg)


def auc(roc):
    """Trapezoidal area under the curve over FPR in [0, 1].

    Evaluated on integer counts so the result equals the rank statistic
    P(d+ < d-) + P(d+ = d-)/2 up to a single rounding.
    """
    tp = roc.tp.astype(np.int64)
    fp = roc.fp.astype(np.int64)
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    return twice_area / (2 * roc.n_pos * roc.n_neg)


def transfer_ratio(auc_holdout, auc_full, auc_baseline):
    """Fraction of the full model's AUC gain over the baseline reached by the holdout model."""
    denom = auc_full - auc_baseline
    if denom == 0:
        raise DegenerateInputError("auc_full equals auc_baseline; transfer ratio undefined")
    return (auc_holdout - auc_baseline) / denom


@dataclass(frozen=True)
class Histograms:
    edges: np.ndarray
    pos: np.ndarray
    neg: np.ndarray


def histogram(distances, positive, bins=50):
    """Per-label counts over shared bins spanning [0, max distance]; last bin right-closed."""
    if bins < 1:
        raise ParameterError("bins must be >= 1")
    d, y = _as_arrays(distances, positive)
    if len(d) == 0:
        raise DegenerateInputError("histogram of an empty distance set")
    top = float(d.max())
    edges = np.linspace(0.0, top if top > 0 else 1.0, bins + 1)
    pos, _ = np.histogram(d[y], bins=edges)
    neg, _ = np.histogram(d[~y], bins=edges)
    return Histograms(edges, pos.astype(np.int64), neg.astype(np.int64))


@dataclass(frozen=True)
class EvalReport:
    auc: float
    roc: RocCurve
    hist: Histograms
    positives: int
    negatives: int
    mean_pos_distance: float
    mean_neg_distance: float

    def to_dict(self):
        def t(x):
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "auc": self.auc,
            "roc": [{"t": t(p.threshold), "tpr": p.true_positive_rate, "fpr": p.false_positive_rate}
                    for p in self.roc],
            "pos_hist": {"edges": self.hist.edges.tolist(), "counts": self.hist.pos.tolist()},
            "neg_hist": {"edges": self.hist.edges.tolist(), "counts": self.hist.neg.tolist()},
            "counts": {"positives": self.positives, "negatives": self.negatives},
            "mean_distance": {"positive": self.mean_pos_distance, "negative": self.mean_neg_distance},
        }


def evaluate_distances(distances, positive, bins=50):
    d, y = _as_arrays(distances, positive)
    roc = roc_curve(d, y)
    return EvalReport(auc(roc), roc, histogram(d, y, bins), roc.n_pos, roc.n_neg,
                      float(d[y].mean()), float(d[~y].mean()))


def evaluate(model, features, pairs, bins=50):
    return evaluate_distances(*pair_distances(model, features, pairs), bins=bins)


def write_report(report, path, roc_csv=None, hist_csv=None):
    with atomic_write(path) as fh:
        json.dump(report.to_dict(), fh)
        fh.write("\n")
    if roc_csv is not None:
        with atomic_write(roc_csv, newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "tpr", "fpr"])
            for p in report.roc:
                w.writerow([repr(p.threshold), repr(p.true_positive_rate), repr(p.false_positive_rate)])
    if hist_csv is not None:
        h = report.hist
        with atomic_write(hist_csv, newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lo", "hi", "pos", "neg"])
            for i in range(len(h.pos)):
                w.writerow([repr(float(h.edges[i])), repr(float(h.edges[i + 1])), int(h.pos[i]), int(h.neg[i])])
