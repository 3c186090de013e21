"""Fixation-based scores for saliency maps: LCC, NSS and AUC.

Standard deviations are population (``ddof=0``) throughout.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import InvalidInputError, UndefinedMetricError
from .io import DensityMap, FixationSet

METRIC_LABELS = ("LCC", "NSS", "AUC", "TIME(s)")

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass
class MetricReport:
    image_id: str
    mode: str
    lcc: float
    nss: float
    auc: float
    time_seconds: float

    def as_row(self) -> dict:
        return {"LCC": self.lcc, "NSS": self.nss, "AUC": self.auc, "TIME(s)": self.time_seconds}

    def to_dict(self) -> dict:
        return asdict(self)


def _values(x) -> np.ndarray:
    data = getattr(x, "data", x)
    return np.asarray(data, dtype=np.float64)


def lcc(saliency, truth) -> float:
    """Pearson correlation between a saliency map and a fixation density map."""
    s = _values(saliency).ravel()
    g = _values(truth).ravel()
    if s.shape != g.shape:
        raise InvalidInputError(f"map sizes differ: {_values(saliency).shape} vs {_values(truth).shape}")
    s = s - s.mean()
    g = g - g.mean()
    ss, sg = np.sqrt(np.mean(s * s)), np.sqrt(np.mean(g * g))
    if ss == 0 or sg == 0:
        raise UndefinedMetricError("LCC is undefined for a constant map")
    r = float(np.mean(s * g) / (ss * sg))
    return min(1.0, max(-1.0, r))


def _fixation_pixels(shape, fixations: FixationSet):
    h, w = shape
    xs, ys = fixations.xs, fixations.ys
    inside = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    if not inside.any():
        raise InvalidInputError("no fixation falls inside the map")
    return ys[inside], xs[inside]


def nss(saliency, fixations: FixationSet) -> float:
    """Mean z-scored saliency at the fixation pixels (repeats counted)."""
    s = _values(saliency)
    std = s.std()
    if std == 0:
        raise UndefinedMetricError("NSS is undefined for a constant map")
    rows, cols = _fixation_pixels(s.shape, fixations)
    z = (s - s.mean()) / std
    return float(z[rows, cols].mean())


def roc_curve(scores: np.ndarray, positive: np.ndarray):
    """ROC points swept over every distinct score, highest threshold first.

    Returns ``(fpr, tpr)`` starting at ``(0, 0)`` and ending at ``(1, 1)``.
    """
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    pos = positive[order].astype(np.float64)
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tp = np.cumsum(pos)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0.0, tp / tp[-1]]
    fpr = np.r_[0.0, fp / fp[-1]]
    return fpr, tpr


def auc(saliency, fixations: FixationSet) -> float:
    """Area under the ROC curve with fixated pixels as positives.

    Each distinct fixated pixel is one positive; every other pixel is a
    negative.  Tied scores form a single threshold step, so the trapezoid
    across it credits half of the tied pairs.
    """
    s = _values(saliency)
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("saliency map contains non-finite values")
    rows, cols = _fixation_pixels(s.shape, fixations)
    positive = np.zeros(s.shape, dtype=bool)
    positive[rows, cols] = True
    if positive.all():
        raise UndefinedMetricError("AUC is undefined when every pixel is fixated")
    fpr, tpr = roc_curve(s.ravel(), positive.ravel())
    return float(_trapezoid(tpr, fpr))


def evaluate(saliency, fixations: FixationSet, truth: DensityMap, image_id="", mode="", seconds=0.0) -> MetricReport:
    return MetricReport(
        image_id=image_id,
        mode=mode,
        lcc=lcc(saliency, truth),
        nss=nss(saliency, fixations),
        auc=auc(saliency, fixations),
        time_seconds=float(seconds),
    )
