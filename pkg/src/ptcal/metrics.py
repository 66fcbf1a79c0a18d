"""Calibration metrics, classification scores and the statistics used to compare arms.

Binned metrics follow the binary max-confidence convention: a prediction ``q``
for the positive class predicts class ``q >= 0.5`` with confidence
``max(q, 1 - q)``, so confidences live on ``[0.5, 1]`` and are split into
``M`` equal-width bins there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import EmptyDatasetError, PtcalError

NLL_EPS = 1e-12


@dataclass(frozen=True)
class BinStats:
    lo: float
    hi: float
    count: int
    mean_conf: Optional[float]
    accuracy: Optional[float]

    def __post_init__(self):
        if not self.lo < self.hi:
            raise PtcalError(f"bin bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]")
        if self.count < 0:
            raise PtcalError("bin count must be non-negative")
        if self.count == 0 and (self.mean_conf is not None or self.accuracy is not None):
            raise PtcalError("an empty bin has no confidence or accuracy")
        if self.count > 0 and (self.mean_conf is None or self.accuracy is None):
            raise PtcalError("a populated bin needs confidence and accuracy")

    @property
    def gap(self) -> float:
        return abs(self.accuracy - self.mean_conf)


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    f1: float
    ece: float
    mce: float
    oe: float
    nll: float
    brier: float
    bins: tuple[BinStats, ...]
    n: int
    M: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "M": self.M,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "ece": self.ece,
            "mce": self.mce,
            "oe": self.oe,
            "nll": self.nll,
            "brier": self.brier,
            "bins": [bin_to_dict(b) for b in self.bins],
        }


def bin_to_dict(b: BinStats) -> dict:
    return {"lo": b.lo, "hi": b.hi, "count": b.count, "mean_conf": b.mean_conf, "accuracy": b.accuracy}


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float


def _check_pairs(q, y):
    q = np.asarray(q, dtype=float).reshape(-1)
    y = np.asarray(y).reshape(-1)
    if q.size == 0:
        raise EmptyDatasetError("input")
    if q.shape != y.shape:
        raise PtcalError("predictions and labels differ in length")
    return q, y.astype(int)


def confidence_view(q, y):
    """Max-class confidence and correctness flags for binary predictions ``q``."""
    q, y = _check_pairs(q, y)
    pred = (q >= 0.5).astype(int)
    return np.maximum(q, 1.0 - q), pred == y


def bin_samples(conf, correct, M: int) -> list[BinStats]:
    if int(M) != M or M < 1:
        raise PtcalError(f"number of bins must be a positive integer, got {M!r}")
    M = int(M)
    conf = np.asarray(conf, dtype=float).reshape(-1)
    correct = np.asarray(correct, dtype=float).reshape(-1)
    edges = 0.5 + 0.5 * np.arange(M + 1) / M
    edges[-1] = 1.0
    idx = np.clip(np.searchsorted(edges, conf, side="right") - 1, 0, M - 1)
    counts = np.bincount(idx, minlength=M)
    conf_sum = np.bincount(idx, weights=conf, minlength=M)
    hit_sum = np.bincount(idx, weights=correct, minlength=M)
    bins = []
    for m in range(M):
        c = int(counts[m])
        if c:
            bins.append(BinStats(float(edges[m]), float(edges[m + 1]), c, float(conf_sum[m] / c), float(hit_sum[m] / c)))
        else:
            bins.append(BinStats(float(edges[m]), float(edges[m + 1]), 0, None, None))
    return bins


def reliability_data(q, y, M: int) -> list[BinStats]:
    """Per-bin (confidence, accuracy) pairs for a reliability diagram; same binning as :func:`ece`."""
    return bin_samples(*confidence_view(q, y), M)


def _populated(bins: Sequence[BinStats]) -> list[BinStats]:
    return [b for b in bins if b.count > 0]


def ece(bins: Sequence[BinStats], n: int) -> float:
    if n <= 0:
        raise PtcalError("ECE needs at least one sample")
    return float(sum(b.count / n * b.gap for b in _populated(bins)))


def mce(bins: Sequence[BinStats]) -> float:
    full = _populated(bins)
    if not full:
        raise PtcalError("MCE needs at least one populated bin")
    return float(max(b.gap for b in full))


def oe(bins: Sequence[BinStats], n: int) -> float:
    if n <= 0:
        raise PtcalError("OE needs at least one sample")
    return float(sum(b.count / n * b.mean_conf * max(b.mean_conf - b.accuracy, 0.0) for b in _populated(bins)))


def true_class_confidence(q, y) -> np.ndarray:
    q, y = _check_pairs(q, y)
    return np.where(y == 1, q, 1.0 - q)


def nll(p_true) -> float:
    """Mean natural-log loss of the probabilities given to the true class (clamped at 1e-12)."""
    p = np.asarray(p_true, dtype=float).reshape(-1)
    if p.size == 0:
        raise EmptyDatasetError("input")
    return float(np.mean(-np.log(np.clip(p, NLL_EPS, 1.0))))


def brier(q, y) -> float:
    q, y = _check_pairs(q, y)
    return float(np.mean((q - y) ** 2))


def accuracy_f1(q, y, threshold: float = 0.5) -> tuple[float, float]:
    q, y = _check_pairs(q, y)
    pred = (q >= threshold).astype(int)
    acc = float(np.mean(pred == y))
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    if tp + fp == 0 and tp + fn == 0:
        return acc, 1.0
    denom = 2 * tp + fp + fn
    return acc, (2 * tp / denom if denom else 0.0)


def evaluate(q, y, M: int = 15) -> MetricReport:
    """Full metric report for probabilities ``q`` of the positive class against labels ``y``."""
    q, y = _check_pairs(q, y)
    bins = reliability_data(q, y, M)
    n = int(q.size)
    acc, f1 = accuracy_f1(q, y)
    return MetricReport(
        accuracy=acc,
        f1=f1,
        ece=ece(bins, n),
        mce=mce(bins),
        oe=oe(bins, n),
        nll=nll(true_class_confidence(q, y)),
        brier=brier(q, y),
        bins=tuple(bins),
        n=n,
        M=int(M),
    )


# ---------------------------------------------------------------- correlation / ANOVA


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape or x.size < 2:
        raise PtcalError("pearson needs two equal-length inputs with at least 2 values")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise PtcalError("undefined correlation: zero variance")
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.dot(dx, dy) / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return min(1.0, max(-1.0, r))


def _betacf(a: float, b: float, x: float, tol: float = 1e-15, max_iter: int = 10_000) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise PtcalError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise PtcalError("betainc_reg needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f: float, d1: float, d2: float) -> float:
    """Upper tail P(F > f) of the F(d1, d2) distribution."""
    if f <= 0:
        return 1.0
    return min(1.0, max(0.0, betainc_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))))


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    groups = [np.asarray(g, dtype=float).reshape(-1) for g in groups]
    if len(groups) < 2:
        raise PtcalError("ANOVA needs at least 2 groups")
    if any(g.size < 2 for g in groups):
        raise PtcalError("ANOVA needs at least 2 values per group")
    allv = np.concatenate(groups)
    grand = allv.mean()
    ss_between = float(sum(g.size * (g.mean() - grand) ** 2 for g in groups))
    ss_within = float(sum(np.sum((g - g.mean()) ** 2) for g in groups))
    if not ss_within > 0:
        raise PtcalError("ANOVA undefined: zero within-group variance")
    k, n = len(groups), allv.size
    df_b, df_w = k - 1, n - k
    f = (ss_between / df_b) / (ss_within / df_w)
    return AnovaResult(f, df_b, df_w, f_sf(f, df_b, df_w))
