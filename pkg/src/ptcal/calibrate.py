"""Post-hoc calibrators for binary classifiers.

Every fitted model is an immutable dataclass with an ``apply`` method that maps
scores (or, for temperature scaling, logits) to calibrated probabilities
elementwise. ``fit_*`` functions build them from a validation :class:`Dataset`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import Dataset, EmptyDatasetError, PtcalError, ScoredSample, sigmoid

DEFAULT_BINS = 15
EQUAL_WIDTH = "equal-width"
EQUAL_FREQUENCY = "equal-frequency"
BIN_STRATEGIES = (EQUAL_WIDTH, EQUAL_FREQUENCY)

PLATT_TOL = 1e-8
PLATT_MAX_ITER = 100
TEMPERATURE_BOUNDS = (0.05, 20.0)
TEMPERATURE_TOL = 1e-6


class ConvergenceError(PtcalError):
    def __init__(self, message: str, last_iterate, grad_norm: float):
        super().__init__(f"{message} (last iterate {tuple(last_iterate)}, gradient norm {grad_norm:.3g})")
        self.last_iterate = tuple(last_iterate)
        self.grad_norm = grad_norm


def _scalar_or_array(out):
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class IdentityModel:
    """Pass-through calibrator; used for the no-calibration baseline."""

    kind = "identity"

    def apply(self, p):
        return _scalar_or_array(p)


@dataclass(frozen=True)
class PlattModel:
    a: float
    b: float
    kind = "platt"

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise PtcalError(f"Platt parameters must be finite, got a={self.a}, b={self.b}")

    def apply(self, p):
        return sigmoid(self.a * np.asarray(p, dtype=float) + self.b)


@dataclass(frozen=True)
class IsotonicModel:
    """Non-decreasing step function given by its left breakpoints."""

    xs: tuple[float, ...]
    ys: tuple[float, ...]
    kind = "isotonic"

    def __post_init__(self):
        xs, ys = np.asarray(self.xs, float), np.asarray(self.ys, float)
        if xs.size == 0 or xs.shape != ys.shape:
            raise PtcalError("isotonic model needs matching, non-empty breakpoints")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) < 0):
            raise PtcalError("isotonic breakpoints must have increasing x and non-decreasing y")
        if np.any((ys < 0) | (ys > 1)) or np.any((xs < 0) | (xs > 1)):
            raise PtcalError("isotonic breakpoints must lie in [0, 1]")

    @property
    def breakpoints(self) -> list[tuple[float, float]]:
        return list(zip(self.xs, self.ys))

    def apply(self, p):
        idx = np.searchsorted(np.asarray(self.xs), np.asarray(p, dtype=float), side="right") - 1
        return _scalar_or_array(np.asarray(self.ys)[np.clip(idx, 0, None)])


@dataclass(frozen=True)
class BinningModel:
    edges: tuple[float, ...]
    values: tuple[float, ...]
    strategy: str = EQUAL_WIDTH
    kind = "binning"

    def __post_init__(self):
        e = np.asarray(self.edges, float)
        if e.size < 2 or e[0] != 0.0 or e[-1] != 1.0 or np.any(np.diff(e) <= 0):
            raise PtcalError("bin edges must increase strictly from 0 to 1")
        if len(self.values) != e.size - 1:
            raise PtcalError("need exactly one value per bin")
        if any(not (0.0 <= v <= 1.0) for v in self.values):
            raise PtcalError("bin values must lie in [0, 1]")
        if self.strategy not in BIN_STRATEGIES:
            raise PtcalError(f"unknown bin strategy {self.strategy!r}")

    @property
    def n_bins(self) -> int:
        return len(self.values)

    def bin_index(self, p):
        idx = np.searchsorted(np.asarray(self.edges), np.asarray(p, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_bins - 1)

    def apply(self, p):
        return _scalar_or_array(np.asarray(self.values)[self.bin_index(p)])


@dataclass(frozen=True)
class TemperatureModel:
    t: float
    kind = "temperature"

    def __post_init__(self):
        if not (self.t > 0 and math.isfinite(self.t)):
            raise PtcalError(f"temperature must be positive, got {self.t}")

    def apply(self, z):
        """Calibrated probability for logit(s) ``z``."""
        return sigmoid(np.asarray(z, dtype=float) / self.t)


@dataclass(frozen=True)
class BinningWithPlatt:
    platt: PlattModel
    binning: BinningModel
    kind = "binning_with_platt"

    def apply(self, p):
        return self.binning.apply(self.platt.apply(p))


CalibratorModel = Union[IdentityModel, PlattModel, IsotonicModel, BinningModel, TemperatureModel, BinningWithPlatt]


# ---------------------------------------------------------------- Platt


def _platt_objective(a, b, p, y):
    z = a * p + b
    # mean Bernoulli NLL of sigmoid(z): log(1 + e^z) - y z
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def fit_platt(val: Dataset, tol: float = PLATT_TOL, max_iter: int = PLATT_MAX_ITER) -> PlattModel:
    """Maximum-likelihood logistic fit ``sigmoid(a * score + b)``.

    Newton's method from ``(1, 0)`` with step halving whenever a full step
    would increase the mean negative log-likelihood. Stops when the gradient's
    infinity norm drops below ``tol``.
    """
    val.require_both_classes()
    p = val.scores
    y = val.labels.astype(float)
    a, b = 1.0, 0.0
    loss = _platt_objective(a, b, p, y)
    gnorm = math.inf
    for _ in range(max_iter):
        q = sigmoid(a * p + b)
        r = q - y
        grad = np.array([np.mean(r * p), np.mean(r)])
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            return PlattModel(a, b)
        s = q * (1.0 - q)
        h = np.array([[np.mean(s * p * p), np.mean(s * p)], [np.mean(s * p), np.mean(s)]])
        try:
            step = np.linalg.solve(h, grad)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular Hessian in Platt fit", (a, b), gnorm) from None
        t = 1.0
        while True:
            na, nb = a - t * step[0], b - t * step[1]
            new_loss = _platt_objective(na, nb, p, y)
            if new_loss <= loss or t < 1e-10:
                break
            t *= 0.5
        a, b, loss = float(na), float(nb), new_loss
    q = sigmoid(a * p + b)
    gnorm = float(np.max(np.abs([np.mean((q - y) * p), np.mean(q - y)])))
    if gnorm < tol:
        return PlattModel(a, b)
    raise ConvergenceError("Platt scaling did not converge", (a, b), gnorm)


def apply_platt(m: PlattModel, p):
    return m.apply(p)


# ---------------------------------------------------------------- isotonic


def pav(y, w=None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit of the sequence ``y`` (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    means: list[float] = []
    weights: list[float] = []
    sizes: list[int] = []
    for yi, wi in zip(y.tolist(), w.tolist()):
        means.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, s2 = means.pop(), weights.pop(), sizes.pop()
            w1 = weights[-1]
            wt = w1 + w2
            means[-1] = (means[-1] * w1 + m2 * w2) / wt
            weights[-1] = wt
            sizes[-1] += s2
    return np.repeat(means, sizes)


def _pool_ties(scores, labels):
    order = np.argsort(scores, kind="stable")
    xs_sorted = scores[order]
    ys_sorted = labels[order].astype(float)
    ux, start, counts = np.unique(xs_sorted, return_index=True, return_counts=True)
    sums = np.add.reduceat(ys_sorted, start)
    return ux, sums / counts, counts.astype(float)


def fit_isotonic(val: Dataset) -> IsotonicModel:
    """Least-squares non-decreasing step function of score onto label.

    Samples sharing a score are pooled into their mean first; consecutive
    score levels with equal fitted value collapse into one breakpoint.
    """
    if len(val) == 0:
        raise EmptyDatasetError()
    ux, uy, wts = _pool_ties(val.scores, val.labels)
    fitted = np.clip(pav(uy, wts), 0.0, 1.0)
    keep = np.ones(fitted.shape, dtype=bool)
    keep[1:] = fitted[1:] != fitted[:-1]
    return IsotonicModel(tuple(ux[keep].tolist()), tuple(fitted[keep].tolist()))


def apply_isotonic(m: IsotonicModel, p):
    return m.apply(p)


# ---------------------------------------------------------------- histogram binning


def _bin_edges(scores: np.ndarray, n_bins: int, strategy: str) -> np.ndarray:
    if strategy == EQUAL_WIDTH:
        edges = np.arange(n_bins + 1) / n_bins
        edges[-1] = 1.0
        return edges
    if strategy == EQUAL_FREQUENCY:
        inner = np.quantile(scores, np.arange(1, n_bins) / n_bins)
        inner = np.unique(inner[(inner > 0.0) & (inner < 1.0)])
        return np.concatenate(([0.0], inner, [1.0]))
    raise PtcalError(f"unknown bin strategy {strategy!r}")


def fit_binning(val: Dataset, n_bins: int = DEFAULT_BINS, strategy: str = EQUAL_WIDTH) -> BinningModel:
    """Histogram binning: each bin maps to the positive rate of its validation samples.

    Bins are ``[e_k, e_k+1)`` with the last one closed. Equal-frequency edges
    are empirical quantiles, with duplicates merged (so fewer than
    ``n_bins`` bins may result). An empty bin copies the nearest populated
    bin to its left, or to its right when none exists on the left.
    """
    if int(n_bins) != n_bins or n_bins < 1:
        raise PtcalError(f"number of bins must be a positive integer, got {n_bins!r}")
    if len(val) == 0:
        raise EmptyDatasetError()
    edges = _bin_edges(val.scores, int(n_bins), strategy)
    m = len(edges) - 1
    idx = np.clip(np.searchsorted(edges, val.scores, side="right") - 1, 0, m - 1)
    counts = np.bincount(idx, minlength=m)
    positives = np.bincount(idx, weights=val.labels.astype(float), minlength=m)
    values = np.full(m, np.nan)
    filled = counts > 0
    values[filled] = positives[filled] / counts[filled]
    last = np.nan
    for k in range(m):
        if filled[k]:
            last = values[k]
        elif not math.isnan(last):
            values[k] = last
    first = values[np.argmax(filled)]
    values[np.isnan(values)] = first
    return BinningModel(tuple(edges.tolist()), tuple(values.tolist()), strategy)


def apply_binning(m: BinningModel, p):
    return m.apply(p)


# ---------------------------------------------------------------- temperature

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo: float, hi: float, tol: float):
    """Minimise a unimodal ``f`` on ``[lo, hi]``; returns the midpoint of the final bracket."""
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def temperature_nll(t: float, z: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood of labels under ``sigmoid(z / t)``."""
    s = z / t
    return float(np.mean(np.logaddexp(0.0, s) - y * s))


def fit_temperature(val: Dataset, bounds=TEMPERATURE_BOUNDS, tol: float = TEMPERATURE_TOL) -> TemperatureModel:
    if val.logits is None:
        raise PtcalError("logits required")
    val.require_both_classes()
    z = val.logits
    y = val.labels.astype(float)
    t = golden_section(lambda t: temperature_nll(t, z, y), bounds[0], bounds[1], tol)
    return TemperatureModel(t)


def apply_temperature(m: TemperatureModel, z):
    return m.apply(z)


# ---------------------------------------------------------------- composite


def fit_binning_with_platt(
    val: Dataset,
    n_bins: int = DEFAULT_BINS,
    strategy: str = EQUAL_WIDTH,
    platt: Optional[PlattModel] = None,
) -> BinningWithPlatt:
    """Platt scaling followed by histogram binning of the Platt outputs.

    Pass ``platt`` to skip the first fit and bin through a fixed sigmoid.
    """
    if platt is None:
        platt = fit_platt(val)
    mapped = Dataset(platt.apply(val.scores), val.labels, name=val.name)
    return BinningWithPlatt(platt, fit_binning(mapped, n_bins, strategy))


# ---------------------------------------------------------------- dispatch

METHODS = ("identity", "platt", "isotonic", "binning", "temperature", "binning_with_platt")


def fit_calibrator(
    method: str, val: Dataset, n_bins: int = DEFAULT_BINS, strategy: str = EQUAL_WIDTH
) -> CalibratorModel:
    if method == "identity":
        return IdentityModel()
    if method == "platt":
        return fit_platt(val)
    if method == "isotonic":
        return fit_isotonic(val)
    if method == "binning":
        return fit_binning(val, n_bins, strategy)
    if method == "temperature":
        return fit_temperature(val)
    if method == "binning_with_platt":
        return fit_binning_with_platt(val, n_bins, strategy)
    raise PtcalError(f"unknown calibration method {method!r}; choose from {', '.join(METHODS)}")


def apply_calibrator(m: CalibratorModel, s: ScoredSample) -> float:
    if isinstance(m, TemperatureModel):
        if s.logit is None:
            raise PtcalError("logits required")
        return m.apply(s.logit)
    return m.apply(s.score)


def calibrate_dataset(m: CalibratorModel, d: Dataset) -> np.ndarray:
    """Vectorised :func:`apply_calibrator` over every sample of ``d``."""
    if isinstance(m, TemperatureModel):
        if d.logits is None:
            raise PtcalError("logits required")
        out = m.apply(d.logits)
    else:
        out = m.apply(d.scores)
    return np.atleast_1d(np.asarray(out, dtype=float))
