"""Synthetic miscalibrated scores with a known ground truth.

A true event probability ``r`` is drawn per sample, the label is a Bernoulli(r)
draw, and the reported score is a monotone distortion of ``r``:

``identity``      score = r
``temperature``   score = sigmoid(t * logit(r)); t > 1 is over-confident, and
                  temperature scaling recovers ``t``
``pt_weight``     score = w(r), the prospect-theory weighting with ``gamma``
``logistic``      score = sigmoid(a * logit(r) + b) with a > 0

Logits are stored clamped to +/-30.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import LOGIT_CLAMP, Dataset, EmptyDatasetError, PtcalError, logit, sigmoid
from .pt import PTParams, pt_weight

KINDS = ("identity", "temperature", "pt_weight", "logistic")
LAWS = ("uniform", "beta")


@dataclass(frozen=True)
class DistortionSpec:
    kind: str = "identity"
    n: int = 10_000
    seed: int = 0
    law: str = "uniform"
    t: float = 1.0
    gamma: float = 0.71
    a: float = 1.0
    b: float = 0.0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PtcalError(f"unknown distortion kind {self.kind!r}")
        if self.law not in LAWS:
            raise PtcalError(f"unknown true-probability law {self.law!r}")
        if int(self.n) != self.n or self.n < 1:
            raise PtcalError(f"n must be a positive integer, got {self.n!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise PtcalError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.kind == "temperature" and not self.t > 0:
            raise PtcalError(f"temperature must be positive, got {self.t}")
        if self.kind == "pt_weight":
            PTParams(self.gamma)
        if self.kind == "logistic" and not self.a > 0:
            raise PtcalError(f"logistic slope must be positive, got {self.a}")
        if self.law == "beta" and not (self.alpha > 0 and self.beta > 0):
            raise PtcalError("beta law needs alpha > 0 and beta > 0")

    def to_dict(self) -> dict:
        return asdict(self)


def _distort(spec: DistortionSpec, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if spec.kind == "identity":
        return r, logit(r)
    if spec.kind == "pt_weight":
        s = pt_weight(r, spec.gamma)
        return s, logit(s)
    with np.errstate(divide="ignore"):
        z = np.log(r) - np.log1p(-r)
    z = spec.t * z if spec.kind == "temperature" else spec.a * z + spec.b
    return sigmoid(z), np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)


def true_probabilities(spec: DistortionSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.law == "uniform":
        return rng.random(spec.n)
    return rng.beta(spec.alpha, spec.beta, spec.n)


def generate_with_truth(spec: DistortionSpec) -> tuple[Dataset, np.ndarray]:
    """Like :func:`generate` but also returns the true probabilities."""
    rng = np.random.default_rng(spec.seed)
    r = true_probabilities(spec, rng)
    labels = (rng.random(spec.n) < r).astype(np.int8)
    scores, logits = _distort(spec, r)
    return Dataset(scores, labels, logits, name=f"synth-{spec.kind}"), r


def generate(spec: DistortionSpec) -> Dataset:
    return generate_with_truth(spec)[0]


def shuffle_outcomes(d: Dataset, seed: int) -> Dataset:
    """Replace every label by an independent fair coin flip; scores and logits are kept."""
    if len(d) == 0:
        raise EmptyDatasetError()
    coins = np.random.default_rng(seed).integers(0, 2, size=len(d), dtype=np.int8)
    return d.with_labels(coins, name=f"{d.name}/random-outcomes" if d.name else "random-outcomes")
