"""Shared domain types, validation and deterministic dataset splitting."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

#: Identifier of the bit generator behind every random draw in the package.
RNG_ALGORITHM = "numpy.PCG64"

LOGIT_CLAMP = 30.0
_LOGIT_TOL = 1e-6


class PtcalError(ValueError):
    """Base class for every validation or fitting failure raised by ptcal."""


class ProbabilityError(PtcalError):
    def __init__(self, value: float):
        super().__init__(f"probability out of range: {value!r}")
        self.value = value


class EmptyDatasetError(PtcalError):
    def __init__(self, what: str = "dataset"):
        super().__init__(f"empty {what}")


class SplitError(PtcalError):
    pass


def sigmoid(x):
    """Numerically stable logistic function; scalar in, float out."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def logit(p, clamp: float = LOGIT_CLAMP):
    """log(p / (1 - p)) clamped to [-clamp, clamp]; 0 and 1 map to the clamps."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        z = np.log(p) - np.log1p(-p)
    z = np.clip(z, -clamp, clamp)
    return float(z) if z.ndim == 0 else z


def validate_probability(x: float) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):  # also rejects NaN
        raise ProbabilityError(x)
    return x


def derive_seed(master_seed: int, purpose: str) -> int:
    """Derive an independent 64-bit seed for one named purpose.

    The derivation is ``SeedSequence(master_seed, spawn_key=(crc32(purpose),))``
    and the first 64 bits of its generated state, so every consumer of
    randomness (``"split"``, ``"synth"``, ``"shuffle"``, ``"agents"``, ...)
    gets a stream that depends only on the master seed and its own name.
    """
    key = zlib.crc32(purpose.encode("utf-8"))
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(key,))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


@dataclass(frozen=True)
class ScoredSample:
    score: float
    label: int
    logit: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "score", validate_probability(self.score))
        if self.label not in (0, 1):
            raise PtcalError(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))
        if self.logit is not None:
            z = float(self.logit)
            if not math.isfinite(z) or abs(sigmoid(z) - self.score) > _LOGIT_TOL:
                raise PtcalError(f"logit {z!r} inconsistent with score {self.score!r}")
            object.__setattr__(self, "logit", z)


class Dataset:
    """An ordered, immutable collection of scored binary predictions.

    Stored column-wise as read-only numpy arrays; iterating yields
    :class:`ScoredSample` objects.
    """

    __slots__ = ("scores", "labels", "logits", "name")

    def __init__(self, scores, labels, logits=None, name: str = ""):
        scores = np.array(scores, dtype=float).reshape(-1)
        raw_labels = np.asarray(labels).reshape(-1)
        if scores.shape != raw_labels.shape:
            raise PtcalError("scores and labels differ in length")
        bad = ~((scores >= 0.0) & (scores <= 1.0))
        if bad.any():
            raise ProbabilityError(float(scores[np.argmax(bad)]))
        if raw_labels.size and not np.isin(raw_labels, (0, 1)).all():
            raise PtcalError("labels must be 0 or 1")
        labels = raw_labels.astype(np.int8)
        if logits is not None:
            logits = np.array(logits, dtype=float).reshape(-1)
            if logits.shape != scores.shape:
                raise PtcalError("logits and scores differ in length")
            if not np.isfinite(logits).all():
                raise PtcalError("logits must be finite")
            gap = np.abs(sigmoid(logits) - scores) if logits.size else np.zeros(0)
            if (gap > _LOGIT_TOL).any():
                i = int(np.argmax(gap))
                raise PtcalError(f"logit {logits[i]!r} inconsistent with score {scores[i]!r}")
            logits.setflags(write=False)
        scores.setflags(write=False)
        labels.setflags(write=False)
        self.scores = scores
        self.labels = labels
        self.logits = logits
        self.name = name

    @classmethod
    def from_samples(cls, samples: Sequence[ScoredSample], name: str = "") -> "Dataset":
        samples = list(samples)
        has_logit = [s.logit is not None for s in samples]
        if any(has_logit) and not all(has_logit):
            raise PtcalError("either every sample carries a logit or none does")
        logits = [s.logit for s in samples] if samples and all(has_logit) else None
        return cls([s.score for s in samples], [s.label for s in samples], logits, name)

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    def __getitem__(self, i: int) -> ScoredSample:
        z = None if self.logits is None else float(self.logits[i])
        return ScoredSample(float(self.scores[i]), int(self.labels[i]), z)

    def __iter__(self) -> Iterator[ScoredSample]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        same_logits = (self.logits is None and other.logits is None) or (
            self.logits is not None
            and other.logits is not None
            and np.array_equal(self.logits, other.logits)
        )
        return (
            np.array_equal(self.scores, other.scores)
            and np.array_equal(self.labels, other.labels)
            and same_logits
        )

    def __repr__(self) -> str:
        return f"Dataset(name={self.name!r}, n={len(self)}, logits={self.logits is not None})"

    @property
    def has_logits(self) -> bool:
        return self.logits is not None

    def take(self, index, name: Optional[str] = None) -> "Dataset":
        index = np.asarray(index, dtype=np.intp)
        logits = None if self.logits is None else self.logits[index]
        return Dataset(self.scores[index], self.labels[index], logits, self.name if name is None else name)

    def with_labels(self, labels, name: Optional[str] = None) -> "Dataset":
        return Dataset(self.scores, labels, self.logits, self.name if name is None else name)

    def require_nonempty(self) -> None:
        if len(self) == 0:
            raise EmptyDatasetError()

    def require_both_classes(self) -> None:
        self.require_nonempty()
        if self.labels.min() == self.labels.max():
            raise PtcalError("degenerate labels")


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    seed: int = 42

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(not (f > 0.0) for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise SplitError(f"invalid split: fractions {fracs}")
        if not (0 <= int(self.seed) < 2**64):
            raise SplitError(f"invalid split: seed {self.seed} is not a 64-bit integer")


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    # the epsilon absorbs products like 10 * 0.1 landing a hair under 1
    n_val = math.floor(n * spec.val_frac + 1e-9)
    n_test = math.floor(n * spec.test_frac + 1e-9)
    return n - n_val - n_test, n_val, n_test


def split_dataset(d: Dataset, s: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Shuffle ``d`` under ``s.seed`` and cut it into train/validation/test parts.

    Validation and test receive ``floor(n * frac)`` samples each; train takes
    the rest.
    """
    if len(d) == 0:
        raise EmptyDatasetError()
    n_train, n_val, _ = split_sizes(len(d), s)
    perm = np.random.default_rng(s.seed).permutation(len(d))
    name = d.name or "data"
    return (
        d.take(perm[:n_train], f"{name}/train"),
        d.take(perm[n_train:n_train + n_val], f"{name}/val"),
        d.take(perm[n_train + n_val:], f"{name}/test"),
    )
