"""Prospect-theory probability weighting and its closed-form approximate inverse.

The weighting function

    w(p) = p**g / (p**g + (1 - p)**g) ** (1 / g)

describes how a person perceives a stated probability ``p``; the correction
applied before reporting a calibrated probability is the same expression with
``g`` replaced by ``1 / g`` in the exponents of ``p`` and ``1 - p``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PtcalError

GAMMA_MONOTONE_BOUND = 0.279
DEFAULT_GAMMA = 0.71


class GammaError(PtcalError):
    pass


@dataclass(frozen=True)
class PTParams:
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        g = float(self.gamma)
        if not g > GAMMA_MONOTONE_BOUND:
            raise GammaError(
                f"gamma out of monotone range: {g!r} must exceed {GAMMA_MONOTONE_BOUND}"
            )
        if not g <= 1.0:
            raise GammaError(f"gamma out of monotone range: {g!r} must not exceed 1")
        object.__setattr__(self, "gamma", g)


def validate_gamma(g: float) -> PTParams:
    return PTParams(g)


def _params(params) -> PTParams:
    if isinstance(params, PTParams):
        return params
    return PTParams(params)


def _interior(p):
    p = np.asarray(p, dtype=float)
    if np.any(~((p >= 0.0) & (p <= 1.0))):
        raise PtcalError("probability out of range")
    inside = (p > 0.0) & (p < 1.0)
    # endpoints are substituted with 0.5 and restored afterwards (0**g is ill-posed for g<1 derivatives)
    return p, inside, np.where(inside, p, 0.5)


def pt_weight(p, params=DEFAULT_GAMMA):
    """Perceived probability of a stated probability ``p``.

    ``params`` may be a :class:`PTParams` or a bare gamma. Works elementwise on
    arrays; a scalar input returns a float. ``w(0) = 0`` and ``w(1) = 1``
    exactly, and gamma = 1 returns ``p`` unchanged.
    """
    g = _params(params).gamma
    p, inside, q = _interior(p)
    a = q**g
    out = a / (a + (1.0 - q) ** g) ** (1.0 / g)
    # gamma = 1 is the identity; skip the formula's rounding noise
    out = np.where(inside & (g != 1.0), out, p)
    return float(out) if out.ndim == 0 else out


def pt_inverse(p, params=DEFAULT_GAMMA):
    """Probability to report so that its perceived value is close to ``p``.

    For gamma below roughly 0.85 the closed form overshoots 1 just below
    ``p = 1`` (e.g. 1.0036 at p = 0.99, gamma = 0.71), so the result is clipped
    to 1. The clipped map is non-decreasing on [0, 1] for every valid gamma.
    """
    g = _params(params).gamma
    k = 1.0 / g
    p, inside, q = _interior(p)
    a = q**k
    out = a / (a + (1.0 - q) ** k) ** k
    out = np.where(inside & (g != 1.0), np.minimum(out, 1.0), p)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RoundTripReport:
    """Deviation of ``pt_inverse(pt_weight(P/100))`` from ``P/100`` on P = 0..100.

    ``per_point_errors`` are absolute errors in percentage points.
    ``mse_percent2`` squares those (pp^2); ``mse_prob2`` squares errors in
    probability units, i.e. ``mse_percent2 / 10_000``.
    """

    gamma: float
    mae_percent: float
    mse_percent2: float
    mse_prob2: float
    max_abs_percent: float
    per_point_errors: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "mae_percent": self.mae_percent,
            "mse_percent2": self.mse_percent2,
            "mse_prob2": self.mse_prob2,
            "max_abs_percent": self.max_abs_percent,
            "per_point_errors": list(self.per_point_errors),
        }


def roundtrip_report(params=DEFAULT_GAMMA) -> RoundTripReport:
    params = _params(params)
    p = np.arange(101, dtype=float) / 100.0
    back = pt_inverse(pt_weight(p, params), params)
    err = 100.0 * np.abs(p - back)
    mse_pp = float(np.mean(err**2))
    return RoundTripReport(
        gamma=params.gamma,
        mae_percent=float(np.mean(err)),
        mse_percent2=mse_pp,
        mse_prob2=mse_pp / 10_000.0,
        max_abs_percent=float(err.max()),
        per_point_errors=tuple(float(e) for e in err),
    )
