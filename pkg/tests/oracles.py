"""Independent reference computations used by the tests.

Nothing here imports the package's fitting or metric code, so agreement
between the two routes is meaningful.
"""

import itertools
import math
from functools import lru_cache

import numpy as np
from scipy import integrate


@lru_cache(maxsize=None)
def _cuts(k):
    # every way to cut k ordered levels into contiguous blocks
    out = []
    for mask in itertools.product((False, True), repeat=max(k - 1, 0)):
        bounds = [0] + [i + 1 for i, c in enumerate(mask) if c] + [k]
        out.append(tuple(zip(bounds[:-1], bounds[1:])))
    return tuple(out)


def brute_isotonic(scores, labels):
    """Least-squares monotone fit by enumerating every contiguous pooling of the score levels.

    Returns ``(levels, fitted)``: distinct sorted scores and the fitted value
    at each. Samples sharing a score are never split across blocks.
    """
    groups = {}
    for x, y in zip(scores, labels):
        groups.setdefault(float(x), []).append(float(y))
    levels = sorted(groups)
    ys = [groups[x] for x in levels]
    best, best_fit = math.inf, None
    for blocks in _cuts(len(levels)):
        means = []
        for a, b in blocks:
            pooled = [v for g in ys[a:b] for v in g]
            means.append(sum(pooled) / len(pooled))
        if any(m1 > m2 for m1, m2 in zip(means, means[1:])):
            continue
        fit = []
        for (a, b), m in zip(blocks, means):
            fit.extend([m] * (b - a))
        sse = sum((v - f) ** 2 for g, f in zip(ys, fit) for v in g)
        if sse < best - 1e-12:
            best, best_fit = sse, fit
    return np.array(levels), np.array(best_fit)


def bernoulli_nll(z, y):
    """Mean NLL of labels ``y`` under sigmoid(z); broadcasts over leading axes of ``z``."""
    return np.mean(np.logaddexp(0.0, z) - y * z, axis=-1)


def grid_platt(p, y, a_range=(0.0, 4.0), b_range=(-3.0, 1.0), step=0.1, refine=2):
    """Maximum-likelihood (a, b) by a coarse grid followed by successively finer local grids."""
    p = np.asarray(p, float)
    y = np.asarray(y, float)
    a_grid = np.arange(a_range[0], a_range[1] + step / 2, step)
    b_grid = np.arange(b_range[0], b_range[1] + step / 2, step)
    for level in range(refine + 1):
        best = (math.inf, 0.0, 0.0)
        for a in a_grid:
            z = a * p[None, :] + b_grid[:, None]
            vals = bernoulli_nll(z, y)
            j = int(np.argmin(vals))
            if vals[j] < best[0]:
                best = (float(vals[j]), float(a), float(b_grid[j]))
        _, a0, b0 = best
        if level == refine:
            break
        step /= 10.0
        a_grid = a0 + step * np.arange(-10, 11)
        b_grid = b0 + step * np.arange(-10, 11)
    return a0, b0, step


def grid_temperature(z, y, lo=0.05, hi=20.0, n=600):
    """Temperature minimising the mean NLL over a dense log-spaced grid, refined once."""
    z = np.asarray(z, float)
    y = np.asarray(y, float)

    def nll_at(ts):
        return np.array([bernoulli_nll(z / t, y) for t in ts])

    ts = np.geomspace(lo, hi, n)
    k = int(np.argmin(nll_at(ts)))
    fine = np.linspace(ts[max(k - 1, 0)], ts[min(k + 1, n - 1)], 401)
    j = int(np.argmin(nll_at(fine)))
    return float(fine[j]), float(fine[1] - fine[0])


def f_density(x, d1, d2):
    if x <= 0:
        return 0.0
    log_c = (
        math.lgamma((d1 + d2) / 2) - math.lgamma(d1 / 2) - math.lgamma(d2 / 2)
        + (d1 / 2) * math.log(d1 / d2)
    )
    return math.exp(log_c + (d1 / 2 - 1) * math.log(x) - ((d1 + d2) / 2) * math.log1p(d1 * x / d2))


def f_sf_quad(f, d1, d2):
    """P(F > f) by integrating the F density numerically."""
    if f <= 0:
        return 1.0
    # integrate the smaller tail for accuracy
    upper, _ = integrate.quad(f_density, f, math.inf, args=(d1, d2), epsabs=1e-13, epsrel=1e-12, limit=500)
    lower, _ = integrate.quad(f_density, 0.0, f, args=(d1, d2), epsabs=1e-13, epsrel=1e-12, limit=500)
    return upper if upper < 0.5 else 1.0 - lower


def anova_by_hand(groups):
    """F statistic and degrees of freedom from the textbook sums of squares."""
    allv = [v for g in groups for v in g]
    grand = sum(allv) / len(allv)
    ssb = sum(len(g) * (sum(g) / len(g) - grand) ** 2 for g in groups)
    ssw = sum(sum((v - sum(g) / len(g)) ** 2 for v in g) for g in groups)
    k, n = len(groups), len(allv)
    return (ssb / (k - 1)) / (ssw / (n - k)), k - 1, n - k


def exact_pt_inverse(s, gamma):
    """Exact inverse of the weighting function by bisection (vectorised)."""
    s = np.asarray(s, float)
    lo = np.zeros_like(s)
    hi = np.ones_like(s)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        num = mid**gamma
        w = num / (num + (1 - mid) ** gamma) ** (1 / gamma)
        below = w < s
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)
