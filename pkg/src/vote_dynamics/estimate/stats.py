"""Lognormal fits, bootstrap goodness of fit, and resampling tests."""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy import stats

from ..core import InputError
from .results import FitResult


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def fit_lognormal(values) -> FitResult:
    """Maximum-likelihood lognormal fit: mean and standard deviation of the logs.

    A sample with no spread yields ``sigma = 0`` and ``converged=False``.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InputError("need at least two values")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise InputError("lognormal fit needs finite positive values")
    lx = np.log(x)
    mu = float(lx.mean())
    sigma = float(lx.std())
    n = x.size
    ll = float(np.sum(stats.lognorm.logpdf(x, sigma, scale=math.exp(mu)))) if sigma > 0 else math.inf
    msg = "" if sigma > 0 else "degenerate sample: all values equal, sigma = 0"
    return FitResult([mu, sigma], ll, sigma > 0, names=("mu", "sigma"),
                     stderr=[sigma / math.sqrt(n), sigma / math.sqrt(2 * n)], message=msg)


_FAMILIES = {
    "lognormal": (lambda x: fit_lognormal(x).estimate,
                  lambda p: (lambda t: stats.lognorm.cdf(t, p[1], scale=math.exp(p[0]))),
                  lambda p, n, rng: np.exp(rng.normal(p[0], p[1], n))),
    "normal": (lambda x: np.array([np.mean(x), np.std(x)]),
               lambda p: (lambda t: stats.norm.cdf(t, p[0], p[1])),
               lambda p, n, rng: rng.normal(p[0], p[1], n)),
}


def ks_bootstrap_gof(values, family: str = "lognormal", n_boot: int = 1000, seed=0) -> float:
    """Parametric-bootstrap p-value of the KS statistic with refitting.

    Each replicate draws a sample of the same size from the fitted family,
    refits it, and computes its KS statistic against its own fit, so the
    reference distribution accounts for the parameters being estimated. The
    p-value is the fraction of replicate statistics at least as large as the
    observed one.
    """
    if family not in _FAMILIES:
        raise InputError(f"unknown family {family!r}; choose from {sorted(_FAMILIES)}")
    if n_boot < 200:
        raise InputError("n_boot must be at least 200")
    x = np.asarray(values, dtype=float)
    fit, cdf, draw = _FAMILIES[family]
    if family == "lognormal" and np.any(x <= 0):
        raise InputError("lognormal fit needs positive values")
    p = fit(x)
    if not p[1] > 0:
        raise InputError("sample has no spread")
    d_obs = stats.kstest(x, cdf(p)).statistic
    rng = _rng(seed)
    d_boot = np.empty(n_boot)
    for i in range(n_boot):
        xb = draw(p, x.size, rng)
        d_boot[i] = stats.kstest(xb, cdf(fit(xb))).statistic
    return float(np.mean(d_boot >= d_obs))


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("x and y must be 1-d arrays of equal length")
    if x.size < 3:
        raise InputError("need at least three pairs")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise InputError("correlation is undefined for a constant vector")
    return x, y


def pearson(x, y) -> float:
    x, y = _check_pair(x, y)
    return float(np.corrcoef(x, y)[0, 1])


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x, y = _check_pair(x, y)
    return float(np.corrcoef(stats.rankdata(x), stats.rankdata(y))[0, 1])


def permutation_corr_test(x, y, n_perm: int = 10000, seed=0) -> tuple:
    """Pearson correlation and its two-sided randomization p-value.

    ``p = (1 + #{|r_perm| >= |r|}) / (1 + n_perm)``.
    """
    x, y = _check_pair(x, y)
    if n_perm < 1:
        raise InputError("n_perm must be positive")
    rng = _rng(seed)
    xc = (x - x.mean()) / np.linalg.norm(x - x.mean())
    yc = (y - y.mean()) / np.linalg.norm(y - y.mean())
    r = float(xc @ yc)
    hits = 0
    for start in range(0, n_perm, 1000):
        m = min(1000, n_perm - start)
        perms = rng.permuted(np.broadcast_to(yc, (m, yc.size)), axis=1)
        hits += int(np.sum(np.abs(perms @ xc) >= abs(r) - 1e-12))
    return r, (1 + hits) / (1 + n_perm)


def paired_bootstrap(statistic: Callable[[np.ndarray], float], n: int, n_boot: int = 2000,
                     seed=0) -> tuple:
    """One-sided bootstrap test that ``statistic`` is positive.

    ``statistic(idx)`` evaluates a paired comparison (for example a
    difference of error rates) on the cases ``idx``; cases are resampled with
    replacement so both members of each pair move together. Returns the
    observed value and ``p = (1 + #{stat_b <= 0}) / (1 + n_boot)``.
    """
    if n < 2:
        raise InputError("need at least two cases")
    rng = _rng(seed)
    observed = float(statistic(np.arange(n)))
    boots = np.empty(n_boot)
    for b in range(n_boot):
        boots[b] = statistic(rng.integers(0, n, n))
    boots = boots[np.isfinite(boots)]
    return observed, (1 + int(np.sum(boots <= 0))) / (1 + boots.size)


def error_rate(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=bool)
    actual = np.asarray(actual, dtype=bool)
    if predicted.shape != actual.shape or predicted.size == 0:
        raise InputError("predicted and actual must be non-empty and aligned")
    return float(np.mean(predicted != actual))


def safe_corr(fn: Callable, x, y) -> Optional[float]:
    """Correlation, or None when it is undefined (constant input)."""
    try:
        return fn(x, y)
    except InputError:
        return None
