"""Logistic fit of the per-vote promotion probability P(v)."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np
from scipy.special import expit

from ..core import UPCOMING_LIFETIME, InputError, StoryRecord
from ..visibility import LogisticPromotion
from .results import FitResult


def promotion_trials(records: Iterable[StoryRecord], lifetime: float = UPCOMING_LIFETIME) -> tuple:
    """Per-vote Bernoulli trials aggregated by vote count.

    Every vote ``v >= 2`` cast while a story sat on the upcoming list is one
    trial: success if the story was promoted right after that vote (ties are
    ordered vote first, then promotion), failure if it stayed. Returns
    ``(v, trials, successes)`` arrays over the observed vote counts.
    """
    trials = {}
    wins = {}
    n_records = 0
    for rec in records:
        n_records += 1
        if rec.promoted:
            last = rec.votes_at_promotion()
        else:
            last = int(np.searchsorted(rec.times, lifetime, side="left"))
        for v in range(2, last + 1):
            trials[v] = trials.get(v, 0) + 1
        if rec.promoted and last >= 2:
            wins[last] = wins.get(last, 0) + 1
    if n_records == 0:
        raise InputError("no records")
    v = np.array(sorted(trials), dtype=float)
    n = np.array([trials[int(k)] for k in v], dtype=float)
    s = np.array([wins.get(int(k), 0) for k in v], dtype=float)
    return v, n, s


def _logistic_loglik(beta, v, n, s):
    eta = beta[0] + beta[1] * v
    # s*eta - n*log(1+e^eta), stable
    return float(np.sum(s * eta - n * np.logaddexp(0.0, eta)))


def _logistic_grad(beta, v, n, s):
    p = expit(beta[0] + beta[1] * v)
    r = s - n * p
    return np.array([r.sum(), (r * v).sum()])


def fit_logistic_grouped(v, n, s, max_iter: int = 100, tol: float = 1e-10, cap: float = 50.0) -> FitResult:
    """Newton-Raphson fit of ``logit P = a + b v`` to grouped binomial data.

    Under (quasi-)complete separation the MLE does not exist; the iterates are
    then stopped once the slope magnitude passes ``cap`` and the result is
    flagged ``converged=False`` with the capped coefficients.
    """
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=float)
    s = np.asarray(s, dtype=float)
    names = ("intercept", "slope")
    if s.sum() == 0 or s.sum() == n.sum():
        return FitResult([-math.inf if s.sum() == 0 else math.inf, 0.0], 0.0, False, names=names,
                         message="all trials share one outcome; the logistic fit is not identifiable")
    # centre the covariate for conditioning
    vc = v.mean()
    x = v - vc
    pbar = s.sum() / n.sum()
    beta = np.array([math.log(pbar / (1 - pbar)), 0.0])
    ll = _logistic_loglik(beta, x, n, s)
    converged = False
    message = ""
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(beta[0] + beta[1] * x)
        w = n * p * (1 - p)
        g = _logistic_grad(beta, x, n, s)
        H = np.array([[w.sum(), (w * x).sum()], [(w * x).sum(), (w * x * x).sum()]])
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(2), g)
        except np.linalg.LinAlgError:
            message = "singular information matrix"
            break
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = _logistic_loglik(cand, x, n, s)
            if ll_new >= ll - 1e-12 or t < 1e-8:
                break
            t *= 0.5
        beta, ll_prev, ll = cand, ll, ll_new
        if abs(beta[1]) > cap:
            message = "separated data: coefficients capped"
            scale = cap / abs(beta[1])
            beta = beta * scale
            ll = _logistic_loglik(beta, x, n, s)
            break
        if np.max(np.abs(t * step)) < tol or abs(ll - ll_prev) < tol * (1 + abs(ll)):
            converged = True
            break
    grad = _logistic_grad(beta, x, n, s)
    gn = float(np.linalg.norm(grad))
    converged = converged and gn < 1e-6 * max(1.0, n.sum())
    intercept = beta[0] - beta[1] * vc
    stderr = None
    p = expit(beta[0] + beta[1] * x)
    w = n * p * (1 - p)
    H = np.array([[w.sum(), (w * v).sum()], [(w * v).sum(), (w * v * v).sum()]])
    try:
        cov = np.linalg.inv(H)
        if np.all(np.diag(cov) > 0):
            stderr = np.sqrt(np.diag(cov))
    except np.linalg.LinAlgError:
        pass
    return FitResult([intercept, beta[1]], ll, converged, iterations=it, stderr=stderr, names=names,
                     grad_norm=gn, message=message)


def fit_promotion(records: Iterable[StoryRecord], lifetime: float = UPCOMING_LIFETIME,
                  cap: float = 50.0) -> tuple:
    """Fit the logistic promotion model on votes ``v >= 2`` (P(1) stays 0).

    Returns ``(LogisticPromotion, FitResult)``. A fit without promoted
    stories, or with a non-positive slope, is reported as not converged.
    """
    v, n, s = promotion_trials(records, lifetime)
    if v.size == 0:
        raise InputError("no promotion trials: every story has a single upcoming vote")
    res = fit_logistic_grouped(v, n, s, cap=cap)
    if s.sum() > 0 and res["slope"] <= 0:
        res.converged = False
        res.message = (res.message + "; " if res.message else "") + "non-positive slope rejected"
    res.extra.update({"n_trials": int(n.sum()), "n_promoted": int(s.sum())})
    if not np.all(np.isfinite(res.estimate)):
        return None, res
    return LogisticPromotion(float(res["intercept"]), float(res["slope"])), res
