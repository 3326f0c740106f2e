"""Poisson-lognormal mixture for per-user vote counts and its zero-truncated fit."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln, roots_hermite

from ..core import InputError
from .results import FitResult

_NODES = {}


def _hermite(n):
    if n not in _NODES:
        x, w = roots_hermite(n)
        with np.errstate(divide="ignore"):
            _NODES[n] = (x, np.log(w))
    return _NODES[n]


def _mode(k, mu, s2):
    """Maximiser of ``k u - e^u - (u - mu)^2 / (2 s2)`` (vectorised over k)."""
    u = np.where(k > 0, np.log(np.maximum(k, 1.0)), mu)
    u = np.minimum(u, mu + s2 * k)  # the mode never exceeds this
    for _ in range(100):
        eu = np.exp(u)
        g = k - eu - (u - mu) / s2
        h = eu + 1.0 / s2
        step = g / h
        u = u + step
        if np.all(np.abs(step) < 1e-13 * (1.0 + np.abs(u))):
            break
    return u


def _quadrature(mu, sigma, k, n_nodes, grad):
    s2 = sigma * sigma
    u0 = _mode(k, mu, s2)
    width = 1.0 / np.sqrt(np.exp(u0) + 1.0 / s2)
    x, log_w = _hermite(n_nodes)
    u = u0[:, None] + math.sqrt(2.0) * width[:, None] * x[None, :]
    log_int = (k[:, None] * u - np.exp(u) - gammaln(k + 1.0)[:, None]
               - (u - mu) ** 2 / (2 * s2) - math.log(sigma * math.sqrt(2 * math.pi)))
    terms = np.exp(log_w[None, :] + log_int + x[None, :] ** 2) * (math.sqrt(2.0) * width[:, None])
    p = terms.sum(axis=1)
    if not grad:
        return p, None, None
    dmu = (terms * (u - mu) / s2).sum(axis=1)
    dsig = (terms * (-1.0 / sigma + (u - mu) ** 2 / (sigma * s2))).sum(axis=1)
    return p, dmu, dsig


def poisson_lognormal_pmf(mu: float, sigma: float, k, grad: bool = False, rtol: float = 1e-12):
    """Probability of ``k`` events when the Poisson mean is lognormal(mu, sigma).

    The integral over ``u = log(rate)`` is evaluated by Gauss-Hermite
    quadrature centred on the integrand's mode and scaled to its curvature;
    the node count doubles until the result stabilises. With ``grad`` the
    derivatives with respect to ``mu`` and ``sigma`` are returned as well.
    """
    if not sigma > 0:
        raise InputError("sigma must be positive")
    k_arr = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(k_arr < 0) or np.any(k_arr != np.floor(k_arr)):
        raise InputError("k must be a non-negative integer")
    n = 24
    prev = _quadrature(mu, sigma, k_arr, n, grad)
    while n < 768:
        n *= 2
        cur = _quadrature(mu, sigma, k_arr, n, grad)
        if np.all(np.abs(cur[0] - prev[0]) <= rtol * np.abs(cur[0]) + 1e-300):
            prev = cur
            break
        prev = cur
    p, dmu, dsig = prev
    scalar = np.ndim(k) == 0
    if scalar:
        p, dmu, dsig = p[0], None if dmu is None else dmu[0], None if dsig is None else dsig[0]
    return (p, dmu, dsig) if grad else p


def poisson_lognormal_kmax(mu: float, sigma: float, tail: float = 1e-8) -> int:
    """A count above which the mixture has less than ``tail`` mass."""
    from scipy.stats import norm, poisson

    # P(K > k) <= P(rate > q) + P(Poisson(q) > k) with q a far lognormal quantile
    q = math.exp(mu + sigma * norm.isf(tail / 2))
    return int(poisson.isf(tail / 2, q)) + 1


def zero_truncated_loglik(mu: float, sigma: float, counts, grad: bool = False):
    """``sum_{k>0} n_k log P(k) - U_+ log(1 - P(0))`` for a histogram ``counts[k]``."""
    counts = np.asarray(counts, dtype=float)
    ks = np.nonzero(counts[1:])[0] + 1
    nk = counts[ks]
    u_plus = nk.sum()
    allk = np.r_[0, ks]
    p, dmu, dsig = poisson_lognormal_pmf(mu, sigma, allk, grad=True)
    p0 = p[0]
    if np.any(p[1:] <= 0) or not p0 < 1:
        return (-math.inf, np.zeros(2)) if grad else -math.inf
    ll = float(np.sum(nk * np.log(p[1:])) - u_plus * math.log1p(-p0))
    if not grad:
        return ll
    gmu = float(np.sum(nk * dmu[1:] / p[1:]) + u_plus * dmu[0] / (1 - p0))
    gsig = float(np.sum(nk * dsig[1:] / p[1:]) + u_plus * dsig[0] / (1 - p0))
    return ll, np.array([gmu, gsig])


def fit_activity_zero_truncated(counts, start=(-1.0, 1.0), tol: float = 1e-6) -> FitResult:
    """Fit (mu, sigma) to a histogram of users with ``k >= 1`` votes.

    ``counts[k]`` is the number of users with exactly ``k`` votes; ``counts[0]``
    is ignored (unobserved). The returned estimate is ``(mu, sigma, U)`` with
    ``U = U_+ / (1 - P(0))`` the implied total number of users.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 1 or counts.size < 2 or np.any(counts < 0):
        raise InputError("counts must be a non-negative histogram indexed by k")
    u_plus = float(counts[1:].sum())
    if u_plus < 100:
        raise InputError("need at least 100 users with one or more votes")
    names = ("mu", "sigma", "U")
    if np.count_nonzero(counts[1:]) < 2:
        return FitResult([np.nan, np.nan, np.nan], -math.inf, False, names=names,
                         message="degenerate histogram: a single occupied count")

    def fun_grad(z):
        mu, sig = z[0], math.exp(z[1])
        ll, g = zero_truncated_loglik(mu, sig, counts, grad=True)
        if not math.isfinite(ll):
            return 1e10, np.zeros(2)
        return -ll / u_plus, -np.array([g[0], g[1] * sig]) / u_plus

    best = None
    for z0 in ([start[0], math.log(start[1])], [-3.0, math.log(2.0)], [0.0, math.log(0.3)]):
        res = minimize(fun_grad, z0, jac=True, method="L-BFGS-B",
                       bounds=[(-30.0, 10.0), (math.log(1e-4), math.log(10.0))],
                       options={"ftol": 1e-14, "gtol": 1e-10, "maxiter": 1000})
        if best is None or res.fun < best.fun:
            best = res
    mu, sig = best.x[0], math.exp(best.x[1])
    p0 = float(poisson_lognormal_pmf(mu, sig, 0))
    g_end = fun_grad(best.x)[1]
    # projected gradient: a bound with the gradient pointing outward is optimal
    lo = np.array([-30.0, math.log(1e-4)])
    hi = np.array([10.0, math.log(10.0)])
    g_end = np.where((best.x <= lo + 1e-9) & (g_end > 0), 0.0, g_end)
    g_end = np.where((best.x >= hi - 1e-9) & (g_end < 0), 0.0, g_end)
    gn = float(np.linalg.norm(g_end)) * u_plus
    converged = bool(best.success) and gn < tol * u_plus
    # stderr from the observed information in (mu, log sigma)
    stderr = [np.inf] * 3
    eps = 1e-5
    H = np.empty((2, 2))
    for i in range(2):
        dz = np.zeros(2)
        dz[i] = eps
        H[:, i] = (fun_grad(best.x + dz)[1] - fun_grad(best.x - dz)[1]) / (2 * eps) * u_plus
    try:
        cov = np.linalg.inv(0.5 * (H + H.T))
        if np.all(np.diag(cov) > 0):
            stderr = [math.sqrt(cov[0, 0]), sig * math.sqrt(cov[1, 1]), np.inf]
    except np.linalg.LinAlgError:
        pass
    return FitResult([mu, sig, u_plus / (1.0 - p0)], -best.fun * u_plus, converged,
                     iterations=int(best.nit), stderr=stderr, names=names, grad_norm=gn,
                     extra={"U_plus": u_plus, "P0": p0})
