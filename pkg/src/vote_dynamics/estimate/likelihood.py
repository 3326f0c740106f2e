"""Inhomogeneous-Poisson likelihoods for fan and non-fan votes.

Pools are reconstructed along the observed vote sequence. Between votes the
unseen pools shrink by expected exposure, so each compensator is an exposure
count: the integral of ``omega * r_N * P_N(t) * N(t)`` over a gap equals
``r_N`` times the number of non-fans who saw the story in that gap (likewise
for fans). With ``E`` the total exposure and ``n`` the vote count of a group,
the story log-likelihood in ``r`` is ``n log r - r E`` plus terms that only
depend on the site-wide parameters.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize

from ..core import InputError, StoryRecord
from ..dynamics import V2State
from ..params import GlobalParamsV2
from ..visibility import f_page, f_page_grad, f_page_integral, f_page_integral_grad
from .results import FitResult, LognormalPrior

log = logging.getLogger(__name__)


def loglik_inhomogeneous(rate_fn: Callable[[float], float], vote_times, T: float,
                         breakpoints: Sequence[float] = (), integral: Optional[float] = None) -> float:
    """Log-likelihood ``-int_0^T v(t) dt + sum_i log v(t_i)`` of an event sequence.

    ``integral`` may supply the compensator in closed form; otherwise it is
    computed by adaptive quadrature split at ``breakpoints`` (use them for
    discontinuous rates). A zero rate at an observed event gives ``-inf``.
    """
    ts = np.asarray(vote_times, dtype=float)
    if T <= 0:
        raise InputError("observation length must be positive")
    if ts.size and (ts.min() < 0 or ts.max() > T):
        raise InputError("event times must lie in [0, T]")
    if integral is None:
        cuts = np.unique(np.r_[0.0, [b for b in breakpoints if 0 < b < T], T])
        integral = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            val, _ = quad(rate_fn, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
            integral += val
    rates = np.array([rate_fn(t) for t in ts], dtype=float)
    if np.any(rates < 0):
        raise InputError("rate must be non-negative")
    if np.any(rates == 0):
        return -math.inf
    return float(-integral + np.sum(np.log(rates)))


def constant_rate_loglik(rate: float, n: int, T: float) -> float:
    """Closed form for a constant rate: ``-v T + n log v``."""
    if rate <= 0:
        return 0.0 if n == 0 and rate == 0 else -math.inf
    return -rate * T + n * math.log(rate)


# -- per-story data ------------------------------------------------------------------


@dataclass(frozen=True)
class StoryData:
    """Vote arrays of one story (Digg hours), index 0 being the submitter."""

    story_id: str
    times: np.ndarray
    is_fan: np.ndarray
    T: float
    promotion_time: float  # inf when not promoted
    S: int

    @classmethod
    def from_record(cls, rec: StoryRecord, window: Optional[int] = None) -> "StoryData":
        if rec.time_unit.value != "digg":
            raise InputError(f"story {rec.story_id!r} must be in Digg time for fitting")
        if window is not None:
            rec = rec.truncate(window)
        tp = math.inf if rec.promotion_time is None else float(rec.promotion_time)
        return cls(rec.story_id, rec.times, rec.fan_mask, float(rec.observation_end()), tp,
                   int(rec.submitter_fans))

    @property
    def n_fan(self) -> int:
        return int(self.is_fan[1:].sum())

    @property
    def n_nonfan(self) -> int:
        return int((~self.is_fan[1:]).sum())


@dataclass
class NonfanTerms:
    n: int
    exposure: float
    const: float  # sum of log(P_N N) over non-fan votes
    d_exposure: Optional[np.ndarray] = None  # w.r.t. (c, mu, lambda)
    d_const: Optional[np.ndarray] = None
    log_nonfans: Optional[np.ndarray] = None  # log N just before every vote 1..n
    log_nonfans_end: float = 0.0


@dataclass
class FanTerms:
    n: int
    exposure: float
    const: float  # sum of log F over fan votes; -inf if a fan vote met an empty pool
    d_exposure: float = 0.0  # w.r.t. rho
    d_const: float = 0.0
    fans_end: float = 0.0


def _cumulative_visibility(d: StoryData, g: GlobalParamsV2, pts: np.ndarray, grad: bool):
    """Integral of P_N from 0 to each point, optionally with (c, mu, lambda) gradients."""
    mu, lam = g.surf_mu, g.surf_lambda
    t_up_end = min(d.promotion_time, g.lifetime)
    x_up = g.k_upcoming * np.minimum(pts, t_up_end)
    x_fr = g.k_front * np.maximum(pts - d.promotion_time, 0.0) if math.isfinite(d.promotion_time) else np.zeros_like(pts)
    hu = f_page_integral(x_up, mu, lam)
    hf = f_page_integral(x_fr, mu, lam)
    integral = g.c * hu / g.k_upcoming + hf / g.k_front
    if not grad:
        return integral, None
    hu_mu, hu_lam = f_page_integral_grad(x_up, mu, lam)
    hf_mu, hf_lam = f_page_integral_grad(x_fr, mu, lam)
    d_int = np.stack([
        hu / g.k_upcoming,
        g.c * hu_mu / g.k_upcoming + hf_mu / g.k_front,
        g.c * hu_lam / g.k_upcoming + hf_lam / g.k_front,
    ])
    return integral, d_int


def _vote_visibility(d: StoryData, g: GlobalParamsV2, tv: np.ndarray, grad: bool):
    """P_N just before each vote time (left limit), with log-gradients."""
    tp = d.promotion_time
    up = (tv <= tp) & (tv < g.lifetime)
    fr = tv > tp
    m = np.where(up, g.k_upcoming * tv + 1.0, np.where(fr, g.k_front * (tv - tp) + 1.0, 1.0))
    f = f_page(m, g.surf_mu, g.surf_lambda)
    pn = np.where(up, g.c * f, np.where(fr, f, 0.0))
    if not grad:
        return pn, None
    dmu, dlam = f_page_grad(m - 1.0, g.surf_mu, g.surf_lambda)
    with np.errstate(divide="ignore", invalid="ignore"):
        dlog = np.stack([np.where(up, 1.0 / g.c, 0.0), dmu / f, dlam / f])
    return pn, dlog


def nonfan_terms(d: StoryData, g: GlobalParamsV2, grad: bool = False) -> NonfanTerms:
    n = d.times.size - 1
    pts = np.r_[d.times, d.T]
    integral, d_int = _cumulative_visibility(d, g, pts, grad)
    om = g.omega
    log1m = math.log1p(-g.rho)
    n0 = g.U - d.S - 1
    e = np.exp(-om * integral)
    j = np.arange(n + 1)
    w = np.exp(j * log1m)
    exposure = n0 * float(np.sum(w * (e[:-1] - e[1:])))
    log_n = math.log(n0) - om * integral[1:n + 1] + (j[1:] - 1) * log1m
    nf = ~d.is_fan[1:]
    pn, dlog_pn = _vote_visibility(d, g, d.times[1:][nf], grad)
    with np.errstate(divide="ignore"):
        const = float(np.sum(np.log(pn)) + np.sum(log_n[nf]))
    log_n_end = math.log(n0) - om * integral[-1] + n * log1m
    out = NonfanTerms(int(nf.sum()), exposure, const, log_nonfans=log_n, log_nonfans_end=log_n_end)
    if grad and not math.isfinite(const):
        # a vote with zero visibility: the likelihood is -inf and has no gradient
        out.d_exposure, out.d_const = np.zeros(3), np.zeros(3)
    elif grad:
        de = -om * e * d_int  # (3, n+2)
        out.d_exposure = n0 * np.sum(w * (de[:, :-1] - de[:, 1:]), axis=1)
        out.d_const = dlog_pn.sum(axis=1) - om * d_int[:, 1:n + 1][:, nf].sum(axis=1)
    return out


def fan_terms(d: StoryData, g: GlobalParamsV2, grad: bool = False, nf: Optional[NonfanTerms] = None) -> FanTerms:
    om, rho = g.omega, g.rho
    n = d.times.size - 1
    if nf is None:
        nf = nonfan_terms(d, g)
    t = d.times
    n_minus = np.exp(nf.log_nonfans)  # N just before votes 1..n
    gap = np.diff(np.r_[t, d.T])  # gap after each point 0..n
    l = np.arange(1, n + 1)
    # F_j^+ = e^{-om t_j} (S + rho * sum_{l<=j} N_l e^{om t_l}), shifted for range safety
    ref = t[-1]
    if om * ref < 600.0:
        scale = np.exp(om * (t[1:] - ref))
        acc = np.r_[0.0, np.cumsum(n_minus * scale)]
        dacc = np.r_[0.0, np.cumsum(n_minus * (1.0 - rho * (l - 1) / (1.0 - rho)) * scale)]
        back = np.exp(-om * (t - ref))
        f_plus = d.S * np.exp(-om * t) + rho * back * acc
        df_plus = back * dacc
    else:
        f_plus = np.empty(n + 1)
        df_plus = np.empty(n + 1)
        f_plus[0], df_plus[0] = d.S, 0.0
        for j in range(1, n + 1):
            decay = math.exp(-om * (t[j] - t[j - 1]))
            f_plus[j] = f_plus[j - 1] * decay + rho * n_minus[j - 1]
            df_plus[j] = df_plus[j - 1] * decay + n_minus[j - 1] * (1.0 - rho * (j - 1) / (1.0 - rho))
    keep = 1.0 - np.exp(-om * gap)
    exposure = float(np.sum(f_plus * keep))
    decay_in = np.exp(-om * gap[:-1])
    f_minus = f_plus[:-1] * decay_in  # F just before votes 1..n
    fan = d.is_fan[1:]
    with np.errstate(divide="ignore"):
        const = float(np.sum(np.log(f_minus[fan])))
    out = FanTerms(int(fan.sum()), exposure, const, fans_end=float(f_plus[-1] * math.exp(-om * gap[-1])))
    if grad:
        out.d_exposure = float(np.sum(df_plus * keep))
        df_minus = df_plus[:-1] * decay_in
        with np.errstate(divide="ignore", invalid="ignore"):
            out.d_const = float(np.sum(df_minus[fan] / f_minus[fan]))
    return out


def _xlogy(n, x):
    return 0.0 if n == 0 else n * math.log(x)


# -- per-story interestingness ------------------------------------------------------------


def story_loglik(r_fan: float, r_nonfan: float, fan: FanTerms, nonfan: NonfanTerms, omega: float,
                 grad: bool = False):
    """Log-likelihood of one story's fan and non-fan votes (submitter excluded)."""
    ll = (-r_fan * fan.exposure - r_nonfan * nonfan.exposure + fan.const + nonfan.const
          + (fan.n + nonfan.n) * math.log(omega))
    for n, r in ((fan.n, r_fan), (nonfan.n, r_nonfan)):
        if n:
            ll = ll + (n * math.log(r) if r > 0 else -math.inf)
    if not grad:
        return ll
    g = np.array([
        (fan.n / r_fan if fan.n else 0.0) - fan.exposure,
        (nonfan.n / r_nonfan if nonfan.n else 0.0) - nonfan.exposure,
    ])
    return ll, g


def _map_log_r(n: int, exposure: float, prior: LognormalPrior, upper: float = 0.0,
               tol: float = 1e-12, max_iter: int = 100):
    """Maximise ``n u - E e^u + log prior(e^u)`` over ``u = log r <= upper``.

    The objective is strictly concave, so a safeguarded Newton iteration
    converges to the unique maximiser. Returns (u, curvature, iterations).
    """
    s2 = prior.sigma**2
    u = min(math.log(n / exposure) if n and exposure > 0 else prior.mu, upper)
    for it in range(1, max_iter + 1):
        eu = math.exp(u)
        g = n - 1.0 - exposure * eu - (u - prior.mu) / s2
        h = -exposure * eu - 1.0 / s2
        if u >= upper and g > 0:
            return upper, h, it
        step = -g / h
        u_new = min(u + step, upper)
        if abs(u_new - u) < tol:
            return u_new, h, it
        u = u_new
    return u, h, max_iter


def fit_story_interest(story: StoryRecord | StoryData, g: GlobalParamsV2,
                       prior: Optional[tuple] = None, vote_window: Optional[int] = None,
                       equal_r: bool = False) -> FitResult:
    """Estimate (r_fan, r_nonfan) for one story with the site-wide parameters fixed.

    ``prior`` is an optional ``(fan_prior, nonfan_prior)`` pair of
    :class:`LognormalPrior`; with it the estimate is the posterior mode. With
    ``equal_r`` a single interestingness is shared by both groups (the
    non-fan prior is then used). Without fan votes and without a prior the
    fan estimate is exactly zero.
    """
    d = story if isinstance(story, StoryData) else StoryData.from_record(story, vote_window)
    nf = nonfan_terms(d, g)
    fa = fan_terms(d, g, nf=nf)
    om = g.omega
    names = ("r_fan", "r_nonfan")
    if math.isinf(fa.const) or math.isinf(nf.const):
        return FitResult([np.nan, np.nan], -math.inf, False, names=names,
                         message="a vote has zero model rate under these parameters")
    groups = [(fa.n, fa.exposure), (nf.n, nf.exposure)]
    if equal_r:
        groups = [(fa.n + nf.n, fa.exposure + nf.exposure)]
    priors = [None] * len(groups)
    if prior is not None:
        fan_prior, nonfan_prior = prior
        priors = [nonfan_prior] if equal_r else [fan_prior, nonfan_prior]
    est, se, iters = [], [], 0
    for (n, e), pr in zip(groups, priors):
        if pr is None:
            r = min(n / e, 1.0) if e > 0 else (1.0 if n else 0.0)
            est.append(r)
            se.append(r / math.sqrt(n) if n else math.inf)
        else:
            u, h, it = _map_log_r(n, e, pr)
            iters = max(iters, it)
            r = math.exp(u)
            est.append(r)
            se.append(r / math.sqrt(-h))
    if equal_r:
        est, se = est * 2, se * 2
    ll = story_loglik(est[0], est[1], fa, nf, om)
    if prior is not None:
        ll_used = ll + (float(priors[0].logpdf(est[0])) if equal_r
                        else float(prior[0].logpdf(est[0]) + prior[1].logpdf(est[1])))
    else:
        ll_used = ll
    return FitResult(est, ll_used, True, iterations=iters, stderr=se, names=names,
                     extra={"n_fan": fa.n, "n_nonfan": nf.n, "fan_exposure": fa.exposure,
                            "nonfan_exposure": nf.exposure, "log_likelihood_data": ll,
                            "equal_r": equal_r, "map": prior is not None})


def map_objective(r_fan: float, r_nonfan: float, d: StoryData, g: GlobalParamsV2, prior: tuple,
                  grad: bool = False):
    """Log-likelihood plus log-prior, as maximised by the MAP fit."""
    nf = nonfan_terms(d, g)
    fa = fan_terms(d, g, nf=nf)
    ll = story_loglik(r_fan, r_nonfan, fa, nf, g.omega, grad=grad)
    lp = float(prior[0].logpdf(r_fan) + prior[1].logpdf(r_nonfan))
    if not grad:
        return ll + lp
    val, gr = ll
    dprior = np.array([(-1.0 - (math.log(r) - p.mu) / p.sigma**2) / r
                       for r, p in ((r_fan, prior[0]), (r_nonfan, prior[1]))])
    return val + lp, gr + dprior


def story_state(d: StoryData, g: GlobalParamsV2) -> V2State:
    """Reconstructed pools and vote counts at the end of the observation window."""
    nf = nonfan_terms(d, g)
    fa = fan_terms(d, g, nf=nf)
    n_fan = int(d.is_fan.sum())
    tp = d.promotion_time if math.isfinite(d.promotion_time) else None
    return V2State(d.T, float(n_fan), float(d.times.size - n_fan), fa.fans_end,
                   math.exp(nf.log_nonfans_end), tp)


# -- site-wide parameters ------------------------------------------------------------------

_SURF_NAMES = ("c", "surf_mu", "surf_lambda")


def nonfan_profile_loglik(stories: Sequence[StoryData], g: GlobalParamsV2, grad: bool = False):
    """Non-fan log-likelihood summed over stories with each story's r_N profiled out.

    The gradient (by the envelope theorem) is w.r.t. (c, surf_mu, surf_lambda).
    """
    total = 0.0
    gsum = np.zeros(3)
    for d in stories:
        t = nonfan_terms(d, g, grad=grad)
        if t.n == 0:
            continue
        if t.exposure <= 0 or math.isinf(t.const):
            return (-math.inf, gsum) if grad else -math.inf
        r = t.n / t.exposure
        total += t.n * math.log(r) - t.n + t.n * math.log(g.omega) + t.const
        if grad:
            gsum += -(t.n / t.exposure) * t.d_exposure + t.d_const
    return (total, gsum) if grad else total


def fan_profile_loglik(stories: Sequence[StoryData], g: GlobalParamsV2, grad: bool = False):
    """Fan log-likelihood summed over stories with each r_F profiled out; gradient w.r.t. rho."""
    total, gsum = 0.0, 0.0
    for d in stories:
        if d.n_fan == 0:
            continue
        t = fan_terms(d, g, grad=grad)
        if t.exposure <= 0 or math.isinf(t.const):
            continue
        total += t.n * math.log(t.n / t.exposure) - t.n + t.n * math.log(g.omega) + t.const
        if grad:
            gsum += -(t.n / t.exposure) * t.d_exposure + t.d_const
    return (total, gsum) if grad else total


def _as_data(stories, window=None) -> list:
    return [s if isinstance(s, StoryData) else StoryData.from_record(s, window) for s in stories]


def _num_hessian(fun_grad, z, eps=1e-5):
    k = z.size
    H = np.empty((k, k))
    for i in range(k):
        dz = np.zeros(k)
        dz[i] = eps
        H[:, i] = (fun_grad(z + dz)[1] - fun_grad(z - dz)[1]) / (2 * eps)
    return 0.5 * (H + H.T)


def fit_global_params(stories, g: GlobalParamsV2, window: Optional[int] = None,
                      grid: Optional[dict] = None, n_starts: int = 3, tol: float = 1e-8) -> FitResult:
    """Joint MLE of (c, surf_mu, surf_lambda) from non-fan votes, r_N profiled per story.

    Multi-start L-BFGS-B in log-parameters from the best points of a coarse grid.
    """
    data = [d for d in _as_data(stories, window) if d.n_nonfan > 0]
    if not data:
        raise InputError("no stories with non-fan votes")
    n_votes = sum(d.n_nonfan for d in data)
    grid = grid or {"c": (0.02, 0.06, 0.2, 0.5), "surf_mu": (0.5, 2.0, 8.0, 30.0),
                    "surf_lambda": (0.05, 0.2, 1.0)}
    bounds = [(math.log(1e-4), 0.0), (math.log(1e-2), math.log(1e3)), (math.log(1e-3), math.log(1e2))]

    def params(z):
        return g.with_(c=math.exp(z[0]), surf_mu=math.exp(z[1]), surf_lambda=math.exp(z[2]))

    def fun_grad(z):
        ll, gr = nonfan_profile_loglik(data, params(z), grad=True)
        if not math.isfinite(ll):
            return 1e10, np.zeros(3)
        return -ll / n_votes, -gr * np.exp(z) / n_votes

    starts = []
    for c in grid["c"]:
        for m in grid["surf_mu"]:
            for lam in grid["surf_lambda"]:
                z = np.log([c, m, lam])
                starts.append((fun_grad(z)[0], z))
    starts.sort(key=lambda s: s[0])
    best = None
    for _, z0 in starts[:n_starts]:
        res = minimize(fun_grad, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"ftol": tol, "gtol": 1e-7, "maxiter": 500})
        if best is None or res.fun < best.fun:
            best = res
    z = best.x
    theta = np.exp(z)
    _, gz = fun_grad(z)
    at_bound = [abs(z[i] - b) < 1e-6 for i, pair in enumerate(bounds) for b in pair]
    grad_norm = float(np.linalg.norm(np.where(np.array(at_bound).reshape(3, 2).any(axis=1), 0.0, gz)))
    converged = bool(best.success) and grad_norm < 1e-4
    stderr = np.full(3, np.inf)
    try:
        H = _num_hessian(fun_grad, z) * n_votes
        cov = np.linalg.inv(H)
        if np.all(np.diag(cov) > 0):
            stderr = theta * np.sqrt(np.diag(cov))
    except np.linalg.LinAlgError:
        pass
    msg = ""
    if len(data) < 2:
        converged = False
        msg = "under-determined: fewer than two stories with non-fan votes"
    return FitResult(theta, -best.fun * n_votes, converged, iterations=int(best.nit), stderr=stderr,
                     names=_SURF_NAMES, grad_norm=grad_norm, message=msg)


def fit_rho(stories, g: GlobalParamsV2, window: Optional[int] = None,
            bracket: tuple = (1e-8, 1e-3)) -> FitResult:
    """MLE of the fan-conversion probability rho from fan votes, r_F profiled per story."""
    data = [d for d in _as_data(stories, window) if d.n_fan > 0]
    if not data:
        return FitResult([g.rho], -math.inf, False, names=("rho",),
                         message="no fan votes: rho is not identifiable")
    n_votes = sum(d.n_fan for d in data)
    hi = min(bracket[1], 0.999 / (g.U - 1))
    bounds = [(math.log(bracket[0]), math.log(hi))]

    def fun_grad(z):
        rho = math.exp(z[0])
        ll, gr = fan_profile_loglik(data, g.with_(rho=rho), grad=True)
        return -ll / n_votes, np.array([-gr * rho / n_votes])

    zs = np.linspace(bounds[0][0], bounds[0][1], 12)
    z0 = zs[int(np.argmin([fun_grad([z])[0] for z in zs]))]
    res = minimize(fun_grad, [z0], jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"ftol": 1e-12, "gtol": 1e-9})
    rho = math.exp(res.x[0])
    gz = fun_grad(res.x)[1]
    grad_norm = 0.0 if any(abs(res.x[0] - b) < 1e-6 for b in bounds[0]) else float(abs(gz[0]))
    H = _num_hessian(fun_grad, res.x) * n_votes
    se = rho / math.sqrt(H[0, 0]) if H[0, 0] > 0 else math.inf
    msg = "" if len(data) >= 2 else "under-determined: fewer than two stories with fan votes"
    return FitResult([rho], -res.fun * n_votes, bool(res.success) and grad_norm < 1e-4 and len(data) >= 2,
                     iterations=int(res.nit), stderr=[se], names=("rho",), grad_norm=grad_norm, message=msg)


def fit_site_params(stories, g: GlobalParamsV2, window: Optional[int] = None, max_rounds: int = 4,
                    rtol: float = 1e-4) -> tuple:
    """Alternate the visibility fit and the rho fit until both settle.

    Returns (updated parameters, visibility FitResult, rho FitResult).
    """
    data = _as_data(stories, window)
    vis = rho_fit = None
    for _ in range(max_rounds):
        vis = fit_global_params(data, g)
        g_new = g.with_(c=vis["c"], surf_mu=vis["surf_mu"], surf_lambda=vis["surf_lambda"])
        rho_fit = fit_rho(data, g_new)
        if rho_fit.converged:
            g_new = g_new.with_(rho=rho_fit["rho"])
        old = np.array([g.c, g.surf_mu, g.surf_lambda, g.rho])
        new = np.array([g_new.c, g_new.surf_mu, g_new.surf_lambda, g_new.rho])
        g = g_new
        if np.all(np.abs(new - old) <= rtol * np.abs(old)):
            break
    return g, vis, rho_fit
