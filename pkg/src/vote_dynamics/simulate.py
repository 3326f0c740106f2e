"""Event-level stochastic generator of vote streams.

Between votes the unseen pools shrink by their expected exposure (fans at
rate omega, non-fans at rate omega * P_N(t)), which makes the total vote
intensity non-increasing until the next vote. Votes are drawn by thinning
against the intensity at the current time, which is therefore a valid bound.
Each vote converts Binomial(N, rho) non-fans into fans and, on the upcoming
list, triggers a promotion draw with probability P(v).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.special import erfcx

from .core import InputError, StoryParams, StoryRecord, TimeUnit, VoteEvent
from .params import GlobalParamsV1, GlobalParamsV2
from .visibility import f_page_scalar, promotion_probability

_SQRT2 = math.sqrt(2.0)


def _ndtr(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def _page_integral(x: float, mu: float, lam: float) -> float:
    """Scalar twin of :func:`vote_dynamics.visibility.f_page_integral`."""
    if x <= 0.0:
        return 0.0
    s = math.sqrt(lam / x)
    a = s * (x / mu - 1.0)
    b = s * (x / mu + 1.0)
    k = 2.0 * lam / mu
    z = b / _SQRT2
    if k < 600.0 and z < 25.0:
        tail = 0.5 * math.exp(k) * math.erfc(z)
    else:
        tail = 0.5 * math.exp(k - z * z) * float(erfcx(z))
    return x * f_page_scalar(x + 1.0, mu, lam) + mu * (_ndtr(a) - tail)


def story_rng(seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for story ``index`` of a corpus."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


class _V2Visibility:
    def __init__(self, g: GlobalParamsV2):
        self.g = g

    def kind(self, t, tp):
        if tp is not None:
            return "front"
        return "upcoming" if t < self.g.lifetime else "removed"

    def rate(self, kind, t, tp):
        g = self.g
        if kind == "upcoming":
            return g.c * f_page_scalar(g.k_upcoming * t + 1.0, g.surf_mu, g.surf_lambda)
        if kind == "front":
            return f_page_scalar(g.k_front * (t - tp) + 1.0, g.surf_mu, g.surf_lambda)
        return 0.0

    def integral(self, kind, t0, t1, tp):
        """Integral of P_N over [t0, t1] within a single regime."""
        g = self.g
        if kind == "upcoming":
            return g.c * (_page_integral(g.k_upcoming * t1, g.surf_mu, g.surf_lambda)
                          - _page_integral(g.k_upcoming * t0, g.surf_mu, g.surf_lambda)) / g.k_upcoming
        if kind == "front":
            return (_page_integral(g.k_front * (t1 - tp), g.surf_mu, g.surf_lambda)
                    - _page_integral(g.k_front * (t0 - tp), g.surf_mu, g.surf_lambda)) / g.k_front
        return 0.0


def simulate_story(g: GlobalParamsV2, story: StoryParams, horizon: float, rng: np.random.Generator,
                   story_id: str = "story", voter_ids: bool = True) -> StoryRecord:
    """Draw one vote stream from the niche-interest model (Digg hours)."""
    if story.r_fan is None:
        raise InputError("simulate_story needs a V2 story (r_fan, r_nonfan)")
    if story.S >= g.U:
        raise InputError("S must be smaller than U")
    if horizon <= 0:
        raise InputError("horizon must be positive")
    vis = _V2Visibility(g)
    om, rf, rn, rho = g.omega, story.r_fan, story.r_nonfan, g.rho
    t = 0.0
    F = float(story.S)
    N = float(g.U - story.S - 1)
    tp: Optional[float] = None
    times = [0.0]
    fan = [False]
    while t < horizon:
        kind = vis.kind(t, tp)
        boundary = min(g.lifetime, horizon) if kind == "upcoming" else horizon
        bound = om * rf * F + om * rn * vis.rate(kind, t, tp) * N
        if bound <= 0.0:
            tau = boundary
        else:
            tau = t + rng.exponential(1.0 / bound)
        if tau >= boundary:
            N *= math.exp(-om * vis.integral(kind, t, boundary, tp))
            F *= math.exp(-om * (boundary - t))
            t = boundary
            continue
        N *= math.exp(-om * vis.integral(kind, t, tau, tp))
        F *= math.exp(-om * (tau - t))
        t = tau
        lam_f = om * rf * F
        lam = lam_f + om * rn * vis.rate(kind, t, tp) * N
        if rng.random() * bound >= lam:
            continue
        is_fan = rng.random() * lam < lam_f
        times.append(t)
        fan.append(bool(is_fan))
        k = rng.binomial(int(N), rho) if N >= 1.0 else 0
        F += k
        N -= k
        if kind == "upcoming" and rng.random() < promotion_probability(len(times), g.promotion):
            tp = t
    n = len(times)
    ids = _voter_ids(rng, g.U, n) if voter_ids else [f"v{i}" for i in range(n)]
    votes = tuple(VoteEvent(story_id, ids[i], times[i], fan[i]) for i in range(n))
    return StoryRecord(story_id, votes, submitter_fans=int(story.S), promotion_time=tp,
                       final_votes=n, time_unit=TimeUnit.DIGG, observed_until=float(horizon))


def _voter_ids(rng, U, n):
    idx = rng.choice(U, size=min(n, U), replace=False)
    return [f"u{int(i)}" for i in idx]


def simulate_story_v1(g: GlobalParamsV1, story: StoryParams, horizon: float, rng: np.random.Generator,
                      story_id: str = "story", fan_increment: str = "expected") -> StoryRecord:
    """Draw one vote stream from the single-interest model (wall hours).

    Each vote adds ``a * N**-b`` unseen fans (``fan_increment="expected"``) or
    a Poisson draw with that mean (``"poisson"``).
    """
    if story.r is None:
        raise InputError("simulate_story_v1 needs a V1 story (parameter r)")
    if fan_increment not in ("expected", "poisson"):
        raise InputError("fan_increment must be 'expected' or 'poisson'")
    mu, lam, r, om = g.surf_mu, g.surf_lambda, story.r, g.omega

    def general(kind, t, tp):
        if kind == "upcoming":
            return g.c * g.nu * f_page_scalar(g.k_upcoming * t + 1.0, mu, lam)
        if kind == "front":
            return g.nu * f_page_scalar(g.k_front * (t - tp) + 1.0, mu, lam)
        return 0.0

    t, s, tp = 0.0, float(story.S), None
    times, fan = [0.0], [False]
    while t < horizon:
        kind = "front" if tp is not None else ("upcoming" if t < g.lifetime else "removed")
        boundary = min(g.lifetime, horizon) if kind == "upcoming" else horizon
        bound = r * (general(kind, t, tp) + om * s)
        tau = t + rng.exponential(1.0 / bound) if bound > 0 else boundary
        if tau >= boundary:
            s *= math.exp(-om * (boundary - t))
            t = boundary
            continue
        s *= math.exp(-om * (tau - t))
        t = tau
        lam_f = r * om * s
        lam_t = lam_f + r * general(kind, t, tp)
        if rng.random() * bound >= lam_t:
            continue
        n_before = len(times)
        times.append(t)
        fan.append(bool(rng.random() * lam_t < lam_f))
        inc = g.a * n_before ** (-g.b)
        s += inc if fan_increment == "expected" else rng.poisson(inc)
        if tp is None and len(times) >= g.h and t < g.lifetime:
            tp = t
    votes = tuple(VoteEvent(story_id, f"v{i}", times[i], fan[i]) for i in range(len(times)))
    return StoryRecord(story_id, votes, submitter_fans=int(story.S), promotion_time=tp,
                       final_votes=len(times), time_unit=TimeUnit.WALL, observed_until=float(horizon))


# -- user activity -------------------------------------------------------------------


@dataclass(frozen=True)
class PopulationModel:
    n_users: int
    mu_act: float = -2.06
    sigma_act: float = 1.82

    def __post_init__(self):
        if self.n_users < 1:
            raise InputError("n_users must be positive")
        if not (np.isfinite(self.mu_act) and np.isfinite(self.sigma_act) and self.sigma_act > 0):
            raise InputError("activity lognormal needs finite mu and sigma > 0")


def simulate_population_activity(pop: PopulationModel, rng: np.random.Generator,
                                 T: float = 1.0) -> np.ndarray:
    """Histogram ``n_k`` (index ``k``) of users with ``k`` votes in a sample of length ``T``.

    Per-user expected counts are lognormal with the given parameters per unit
    ``T``; counts are Poisson. ``n_k[0]`` includes the silent users.
    """
    if T <= 0:
        raise InputError("sample length must be positive")
    rates = np.exp(rng.normal(pop.mu_act, pop.sigma_act, size=pop.n_users)) * T
    counts = rng.poisson(rates)
    return np.bincount(counts)


# -- corpora ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LognormalSpec:
    mu: float
    sigma: float

    def draw(self, rng) -> float:
        return float(np.exp(rng.normal(self.mu, self.sigma)))


@dataclass(frozen=True)
class SubmitterFansSpec:
    """Zero-inflated geometric distribution of the submitter's fan count."""

    p_zero: float = 0.3
    mean: float = 40.0

    def draw(self, rng) -> int:
        if rng.random() < self.p_zero:
            return 0
        # geometric on {1, 2, ...} with the given mean
        return int(rng.geometric(1.0 / self.mean))


@dataclass(frozen=True)
class SimConfig:
    global_params: GlobalParamsV2 = field(default_factory=GlobalParamsV2)
    r_fan: LognormalSpec = LognormalSpec(-1.8, 0.75)
    r_nonfan: LognormalSpec = LognormalSpec(-4.0, 0.63)
    submitter_fans: SubmitterFansSpec = SubmitterFansSpec()
    n_stories: int = 100
    horizon: float = 72.0
    seed: int = 0

    def __post_init__(self):
        if self.n_stories < 1:
            raise InputError("n_stories must be >= 1")
        if self.horizon <= 0:
            raise InputError("horizon must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise InputError("seed must be a 64-bit non-negative integer")

    def to_dict(self) -> dict:
        return {
            "global_params": self.global_params.to_dict(),
            "r_fan": asdict(self.r_fan),
            "r_nonfan": asdict(self.r_nonfan),
            "submitter_fans": asdict(self.submitter_fans),
            "n_stories": self.n_stories,
            "horizon": self.horizon,
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {"global_params", "r_fan", "r_nonfan", "submitter_fans", "n_stories", "horizon", "seed"}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown simulation setting(s): {sorted(unknown)}")
        kw = {}
        if "global_params" in d:
            kw["global_params"] = GlobalParamsV2.from_dict(d["global_params"])
        for key, typ in (("r_fan", LognormalSpec), ("r_nonfan", LognormalSpec),
                         ("submitter_fans", SubmitterFansSpec)):
            if key in d:
                kw[key] = typ(**d[key])
        for key in ("n_stories", "seed"):
            if key in d:
                kw[key] = int(d[key])
        if "horizon" in d:
            kw["horizon"] = float(d["horizon"])
        return cls(**kw)


def draw_story_params(config: SimConfig, rng) -> StoryParams:
    S = min(config.submitter_fans.draw(rng), config.global_params.U - 2)
    rf = min(config.r_fan.draw(rng), 1.0)
    rn = min(config.r_nonfan.draw(rng), 1.0)
    return StoryParams(S=S, r_fan=rf, r_nonfan=rn)


def _corpus_item(config: SimConfig, i: int):
    rng = story_rng(config.seed, i)
    params = draw_story_params(config, rng)
    rec = simulate_story(config.global_params, params, config.horizon, rng, story_id=f"story{i:05d}")
    return rec, params


def make_corpus(config: SimConfig, n_jobs: int = 1):
    """Simulate ``config.n_stories`` stories; returns (records, ground-truth params).

    Story ``i`` uses its own RNG stream, so the output does not depend on ``n_jobs``.
    """
    idx = range(config.n_stories)
    if n_jobs == 1:
        items = [_corpus_item(config, i) for i in idx]
    else:
        items = Parallel(n_jobs=n_jobs)(delayed(_corpus_item)(config, i) for i in idx)
    records = [rec for rec, _ in items]
    params = [p for _, p in items]
    return records, params
