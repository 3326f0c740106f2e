"""Mean-field solvers for the expected vote trajectories of both models.

The right-hand sides are discontinuous at promotion and at upcoming-list
expiry, so integration is split into regimes: an adaptive Runge-Kutta pass
runs until the promotion event (located by root finding on the dense output)
or the expiry time, then restarts in the next regime.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .core import InputError, StoryParams
from .params import GlobalParamsV1, GlobalParamsV2
from .visibility import ListKind, f_page_scalar, median_promotion_vote


class IntegrationError(RuntimeError):
    """The ODE integrator failed or produced a non-finite state."""


@dataclass(frozen=True)
class TrajectoryV1:
    t: np.ndarray
    votes: np.ndarray
    s: np.ndarray
    lists: tuple
    pages: np.ndarray
    promotion_time: Optional[float] = None

    @property
    def final_votes(self) -> float:
        return float(self.votes[-1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["t", "N_vote", "s", "page", "list"])
        for row in zip(self.t, self.votes, self.s, self.pages, self.lists):
            w.writerow([f"{row[0]:.10g}", f"{row[1]:.10g}", f"{row[2]:.10g}",
                        "" if np.isnan(row[3]) else f"{row[3]:.10g}", row[4]])
        return buf.getvalue()


@dataclass(frozen=True)
class TrajectoryV2:
    t: np.ndarray
    v_fan: np.ndarray
    v_nonfan: np.ndarray
    fans: np.ndarray
    nonfans: np.ndarray
    lists: tuple
    pages: np.ndarray
    promotion_time: Optional[float] = None

    @property
    def votes(self) -> np.ndarray:
        return self.v_fan + self.v_nonfan

    @property
    def final_votes(self) -> float:
        return float(self.v_fan[-1] + self.v_nonfan[-1])

    def at(self, t) -> np.ndarray:
        """Linear interpolation of (v_fan, v_nonfan, fans, nonfans) at times ``t``."""
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.t, y) for y in (self.v_fan, self.v_nonfan, self.fans, self.nonfans)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["t", "vF", "vN", "F", "N", "page", "list"])
        for i in range(self.t.size):
            page = self.pages[i]
            w.writerow([f"{self.t[i]:.10g}", f"{self.v_fan[i]:.10g}", f"{self.v_nonfan[i]:.10g}",
                        f"{self.fans[i]:.10g}", f"{self.nonfans[i]:.10g}",
                        "" if np.isnan(page) else f"{page:.10g}", self.lists[i]])
        return buf.getvalue()


@dataclass(frozen=True)
class V2State:
    """An observed state to continue a V2 solve from (times in Digg hours)."""

    t: float
    v_fan: float
    v_nonfan: float
    fans: float
    nonfans: float
    promotion_time: Optional[float] = None


@dataclass
class _Piece:
    t: list = field(default_factory=list)
    y: list = field(default_factory=list)
    kind: list = field(default_factory=list)
    page: list = field(default_factory=list)


def _integrate(rhs: Callable, t0: float, t1: float, y0, event, grid: np.ndarray, rtol, atol):
    """One regime. Returns (sample times, samples, event time or None, state at end)."""
    y0 = np.asarray(y0, dtype=float)
    if t1 <= t0:
        return np.empty(0), np.empty((y0.size, 0)), None, y0
    inside = grid[(grid > t0) & (grid < t1)]
    events = [event] if event is not None else None
    sol = solve_ivp(rhs, (t0, t1), y0, method="RK45", rtol=rtol, atol=atol,
                    events=events, dense_output=True)
    if sol.status < 0:
        raise IntegrationError(f"integration failed on [{t0}, {t1}]: {sol.message}")
    t_ev = None
    t_stop = t1
    if event is not None and sol.t_events[0].size:
        t_ev = float(sol.t_events[0][0])
        t_stop = t_ev
        inside = inside[inside < t_ev]
    y_end = sol.sol(t_stop) if t_ev is not None else sol.y[:, -1]
    ys = sol.sol(inside) if inside.size else np.empty((y0.size, 0))
    if not (np.all(np.isfinite(ys)) and np.all(np.isfinite(y_end))):
        raise IntegrationError(f"non-finite state on [{t0}, {t_stop}]")
    return inside, ys, t_ev, np.asarray(y_end, dtype=float)


def _sample_grid(horizon, n_samples, t0=0.0):
    return np.linspace(t0, horizon, n_samples)


# -- model V1 -------------------------------------------------------------------


def solve_v1(g: GlobalParamsV1, story: StoryParams, horizon: float = 100.0, *,
             n_samples: int = 401, rtol: float = 1e-8, atol: float = 1e-8) -> TrajectoryV1:
    """Expected votes N(t) and unseen-fan pool s(t) for the single-interest model (wall hours)."""
    if story.r is None:
        raise InputError("solve_v1 needs a V1 story (parameter r)")
    if horizon <= 0:
        raise InputError("horizon must be positive")
    r = story.r
    mu, lam = g.surf_mu, g.surf_lambda

    def make_rhs(kind, tp):
        def rhs(t, y):
            n, s = y
            if kind == "upcoming":
                vis = g.c * g.nu * f_page_scalar(g.k_upcoming * t + 1.0, mu, lam)
            elif kind == "front":
                vis = g.nu * f_page_scalar(g.k_front * (t - tp) + 1.0, mu, lam)
            else:
                vis = 0.0
            dn = r * (vis + g.omega * s)
            return [dn, -g.omega * s + g.a * max(n, 1.0) ** (-g.b) * dn]
        return rhs

    def reach_h(t, y):
        return y[0] - g.h
    reach_h.terminal = True
    reach_h.direction = 1

    grid = _sample_grid(horizon, n_samples)
    out = _Piece()
    y = np.array([1.0, float(story.S)])

    def record(ts, ys, kind, tp):
        for i, ti in enumerate(ts):
            out.t.append(ti)
            out.y.append(ys[:, i])
            out.kind.append(kind)
            if kind == "upcoming":
                out.page.append(g.k_upcoming * ti + 1.0)
            elif kind == "front":
                out.page.append(g.k_front * (ti - tp) + 1.0)
            else:
                out.page.append(np.nan)

    record(np.array([0.0]), y[:, None], "upcoming", None)
    t_up = min(g.lifetime, horizon)
    ts, ys, t_p, y = _integrate(make_rhs("upcoming", None), 0.0, t_up, y, reach_h, grid, rtol, atol)
    record(ts, ys, "upcoming", None)
    if t_p is not None:
        record(np.array([t_p]), y[:, None], "front", t_p)
        ts, ys, _, y = _integrate(make_rhs("front", t_p), t_p, horizon, y, None, grid, rtol, atol)
        record(ts, ys, "front", t_p)
        last_kind = "front"
    else:
        if horizon > t_up:
            record(np.array([t_up]), y[:, None], "removed", None)
            ts, ys, _, y = _integrate(make_rhs("removed", None), t_up, horizon, y, None, grid, rtol, atol)
            record(ts, ys, "removed", None)
        last_kind = "removed" if horizon >= g.lifetime else "upcoming"
    if out.t[-1] < horizon:
        record(np.array([horizon]), y[:, None], last_kind, t_p)
    ys = np.array(out.y).T
    return TrajectoryV1(np.array(out.t), ys[0], ys[1], tuple(out.kind), np.array(out.page), t_p)


def promotion_time_v1(g: GlobalParamsV1, story: StoryParams) -> Optional[float]:
    """Time the expected vote count reaches the threshold, or None if not within the upcoming lifetime."""
    return solve_v1(g, story, horizon=g.lifetime, n_samples=2).promotion_time


def promoted_region(g: GlobalParamsV1, S_values, r_lo: float = 1e-4, r_hi: float = 1.0,
                    tol: float = 1e-6) -> np.ndarray:
    """Minimum interestingness needed for promotion at each submitter fan count.

    Bisects on ``log r``; entries are ``nan`` where even ``r_hi`` is not promoted.
    """
    out = []
    for S in np.atleast_1d(S_values):
        def promoted(r):
            return promotion_time_v1(g, StoryParams(S=int(S), r=r)) is not None
        if not promoted(r_hi):
            out.append(np.nan)
            continue
        if promoted(r_lo):
            out.append(r_lo)
            continue
        lo, hi = math.log(r_lo), math.log(r_hi)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if promoted(math.exp(mid)):
                hi = mid
            else:
                lo = mid
        out.append(math.exp(hi))
    return np.array(out)


# -- model V2 -------------------------------------------------------------------


def _nonfan_vis(g: GlobalParamsV2, kind: str, t: float, tp: Optional[float]) -> float:
    if kind == "upcoming":
        return g.c * f_page_scalar(g.k_upcoming * t + 1.0, g.surf_mu, g.surf_lambda)
    if kind == "front":
        return f_page_scalar(g.k_front * (t - tp) + 1.0, g.surf_mu, g.surf_lambda)
    return 0.0


def solve_v2(g: GlobalParamsV2, story: StoryParams, horizon: float = 72.0, *,
             start: Optional[V2State] = None, n_samples: int = 289,
             rtol: float = 1e-8, atol: float = 1e-8) -> TrajectoryV2:
    """Expected fan / non-fan votes and unseen pools for the niche-interest model.

    Times are Digg hours. Promotion uses the deterministic median rule: the
    story is promoted when its expected vote count reaches the first count at
    which the cumulative promotion probability is at least 1/2 (conditioned on
    the votes already observed when ``start`` is given).
    """
    if story.r_fan is None:
        raise InputError("solve_v2 needs a V2 story (r_fan, r_nonfan)")
    if story.S >= g.U:
        raise InputError("S must be smaller than U")
    rf, rn = story.r_fan, story.r_nonfan
    om, rho = g.omega, g.rho

    if start is None:
        start = V2State(0.0, 0.0, 1.0, float(story.S), float(g.U - story.S - 1))
    t0 = float(start.t)
    if horizon <= t0:
        raise InputError("horizon must be after the start time")
    y = np.array([start.v_fan, start.v_nonfan, start.fans, start.nonfans], dtype=float)
    tp = start.promotion_time

    def make_rhs(kind, tp_):
        def rhs(t, y):
            vf, vn, F, N = y
            pn = _nonfan_vis(g, kind, t, tp_)
            dvf = om * rf * F
            dvn = om * rn * pn * N
            dv = dvf + dvn
            return [dvf, dvn, -om * F + rho * N * dv, -om * pn * N - rho * N * dv]
        return rhs

    grid = _sample_grid(horizon, n_samples, t0)
    out = _Piece()

    def record(ts, ys, kind, tp_):
        for i, ti in enumerate(ts):
            out.t.append(ti)
            out.y.append(ys[:, i])
            out.kind.append(kind)
            if kind == "upcoming":
                out.page.append(g.k_upcoming * ti + 1.0)
            elif kind == "front":
                out.page.append(g.k_front * (ti - tp_) + 1.0)
            else:
                out.page.append(np.nan)

    if tp is not None:
        kind = "front"
    elif t0 >= g.lifetime:
        kind = "removed"
    else:
        kind = "upcoming"
    record(np.array([t0]), y[:, None], kind, tp)

    if kind == "upcoming":
        observed = int(math.floor(y[0] + y[1] + 1e-9))
        v_star = median_promotion_vote(g.promotion, after=max(observed, 1))
        event = None
        if v_star is not None:
            def reach(t, y):
                return y[0] + y[1] - v_star
            reach.terminal = True
            reach.direction = 1
            event = reach
        t_up = min(g.lifetime, horizon)
        ts, ys, t_ev, y = _integrate(make_rhs("upcoming", None), t0, t_up, y, event, grid, rtol, atol)
        record(ts, ys, "upcoming", None)
        if t_ev is not None:
            tp = t_ev
            kind = "front"
            record(np.array([tp]), y[:, None], "front", tp)
            t0 = tp
        else:
            kind = "removed" if horizon > t_up or t_up >= g.lifetime else "upcoming"
            if horizon > t_up:
                record(np.array([t_up]), y[:, None], "removed", None)
            t0 = t_up
    if t0 < horizon:
        ts, ys, _, y = _integrate(make_rhs(kind, tp), t0, horizon, y, None, grid, rtol, atol)
        record(ts, ys, kind, tp)
    if out.t[-1] < horizon:
        record(np.array([horizon]), y[:, None], kind, tp)
    ys = np.array(out.y).T
    return TrajectoryV2(np.array(out.t), ys[0], ys[1], ys[2], ys[3], tuple(out.kind), np.array(out.page), tp)


def list_kind_at(traj, t: float) -> ListKind:
    i = int(np.searchsorted(traj.t, t, side="right")) - 1
    return ListKind(traj.lists[max(i, 0)])
