"""Story visibility: the law of surfing, list positions and promotion rules.

The page-depth model is an inverse Gaussian on the number of pages a visitor
views. ``f_page(m)`` is the fraction of visitors who reach page ``m`` or
deeper, i.e. the inverse Gaussian survival function evaluated at ``m - 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfc, erfcx, expit, ndtr

from .core import UPCOMING_LIFETIME, InputError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _check_surf(surf_mu, surf_lambda):
    if not (surf_mu > 0 and surf_lambda > 0):
        raise InputError(f"surfing parameters must be positive, got mu={surf_mu}, lambda={surf_lambda}")


def _scaled_erfc_tail(z, log_scale):
    """exp(log_scale) * erfc(z) without overflow."""
    return np.exp(log_scale - z * z) * erfcx(z)


def law_of_surfing_upper(m, surf_mu, surf_lambda):
    """Fraction of visitors who view at least ``m`` pages.

    Vectorised over ``m``; ``f_page(1) == 1`` exactly.
    """
    _check_surf(surf_mu, surf_lambda)
    m = np.asarray(m, dtype=float)
    if np.any(m < 1) or np.any(np.isnan(m)):
        raise InputError("page index must be >= 1")
    x = m - 1.0
    out = np.ones_like(x)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        alpha = np.sqrt(surf_lambda / (2.0 * xp))
        z1 = alpha * (xp - surf_mu) / surf_mu
        z2 = alpha * (xp + surf_mu) / surf_mu
        val = 0.5 * (erfc(z1) - _scaled_erfc_tail(z2, 2.0 * surf_lambda / surf_mu))
        out[pos] = np.clip(val, 0.0, 1.0)
    return out if out.ndim else float(out)


f_page = law_of_surfing_upper


def f_page_scalar(m: float, surf_mu: float, surf_lambda: float) -> float:
    """Scalar fast path of :func:`law_of_surfing_upper` for inner loops."""
    x = m - 1.0
    if x <= 0.0:
        return 1.0
    alpha = math.sqrt(surf_lambda / (2.0 * x))
    z1 = alpha * (x - surf_mu) / surf_mu
    z2 = alpha * (x + surf_mu) / surf_mu
    k = 2.0 * surf_lambda / surf_mu
    if k < 600.0 and z2 < 25.0:
        tail = math.exp(k) * math.erfc(z2)
    else:
        tail = float(_scaled_erfc_tail(z2, k))
    val = 0.5 * (math.erfc(z1) - tail)
    return min(max(val, 0.0), 1.0)


def _ig_pieces(x, mu, lam):
    """Shared terms for the closed forms below, for x > 0."""
    s = np.sqrt(lam / x)
    a = s * (x / mu - 1.0)
    b = s * (x / mu + 1.0)
    phi_a = np.exp(-0.5 * a * a) / _SQRT_2PI
    # e^{2 lam/mu} * Phi(-b), overflow-safe
    tail = 0.5 * _scaled_erfc_tail(b / math.sqrt(2.0), 2.0 * lam / mu)
    return a, b, phi_a, tail


def f_page_integral(x, surf_mu, surf_lambda):
    """Integral of ``f_page(1 + y)`` for ``y`` from 0 to ``x`` (x >= 0).

    Closed form via the inverse Gaussian partial expectation:
    ``x * S(x) + mu * (Phi(a) - e^{2 lam/mu} Phi(-b))``.
    """
    _check_surf(surf_mu, surf_lambda)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        a, b, phi_a, tail = _ig_pieces(xp, surf_mu, surf_lambda)
        surv = law_of_surfing_upper(xp + 1.0, surf_mu, surf_lambda)
        out[pos] = xp * surv + surf_mu * (ndtr(a) - tail)
    return out if out.ndim else float(out)


def f_page_grad(x, surf_mu, surf_lambda):
    """Partial derivatives of ``f_page(1 + x)`` w.r.t. (mu, lambda). Zero at x=0."""
    x = np.asarray(x, dtype=float)
    d_mu = np.zeros_like(x)
    d_lam = np.zeros_like(x)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        mu, lam = surf_mu, surf_lambda
        a, b, phi_a, tail = _ig_pieces(xp, mu, lam)
        d_mu[pos] = (2.0 * lam / mu**2) * tail
        d_lam[pos] = phi_a / np.sqrt(lam * xp) - (2.0 / mu) * tail
    return d_mu, d_lam


def f_page_integral_grad(x, surf_mu, surf_lambda):
    """Partial derivatives of :func:`f_page_integral` w.r.t. (mu, lambda)."""
    x = np.asarray(x, dtype=float)
    d_mu = np.zeros_like(x)
    d_lam = np.zeros_like(x)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        mu, lam = surf_mu, surf_lambda
        a, b, phi_a, tail = _ig_pieces(xp, mu, lam)
        k = ndtr(a) - tail
        s_mu = (2.0 * lam / mu**2) * tail
        s_lam = phi_a / np.sqrt(lam * xp) - (2.0 / mu) * tail
        k_mu = -2.0 * phi_a * np.sqrt(lam * xp) / mu**2 + (2.0 * lam / mu**2) * tail
        k_lam = phi_a * np.sqrt(xp / lam) / mu - (2.0 / mu) * tail
        d_mu[pos] = xp * s_mu + k + mu * k_mu
        d_lam[pos] = xp * s_lam + mu * k_lam
    return d_mu, d_lam


# -- list position ---------------------------------------------------------------


class ListKind(str, enum.Enum):
    UPCOMING = "upcoming"
    FRONT = "front"
    REMOVED = "removed"


@dataclass(frozen=True)
class ListPosition:
    list: ListKind
    page: Optional[float] = None

    def __post_init__(self):
        if self.list == ListKind.REMOVED:
            if self.page is not None:
                raise InputError("a removed story has no page")
        elif self.page is None or self.page < 1:
            raise InputError("page must be >= 1")


def story_page(t: float, promoted_at: Optional[float], k_upcoming: float, k_front: float,
               lifetime: float = UPCOMING_LIFETIME) -> ListPosition:
    """Where the story sits at time ``t`` (same unit as ``promoted_at``).

    The map is right-continuous: at the promotion instant the story is already
    at the top of the front page.
    """
    if t < 0:
        raise InputError("time must be non-negative")
    if promoted_at is not None and t >= promoted_at:
        return ListPosition(ListKind.FRONT, k_front * (t - promoted_at) + 1.0)
    if t >= lifetime:
        return ListPosition(ListKind.REMOVED)
    return ListPosition(ListKind.UPCOMING, k_upcoming * t + 1.0)


def nonfan_visibility(position: ListPosition, c: float, surf_mu: float, surf_lambda: float) -> float:
    if position.list == ListKind.REMOVED:
        return 0.0
    f = f_page_scalar(position.page, surf_mu, surf_lambda)
    return f if position.list == ListKind.FRONT else c * f


# -- promotion -------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdPromotion:
    h: int = 40

    def __post_init__(self):
        if int(self.h) != self.h or self.h < 2:
            raise InputError("threshold h must be an integer >= 2")

    def probability(self, v):
        v = np.asarray(v)
        return np.where(v >= self.h, 1.0, 0.0)

    def to_dict(self):
        return {"kind": "threshold", "h": int(self.h)}


@dataclass(frozen=True)
class LogisticPromotion:
    """P(v) = logistic(intercept + slope * v) for v >= 2, with P(1) pinned to 0."""

    intercept: float
    slope: float

    def probability(self, v):
        v = np.asarray(v, dtype=float)
        return np.where(v >= 2, expit(self.intercept + self.slope * v), 0.0)

    def to_dict(self):
        return {"kind": "logistic", "intercept": float(self.intercept), "slope": float(self.slope)}


PromotionModel = ThresholdPromotion | LogisticPromotion


def promotion_model_from_dict(d: dict) -> PromotionModel:
    kind = d.get("kind")
    if kind == "threshold":
        return ThresholdPromotion(int(d["h"]))
    if kind == "logistic":
        return LogisticPromotion(float(d["intercept"]), float(d["slope"]))
    raise InputError(f"unknown promotion model kind {kind!r}")


def promotion_probability(v, model: PromotionModel):
    """Probability an upcoming story is promoted right after its ``v``-th vote."""
    va = np.asarray(v)
    if np.any(va < 1):
        raise InputError("vote count must be >= 1")
    out = model.probability(va)
    return out if np.ndim(out) else float(out)


def survival_probability(v: int, model: PromotionModel, after: int = 0) -> float:
    """Probability of still being unpromoted after vote ``v``, given unpromoted after vote ``after``."""
    if v < 1:
        raise InputError("vote count must be >= 1")
    if v <= after:
        return 1.0
    p = promotion_probability(np.arange(after + 1, v + 1), model)
    return float(np.prod(1.0 - p))


def median_promotion_vote(model: PromotionModel, after: int = 0, v_max: int = 1_000_000) -> Optional[int]:
    """First vote count at which the cumulative promotion probability reaches 1/2.

    Conditioned on no promotion through vote ``after``. Returns ``None`` if the
    median is not reached by ``v_max``.
    """
    if isinstance(model, ThresholdPromotion):
        return max(int(model.h), after + 1)
    lo = max(after + 1, 1)
    block = 4096
    log_surv = 0.0
    while lo <= v_max:
        v = np.arange(lo, min(lo + block, v_max + 1))
        p = np.clip(promotion_probability(v, model), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            cum = log_surv + np.cumsum(np.log1p(-p))
        hit = np.nonzero(cum <= -math.log(2.0))[0]
        if hit.size:
            return int(v[hit[0]])
        log_surv = cum[-1]
        lo = int(v[-1]) + 1
        if isinstance(model, LogisticPromotion) and model.slope <= 0 and lo > 10 * block:
            break
    return None
