"""scikit-learn style wrappers around the fitting and prediction routines.

The inputs ``X`` are sequences of :class:`~vote_dynamics.core.StoryRecord`
in Digg time (or a vote-count histogram for :class:`ActivityEstimator`).
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_histogram, check_is_fitted, check_outcomes, check_records
from .core import InputError
from .estimate.activity import fit_activity_zero_truncated, poisson_lognormal_pmf
from .estimate.likelihood import fit_site_params, fit_story_interest
from .estimate.promotion import fit_promotion
from .estimate.results import REFERENCE_FAN_PRIOR, REFERENCE_NONFAN_PRIOR
from .params import GlobalParamsV2
from .predict import PredictionConfig, predict_story


def _prior_pair(prior):
    if prior is None or prior is False:
        return None
    if prior == "reference" or prior is True:
        return (REFERENCE_FAN_PRIOR, REFERENCE_NONFAN_PRIOR)
    if isinstance(prior, tuple) and len(prior) == 2:
        return prior
    raise InputError("prior must be None, 'reference' or a (fan, nonfan) LognormalPrior pair")


class InterestEstimator(TransformerMixin, BaseEstimator):
    """Per-story (r_fan, r_nonfan) with the site-wide parameters held fixed.

    ``transform`` returns an ``(n_stories, 2)`` array.
    """

    def __init__(self, global_params: Optional[GlobalParamsV2] = None, prior=None,
                 vote_window: Optional[int] = None, equal_r: bool = False, n_jobs: int = 1):
        self.global_params = global_params
        self.prior = prior
        self.vote_window = vote_window
        self.equal_r = equal_r
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        check_records(X)
        self.global_params_ = self.global_params or GlobalParamsV2.reference()
        self.prior_ = _prior_pair(self.prior)
        return self

    def _fit_one(self, rec):
        return fit_story_interest(rec, self.global_params_, prior=self.prior_,
                                  vote_window=self.vote_window, equal_r=self.equal_r)

    def fit_results(self, X) -> list:
        check_is_fitted(self, "global_params_")
        records = check_records(X)
        if self.n_jobs == 1:
            return [self._fit_one(r) for r in records]
        return Parallel(n_jobs=self.n_jobs)(delayed(self._fit_one)(r) for r in records)

    def transform(self, X):
        return np.array([res.estimate for res in self.fit_results(X)])


class SiteParamsEstimator(BaseEstimator):
    """Joint fit of (c, surf_mu, surf_lambda) and rho with per-story interest profiled out."""

    def __init__(self, init_params: Optional[GlobalParamsV2] = None, vote_window: Optional[int] = None,
                 max_rounds: int = 4):
        self.init_params = init_params
        self.vote_window = vote_window
        self.max_rounds = max_rounds

    def fit(self, X, y=None):
        records = check_records(X)
        g0 = self.init_params or GlobalParamsV2.reference()
        g, vis, rho = fit_site_params(records, g0, self.vote_window, self.max_rounds)
        self.global_params_ = g
        self.visibility_result_ = vis
        self.rho_result_ = rho
        self.converged_ = bool(vis.converged and rho.converged)
        return self


class ActivityEstimator(BaseEstimator):
    """Zero-truncated Poisson-lognormal fit of per-user vote counts."""

    def __init__(self, start=(-1.0, 1.0)):
        self.start = start

    def fit(self, X, y=None):
        h = check_histogram(X)
        res = fit_activity_zero_truncated(h, start=self.start)
        self.result_ = res
        self.mu_, self.sigma_, self.n_users_ = (float(v) for v in res.estimate)
        self.converged_ = res.converged
        return self

    def pmf(self, k):
        check_is_fitted(self, "mu_")
        return poisson_lognormal_pmf(self.mu_, self.sigma_, k)


class PromotionEstimator(BaseEstimator):
    """Logistic P(v) fitted on per-vote promotion trials (P(1) pinned to 0)."""

    def __init__(self, lifetime: float = 24.0, cap: float = 50.0):
        self.lifetime = lifetime
        self.cap = cap

    def fit(self, X, y=None):
        records = check_records(X, digg_time=False)
        model, res = fit_promotion(records, self.lifetime, self.cap)
        if model is None:
            raise InputError(res.message)
        self.model_ = model
        self.result_ = res
        self.intercept_, self.slope_ = model.intercept, model.slope
        self.converged_ = res.converged
        return self

    def predict_proba(self, v):
        check_is_fitted(self, "model_")
        return self.model_.probability(np.asarray(v))


class PopularityPredictor(BaseEstimator):
    """Classify stories by whether they reach ``threshold`` votes by ``t_final``.

    ``predict_votes`` gives the mean-field forecast of the final count and
    ``predict`` the class. ``score`` is accuracy against ``final_votes``.
    """

    def __init__(self, global_params: Optional[GlobalParamsV2] = None, vote_window: Optional[int] = 10,
                 t_final: float = 72.0, threshold: int = 500, use_prior: bool = False,
                 equal_r: bool = False, n_jobs: int = 1):
        self.global_params = global_params
        self.vote_window = vote_window
        self.t_final = t_final
        self.threshold = threshold
        self.use_prior = use_prior
        self.equal_r = equal_r
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        if X is not None:
            check_records(X)
        self.global_params_ = self.global_params or GlobalParamsV2.reference()
        self.config_ = PredictionConfig(self.vote_window, self.t_final, self.threshold, self.use_prior,
                                        self.equal_r)
        return self

    def predict_stories(self, X) -> list:
        check_is_fitted(self, "config_")
        records = check_records(X)
        if self.n_jobs == 1:
            return [predict_story(r, self.global_params_, self.config_) for r in records]
        return Parallel(n_jobs=self.n_jobs)(
            delayed(predict_story)(r, self.global_params_, self.config_) for r in records)

    def predict_votes(self, X) -> np.ndarray:
        return np.array([p.predicted_final for p in self.predict_stories(X)], dtype=float)

    def predict(self, X) -> np.ndarray:
        v = self.predict_votes(X)
        return np.where(np.isfinite(v), v >= self.threshold, False)

    def score(self, X, y=None) -> float:
        records = check_records(X)
        actual = check_outcomes(records) >= self.threshold
        return float(np.mean(self.predict(records) == actual))
