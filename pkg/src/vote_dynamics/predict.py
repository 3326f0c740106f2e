"""Popularity prediction from a story's early votes, and baselines to compare against."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator

from .core import InputError, StoryParams, StoryRecord
from .dynamics import IntegrationError, solve_v2
from .estimate.likelihood import StoryData, fit_story_interest, story_state
from .estimate.results import REFERENCE_FAN_PRIOR, REFERENCE_NONFAN_PRIOR, LognormalPrior
from .estimate.stats import paired_bootstrap, pearson, safe_corr, spearman
from .params import GlobalParamsV2


@dataclass(frozen=True)
class PredictionConfig:
    """Settings of the early-vote predictor.

    ``vote_window=None`` uses every observed vote.
    """

    vote_window: Optional[int] = 10
    t_final: float = 72.0
    popularity_threshold: int = 500
    use_prior: bool = False
    constrain_equal_r: bool = False
    fan_prior: LognormalPrior = REFERENCE_FAN_PRIOR
    nonfan_prior: LognormalPrior = REFERENCE_NONFAN_PRIOR

    def __post_init__(self):
        if self.vote_window is not None and self.vote_window < 2:
            raise InputError("vote_window must be at least 2")
        if not self.t_final > 0:
            raise InputError("t_final must be positive")
        if self.popularity_threshold < 1:
            raise InputError("popularity_threshold must be positive")

    @property
    def prior(self):
        return (self.fan_prior, self.nonfan_prior) if self.use_prior else None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fan_prior"] = self.fan_prior.to_dict()
        d["nonfan_prior"] = self.nonfan_prior.to_dict()
        return d


@dataclass(frozen=True)
class StoryPrediction:
    story_id: str
    predicted_final: float
    r_fan: float = math.nan
    r_nonfan: float = math.nan
    predicted_promotion_time: Optional[float] = None
    available: bool = True
    message: str = ""


def predict_story(story: StoryRecord, g: GlobalParamsV2, config: PredictionConfig = PredictionConfig()) -> StoryPrediction:
    """Fit interestingness on the vote window and solve the mean-field model to ``t_final``.

    If the window does not show a promotion, the solver's median promotion
    rule decides whether and when the story is promoted. A failed fit or solve
    marks the prediction unavailable instead of returning a number.
    """
    if config.vote_window is not None and story.n_votes < config.vote_window:
        return StoryPrediction(story.story_id, math.nan, available=False,
                               message=f"story has {story.n_votes} votes, fewer than the window")
    d = StoryData.from_record(story, config.vote_window)
    n_obs = d.times.size
    fit = fit_story_interest(d, g, prior=config.prior, equal_r=config.constrain_equal_r)
    rf, rn = fit["r_fan"], fit["r_nonfan"]
    tp_obs = d.promotion_time if math.isfinite(d.promotion_time) else None
    if not np.all(np.isfinite(fit.estimate)):
        return StoryPrediction(story.story_id, math.nan, rf, rn, tp_obs, False, fit.message or "fit failed")
    if d.T >= config.t_final:
        return StoryPrediction(story.story_id, float(n_obs), rf, rn, tp_obs)
    try:
        state = story_state(d, g)
        traj = solve_v2(g, StoryParams(S=d.S, r_fan=rf, r_nonfan=rn), config.t_final, start=state,
                        n_samples=2)
    except (IntegrationError, InputError) as exc:
        return StoryPrediction(story.story_id, math.nan, rf, rn, tp_obs, False, str(exc))
    return StoryPrediction(story.story_id, traj.final_votes, rf, rn, traj.promotion_time)


def predict_promotion(story: StoryRecord, g: GlobalParamsV2, k: int = 10,
                      config: Optional[PredictionConfig] = None) -> bool:
    """Whether the story is (or, by the forward solve, will be) promoted, from its first ``k`` votes."""
    cfg = config or PredictionConfig()
    cfg = PredictionConfig(k, cfg.t_final, cfg.popularity_threshold, cfg.use_prior, cfg.constrain_equal_r,
                           cfg.fan_prior, cfg.nonfan_prior)
    window = story.truncate(k)
    if window.promoted:
        return True
    pred = predict_story(story, g, cfg)
    return pred.available and pred.predicted_promotion_time is not None


# -- extrapolation baseline --------------------------------------------------------


def raw_extrapolation(story: StoryRecord, window: Optional[int], t_final: float) -> float:
    """``v * t_final / t`` with ``t`` the time the story took to reach its ``v``-th vote."""
    w = story if window is None else story.truncate(window)
    v = w.n_votes
    t = w.votes[-1].time
    if not t > 0:
        raise InputError(f"story {story.story_id!r}: window ends at time 0; extrapolation undefined")
    return v * t_final / t


class ExtrapolationBaseline(BaseEstimator):
    """Rate extrapolation from the early votes, calibrated by a least-squares affine map.

    Times are taken in each record's own unit (Digg hours for fitted data).
    """

    def __init__(self, vote_window: Optional[int] = 10, t_final: float = 72.0):
        self.vote_window = vote_window
        self.t_final = t_final

    def fit(self, calibration: Sequence[StoryRecord], y=None) -> "ExtrapolationBaseline":
        raw = np.array([raw_extrapolation(s, self.vote_window, self.t_final) for s in calibration])
        actual = np.array([_actual(s) for s in calibration], dtype=float)
        if raw.size < 2:
            raise InputError("calibration needs at least two stories")
        A = np.c_[np.ones_like(raw), raw]
        coef, *_ = np.linalg.lstsq(A, actual, rcond=None)
        self.intercept_, self.slope_ = float(coef[0]), float(coef[1])
        self.calibration_ids_ = frozenset(s.story_id for s in calibration)
        return self

    def predict(self, stories: Sequence[StoryRecord]) -> np.ndarray:
        if not hasattr(self, "slope_"):
            raise InputError("baseline is not calibrated; call fit first")
        leaked = [s.story_id for s in stories if s.story_id in self.calibration_ids_]
        if leaked:
            raise InputError(f"{len(leaked)} evaluation stories were used for calibration")
        raw = np.array([raw_extrapolation(s, self.vote_window, self.t_final) for s in stories])
        return self.intercept_ + self.slope_ * raw


def extrapolate_baseline(story: StoryRecord, calibration: Sequence[StoryRecord], vote_window: Optional[int] = 10,
                         t_final: float = 72.0) -> float:
    return float(ExtrapolationBaseline(vote_window, t_final).fit(calibration).predict([story])[0])


def _actual(s: StoryRecord) -> int:
    if s.final_votes is None:
        raise InputError(f"story {s.story_id!r} has no known final vote count")
    return int(s.final_votes)


def split_corpus(records: Sequence[StoryRecord], calibration_fraction: float = 1 / 3, seed: int = 0):
    """Deterministic seeded split into (calibration, evaluation) sets."""
    if not 0 < calibration_fraction < 1:
        raise InputError("calibration_fraction must be in (0, 1)")
    n = len(records)
    perm = np.random.default_rng(seed).permutation(n)
    k = int(round(calibration_fraction * n))
    calib = sorted(perm[:k])
    test = sorted(perm[k:])
    return [records[i] for i in calib], [records[i] for i in test]


# -- evaluation ------------------------------------------------------------------


@dataclass
class PredictionReport:
    method: str
    story_ids: list
    predicted: np.ndarray
    actual: Optional[np.ndarray]
    threshold: int
    available: Optional[np.ndarray] = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.predicted = np.asarray(self.predicted, dtype=float)
        if self.actual is not None:
            self.actual = np.asarray(self.actual, dtype=float)
        if self.available is None:
            self.available = np.isfinite(self.predicted)

    @property
    def predicted_class(self) -> np.ndarray:
        return np.where(self.available, self.predicted >= self.threshold, False)

    @property
    def actual_class(self) -> Optional[np.ndarray]:
        return None if self.actual is None else self.actual >= self.threshold

    def _ok(self):
        return self.available & np.isfinite(self.predicted)

    @property
    def errors(self) -> np.ndarray:
        """Per-story misclassification; an unavailable prediction counts as an error."""
        return (self.predicted_class != self.actual_class) | ~self.available

    @property
    def error_rate(self) -> Optional[float]:
        return None if self.actual is None else float(np.mean(self.errors))

    @property
    def pearson(self) -> Optional[float]:
        ok = self._ok()
        return None if self.actual is None else safe_corr(pearson, self.predicted[ok], self.actual[ok])

    @property
    def spearman(self) -> Optional[float]:
        ok = self._ok()
        return None if self.actual is None else safe_corr(spearman, self.predicted[ok], self.actual[ok])

    def summary(self) -> dict:
        return {"method": self.method, "n_stories": len(self.story_ids),
                "n_unavailable": int(np.sum(~self.available)), "threshold": self.threshold,
                "error_rate": self.error_rate, "pearson": self.pearson, "spearman": self.spearman,
                "config": self.config}

    def rows(self) -> list:
        out = []
        for i, sid in enumerate(self.story_ids):
            p = self.predicted[i]
            out.append({
                "story_id": sid,
                "predicted_final": None if not np.isfinite(p) else float(p),
                "predicted_class": bool(self.predicted_class[i]),
                "available": bool(self.available[i]),
                "actual_final": None if self.actual is None else float(self.actual[i]),
                "actual_class": None if self.actual is None else bool(self.actual_class[i]),
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["story_id", "predicted_final", "predicted_class", "available", "actual_final", "actual_class"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rows():
            w.writerow({k: "" if v is None else v for k, v in r.items()})
        return buf.getvalue()


def _predict_one(s, g, cfg):
    return predict_story(s, g, cfg)


def predict_corpus(records: Sequence[StoryRecord], g: GlobalParamsV2, config: PredictionConfig,
                   n_jobs: int = 1) -> list:
    if n_jobs == 1:
        return [predict_story(s, g, config) for s in records]
    return Parallel(n_jobs=n_jobs)(delayed(_predict_one)(s, g, config) for s in records)


def evaluate(records: Sequence[StoryRecord], g: GlobalParamsV2, config: PredictionConfig = PredictionConfig(),
             n_jobs: int = 1) -> PredictionReport:
    """Model predictions for ``records`` scored against their known final votes."""
    if not records:
        raise InputError("empty corpus")
    preds = predict_corpus(records, g, config, n_jobs)
    actual = np.array([_actual(s) for s in records], dtype=float)
    name = "equal_r" if config.constrain_equal_r else "distinct_r"
    if config.use_prior:
        name += "_prior"
    return PredictionReport(name, [p.story_id for p in preds], [p.predicted_final for p in preds], actual,
                            config.popularity_threshold, np.array([p.available for p in preds]),
                            config.to_dict())


def evaluate_baseline(calibration: Sequence[StoryRecord], records: Sequence[StoryRecord],
                      config: PredictionConfig = PredictionConfig()) -> PredictionReport:
    if not records:
        raise InputError("empty corpus")
    base = ExtrapolationBaseline(config.vote_window, config.t_final).fit(calibration)
    actual = np.array([_actual(s) for s in records], dtype=float)
    return PredictionReport("extrapolation", [s.story_id for s in records], base.predict(records), actual,
                            config.popularity_threshold, config=config.to_dict())


def comparison_grid(records: Sequence[StoryRecord], g: GlobalParamsV2, windows=(10, 216), t_final: float = 72.0,
                    threshold: int = 500, use_prior: bool = False, calibration_fraction: float = 1 / 3,
                    seed: int = 0, n_jobs: int = 1) -> dict:
    """Error rates of (distinct r, equal r, extrapolation) for each window.

    One seeded split is shared by all windows; each window is scored on the
    evaluation stories with at least that many votes.
    """
    calib, test = split_corpus(records, calibration_fraction, seed)
    grid = {}
    for w in windows:
        cal_w = [s for s in calib if s.n_votes >= w]
        test_w = [s for s in test if s.n_votes >= w]
        if len(cal_w) < 2 or not test_w:
            raise InputError(f"not enough stories with at least {w} votes")
        base = PredictionConfig(w, t_final, threshold, use_prior)
        equal = PredictionConfig(w, t_final, threshold, use_prior, constrain_equal_r=True)
        grid[w] = {
            "distinct_r": evaluate(test_w, g, base, n_jobs),
            "equal_r": evaluate(test_w, g, equal, n_jobs),
            "extrapolation": evaluate_baseline(cal_w, test_w, base),
        }
    return grid


def compare_error_rates(better: PredictionReport, worse: PredictionReport, n_boot: int = 2000, seed: int = 0):
    """Paired bootstrap: observed error-rate gap ``worse - better`` and its one-sided p-value."""
    if better.story_ids != worse.story_ids:
        raise InputError("reports must cover the same stories in the same order")
    eb = better.errors.astype(float)
    ew = worse.errors.astype(float)
    return paired_bootstrap(lambda idx: ew[idx].mean() - eb[idx].mean(), eb.size, n_boot, seed)


def compare_spearman(better: PredictionReport, worse: PredictionReport, n_boot: int = 2000, seed: int = 0):
    """Paired bootstrap on the Spearman correlation gap ``better - worse``."""
    if better.story_ids != worse.story_ids:
        raise InputError("reports must cover the same stories in the same order")
    ok = better._ok() & worse._ok()
    pb, pw, act = better.predicted[ok], worse.predicted[ok], better.actual[ok]

    def stat(idx):
        a = safe_corr(spearman, pb[idx], act[idx])
        b = safe_corr(spearman, pw[idx], act[idx])
        return math.nan if a is None or b is None else a - b

    return paired_bootstrap(stat, pb.size, n_boot, seed)


# -- niche interest ----------------------------------------------------------------


@dataclass
class FanFractionCurve:
    fan_votes: np.ndarray  # number of fan votes among the first k votes
    mean_final: np.ndarray
    count: np.ndarray
    corr_interest_ratio: Optional[float]
    corr_vote_ratio: Optional[float]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("fan_votes,mean_final,count\n")
        for k, m, c in zip(self.fan_votes, self.mean_final, self.count):
            buf.write(f"{int(k)},{m:.6g},{int(c)}\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"fan_votes": self.fan_votes.tolist(), "mean_final": self.mean_final.tolist(),
                "count": self.count.tolist(), "corr_final_rN_over_rF": self.corr_interest_ratio,
                "corr_final_vN_over_vF": self.corr_vote_ratio}


def early_fan_fraction_curve(records: Sequence[StoryRecord], g: Optional[GlobalParamsV2] = None,
                             k: int = 10, interest: Optional[Sequence] = None,
                             corr=pearson, min_count: int = 1) -> FanFractionCurve:
    """Mean final votes by the number of fan votes among the first ``k``.

    Adjacent buckets are pooled, from the high end down, until each holds at
    least ``min_count`` stories; a pooled bucket is labelled by its smallest
    fan count.

    Also correlates final votes with ``r_N / r_F`` and with ``v_N / v_F`` over
    stories where both ratios are finite and positive. ``interest`` may give
    per-story ``(r_fan, r_nonfan)``; otherwise they are fitted on all observed
    votes with ``g``.
    """
    records = list(records)
    if not records:
        raise InputError("empty corpus")
    final = np.array([_actual(s) for s in records], dtype=float)
    early = np.array([int(s.truncate(k).fan_mask.sum()) for s in records])
    # buckets labelled by their smallest fan count, merged from the top until each holds min_count
    values, sizes = np.unique(early, return_counts=True)
    labels, acc = [], 0
    for v, n in zip(values[::-1], sizes[::-1]):
        acc += n
        if acc >= min_count:
            labels.append(v)
            acc = 0
    if acc or not labels:
        if labels:
            labels.pop()
        labels.append(values[0])
    labels = np.array(sorted(labels))
    bucket = labels[np.searchsorted(labels, early, side="right") - 1]
    ks = labels
    means = np.array([final[bucket == j].mean() for j in ks])
    counts = np.array([np.sum(bucket == j) for j in ks])
    if interest is None:
        if g is None:
            raise InputError("give either global parameters or per-story interestingness")
        interest = [(f["r_fan"], f["r_nonfan"]) for f in (fit_story_interest(s, g) for s in records)]
    rf = np.array([p[0] for p in interest], dtype=float)
    rn = np.array([p[1] for p in interest], dtype=float)
    vf = np.array([s.fan_mask.sum() for s in records], dtype=float)
    vn = np.array([s.n_votes for s in records], dtype=float) - vf
    ok = (rf > 0) & (rn > 0) & (vf > 0) & (vn > 0)
    ci = safe_corr(corr, final[ok], rn[ok] / rf[ok]) if ok.sum() >= 3 else None
    cv = safe_corr(corr, final[ok], vn[ok] / vf[ok]) if ok.sum() >= 3 else None
    return FanFractionCurve(ks, means, counts, ci, cv)
