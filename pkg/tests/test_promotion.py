import numpy as np
import pytest

from vote_dynamics.core import StoryParams, StoryRecord, VoteEvent
from vote_dynamics.estimate.promotion import fit_logistic_grouped, fit_promotion, promotion_trials
from vote_dynamics.estimators import PromotionEstimator
from vote_dynamics.params import GlobalParamsV2
from vote_dynamics.simulate import simulate_story, story_rng
from vote_dynamics.visibility import LogisticPromotion, ThresholdPromotion


def _record(n, promoted_after=None, dt=0.1):
    votes = tuple(VoteEvent("s", f"u{i}", i * dt, False) for i in range(n))
    tp = None if promoted_after is None else (promoted_after - 1) * dt
    return StoryRecord("s", votes, promotion_time=tp)


def _corpus(promotion, n, seed):
    g = GlobalParamsV2.reference().with_(promotion=promotion)
    out = []
    for i in range(n):
        rng = story_rng(seed, i)
        p = StoryParams(S=int(rng.integers(0, 60)), r_fan=min(float(np.exp(rng.normal(-1.8, 0.75))), 1.0),
                        r_nonfan=float(np.exp(rng.normal(-4.0, 0.63))))
        out.append(simulate_story(g, p, 30.0, rng, voter_ids=False))
    return out


class TestTrials:
    def test_counts(self):
        v, n, s = promotion_trials([_record(5, promoted_after=4), _record(3)])
        # promoted story: trials at votes 2..4 with success at 4; unpromoted: votes 2..3
        np.testing.assert_array_equal(v, [2, 3, 4])
        np.testing.assert_array_equal(n, [2, 2, 1])
        np.testing.assert_array_equal(s, [0, 0, 1])

    def test_votes_after_lifetime_excluded(self):
        v, n, _ = promotion_trials([_record(30, dt=1.0)], lifetime=24.0)
        assert v.max() == 24


class TestLogisticFit:
    def test_matches_known_mle(self):
        # saturated two-point design: the MLE reproduces the observed proportions
        res = fit_logistic_grouped([0.0, 1.0], [100, 100], [20, 60])
        assert res.converged
        p = 1 / (1 + np.exp(-(res["intercept"] + res["slope"] * np.array([0.0, 1.0]))))
        np.testing.assert_allclose(p, [0.2, 0.6], atol=1e-9)

    def test_recovers_simulated_logistic(self):
        rng = np.random.default_rng(0)
        v = np.arange(2, 80, dtype=float)
        n = np.full(v.size, 400.0)
        s = rng.binomial(400, 1 / (1 + np.exp(-(-5.0 + 0.1 * v)))).astype(float)
        res = fit_logistic_grouped(v, n, s)
        assert res.converged
        assert res["intercept"] == pytest.approx(-5.0, abs=3 * res.stderr[0])
        assert res["slope"] == pytest.approx(0.1, abs=3 * res.stderr[1])

    def test_separation_is_capped(self):
        res = fit_logistic_grouped([2, 3, 4, 5], [10, 10, 10, 10], [0, 0, 10, 10])
        assert not res.converged and "separat" in res.message

    def test_single_outcome(self):
        res = fit_logistic_grouped([2, 3], [5, 5], [0, 0])
        assert not res.converged and res["intercept"] == -np.inf


class TestFitPromotion:
    def test_logistic_round_trip(self):
        records = _corpus(LogisticPromotion(-5.0, 0.1), 300, seed=31)
        model, res = fit_promotion(records)
        assert res.converged
        assert model.intercept == pytest.approx(-5.0, abs=4 * res.stderr[0])
        assert model.slope == pytest.approx(0.1, abs=4 * res.stderr[1])

    def test_threshold_data_flags_separation(self):
        records = _corpus(ThresholdPromotion(40), 200, seed=32)
        model, res = fit_promotion(records)
        assert not res.converged
        # the fitted half-probability vote sits at the threshold
        assert -model.intercept / model.slope == pytest.approx(40, abs=1.0)

    def test_estimator(self):
        est = PromotionEstimator().fit(_corpus(LogisticPromotion(-5.0, 0.1), 120, seed=33))
        assert est.predict_proba(1) == 0.0
        assert 0 < est.predict_proba(50) < 1
