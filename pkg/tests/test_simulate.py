import numpy as np
import pytest

from vote_dynamics.core import InputError, StoryParams, TimeUnit
from vote_dynamics.params import GlobalParamsV1, GlobalParamsV2
from vote_dynamics.simulate import (PopulationModel, SimConfig, make_corpus, simulate_population_activity,
                                    simulate_story, simulate_story_v1, story_rng)
from vote_dynamics.visibility import ThresholdPromotion


class TestSimulateStory:
    def test_submitter_vote_first(self, rng):
        rec = simulate_story(GlobalParamsV2.reference(), StoryParams(S=5, r_fan=0.2, r_nonfan=0.01), 72.0, rng)
        assert rec.times[0] == 0.0 and not rec.votes[0].is_fan
        assert rec.time_unit == TimeUnit.DIGG
        assert rec.final_votes == rec.n_votes
        assert np.all(np.diff(rec.times) >= 0) and rec.times[-1] < 72.0

    def test_no_fans_means_no_fan_votes_without_conversion(self, rng):
        g = GlobalParamsV2.reference().with_(rho=1e-12)
        rec = simulate_story(g, StoryParams(S=0, r_fan=0.9, r_nonfan=0.02), 72.0, rng)
        assert not rec.fan_mask.any()

    def test_threshold_promotion_at_h(self, rng):
        g = GlobalParamsV2.reference().with_(promotion=ThresholdPromotion(15))
        rec = simulate_story(g, StoryParams(S=50, r_fan=0.3, r_nonfan=0.02), 72.0, rng)
        if rec.promoted:
            assert rec.votes_at_promotion() == 15

    def test_fan_vote_total_matches_expectation(self):
        # no non-fan exposure and negligible conversion: fan votes ~ Binomial(S, r_F (1 - e^{-omega T}))
        g = GlobalParamsV2.reference().with_(rho=1e-12, c=1e-12, promotion=ThresholdPromotion(100_000))
        story = StoryParams(S=100, r_fan=0.3, r_nonfan=1e-9)
        fans = [simulate_story(g, story, 10.0, story_rng(5, i), voter_ids=False).fan_mask.sum()
                for i in range(400)]
        p = 0.3 * (1 - np.exp(-g.omega * 10.0))
        se = np.sqrt(100 * p * (1 - p) / 400)
        assert abs(np.mean(fans) - 100 * p) < 4 * se

    def test_v1_simulator_runs(self, rng):
        rec = simulate_story_v1(GlobalParamsV1.reference(), StoryParams(S=10, r=0.2), 30.0, rng)
        assert rec.n_votes >= 1 and rec.time_unit == TimeUnit.WALL

    def test_rejects_bad_input(self, rng):
        with pytest.raises(InputError):
            simulate_story(GlobalParamsV2.reference(), StoryParams(S=1, r=0.1), 10.0, rng)
        with pytest.raises(InputError):
            simulate_story(GlobalParamsV2.reference(), StoryParams(S=1, r_fan=0.1, r_nonfan=0.1), 0.0, rng)


class TestCorpus:
    def test_deterministic_and_job_independent(self):
        cfg = SimConfig(n_stories=6, seed=42)
        a, ta = make_corpus(cfg)
        b, tb = make_corpus(cfg, n_jobs=2)
        assert [r.times.tolist() for r in a] == [r.times.tolist() for r in b]
        assert ta == tb

    def test_seed_changes_output(self):
        a, _ = make_corpus(SimConfig(n_stories=3, seed=1))
        b, _ = make_corpus(SimConfig(n_stories=3, seed=2))
        assert [r.n_votes for r in a] != [r.n_votes for r in b] or a[0].times.tolist() != b[0].times.tolist()

    def test_config_round_trip(self):
        cfg = SimConfig(n_stories=7, seed=9, horizon=48.0)
        assert SimConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(InputError):
            SimConfig.from_dict({"n_story": 3})

    def test_truth_is_drawn_in_range(self):
        _, truth = make_corpus(SimConfig(n_stories=20, seed=3))
        for p in truth:
            assert 0 < p.r_fan <= 1 and 0 < p.r_nonfan <= 1 and p.S >= 0


class TestPopulationActivity:
    def test_histogram_counts_users(self, rng):
        h = simulate_population_activity(PopulationModel(5000), rng)
        assert h.sum() == 5000

    def test_mean_matches_lognormal(self, rng):
        pop = PopulationModel(200_000, mu_act=-1.0, sigma_act=0.5)
        h = simulate_population_activity(pop, rng, T=2.0)
        mean = (np.arange(h.size) * h).sum() / h.sum()
        assert mean == pytest.approx(2.0 * np.exp(-1.0 + 0.125), rel=0.02)
