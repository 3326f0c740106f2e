import numpy as np
import pytest
from scipy import stats as sps

from vote_dynamics.core import InputError
from vote_dynamics.estimate.stats import (error_rate, fit_lognormal, ks_bootstrap_gof, paired_bootstrap,
                                          pearson, permutation_corr_test, safe_corr, spearman)


class TestLognormalFit:
    def test_recovers_parameters(self, rng):
        x = np.exp(rng.normal(-1.8, 0.75, 5000))
        res = fit_lognormal(x)
        assert res["mu"] == pytest.approx(-1.8, abs=0.05)
        assert res["sigma"] == pytest.approx(0.75, abs=0.03)

    def test_degenerate_sample(self):
        res = fit_lognormal([2.0, 2.0, 2.0])
        assert not res.converged and res["sigma"] == 0.0

    def test_rejects_non_positive(self):
        with pytest.raises(InputError):
            fit_lognormal([1.0, 0.0, 2.0])


class TestKsBootstrap:
    def test_correct_family_not_rejected(self, rng):
        x = np.exp(rng.normal(0.0, 1.0, 300))
        assert ks_bootstrap_gof(x, "lognormal", n_boot=300, seed=1) > 0.05

    def test_wrong_family_rejected(self, rng):
        x = rng.uniform(1.0, 2.0, 1000)
        assert ks_bootstrap_gof(x, "lognormal", n_boot=300, seed=1) < 0.01

    def test_refitting_is_calibrated(self):
        # under the null the p-value is roughly uniform; the naive KS test is not
        rng = np.random.default_rng(5)
        ps = [ks_bootstrap_gof(rng.normal(0, 1, 60), "normal", n_boot=200, seed=i) for i in range(40)]
        assert 0.3 < np.mean(ps) < 0.7

    def test_seeded(self, rng):
        x = np.exp(rng.normal(0.0, 1.0, 100))
        assert ks_bootstrap_gof(x, n_boot=200, seed=3) == ks_bootstrap_gof(x, n_boot=200, seed=3)

    def test_validation(self):
        with pytest.raises(InputError):
            ks_bootstrap_gof([1.0, 2.0, 3.0], "gamma")
        with pytest.raises(InputError):
            ks_bootstrap_gof([1.0, 2.0, 3.0], n_boot=10)


class TestCorrelations:
    def test_match_scipy(self, rng):
        x = rng.normal(size=50)
        y = x + rng.normal(size=50)
        y[:5] = y[5]  # ties
        assert pearson(x, y) == pytest.approx(sps.pearsonr(x, y)[0], rel=1e-12)
        assert spearman(x, y) == pytest.approx(sps.spearmanr(x, y)[0], rel=1e-12)

    def test_constant_input(self):
        with pytest.raises(InputError):
            pearson([1, 1, 1], [1, 2, 3])
        assert safe_corr(spearman, [1, 1, 1], [1, 2, 3]) is None

    def test_permutation_p_value(self, rng):
        x = rng.normal(size=40)
        r, p = permutation_corr_test(x, x + 0.2 * rng.normal(size=40), n_perm=999, seed=0)
        assert r > 0.9 and p == pytest.approx(1 / 1000)
        _, p_null = permutation_corr_test(x, rng.normal(size=40), n_perm=999, seed=0)
        assert p_null > 1 / 1000


class TestPairedBootstrap:
    def test_clear_difference(self):
        a = np.r_[np.ones(30), np.zeros(70)]  # 30 % errors
        b = np.r_[np.ones(60), np.zeros(40)]  # 60 % errors
        obs, p = paired_bootstrap(lambda idx: b[idx].mean() - a[idx].mean(), 100, 999, seed=0)
        assert obs == pytest.approx(0.3) and p < 0.01

    def test_no_difference(self):
        a = np.r_[np.ones(30), np.zeros(70)]
        obs, p = paired_bootstrap(lambda idx: a[idx].mean() - a[idx].mean(), 100, 500, seed=0)
        assert obs == 0.0 and p == 1.0

    def test_error_rate(self):
        assert error_rate([True, False, True], [True, True, True]) == pytest.approx(1 / 3)
        with pytest.raises(InputError):
            error_rate([], [])
