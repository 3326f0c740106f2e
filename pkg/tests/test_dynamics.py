
import numpy as np
import pytest

from vote_dynamics.core import InputError, StoryParams
from vote_dynamics.dynamics import V2State, list_kind_at, promoted_region, solve_v1, solve_v2
from vote_dynamics.params import GlobalParamsV1, GlobalParamsV2
from vote_dynamics.visibility import ListKind, ThresholdPromotion, f_page_scalar


def rk4(rhs, y0, t0, t1, h):
    """Fixed-step classical Runge-Kutta; the final step is shortened to land on t1."""
    y = np.array(y0, dtype=float)
    t = t0
    while t < t1 - 1e-12:
        dt = min(h, t1 - t)
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2, y + dt / 2 * k1)
        k3 = rhs(t + dt / 2, y + dt / 2 * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return y


def v2_rhs(g, story, phase, tp):
    def rhs(t, y):
        vf, vn, F, N = y
        if phase == "upcoming":
            pn = g.c * f_page_scalar(g.k_upcoming * t + 1.0, g.surf_mu, g.surf_lambda)
        elif phase == "front":
            pn = f_page_scalar(g.k_front * (t - tp) + 1.0, g.surf_mu, g.surf_lambda)
        else:
            pn = 0.0
        dvf = g.omega * story.r_fan * F
        dvn = g.omega * story.r_nonfan * pn * N
        dv = dvf + dvn
        return np.array([dvf, dvn, -g.omega * F + g.rho * N * dv, -g.omega * pn * N - g.rho * N * dv])
    return rhs


def v1_rhs(g, r, phase, tp):
    def rhs(t, y):
        n, s = y
        if phase == "upcoming":
            vis = g.c * g.nu * f_page_scalar(g.k_upcoming * t + 1.0, g.surf_mu, g.surf_lambda)
        elif phase == "front":
            vis = g.nu * f_page_scalar(g.k_front * (t - tp) + 1.0, g.surf_mu, g.surf_lambda)
        else:
            vis = 0.0
        dn = r * (vis + g.omega * s)
        return np.array([dn, -g.omega * s + g.a * max(n, 1.0) ** (-g.b) * dn])
    return rhs


class TestSolveV1:
    def test_matches_rk4_oracle(self):
        g = GlobalParamsV1.reference()
        story = StoryParams(S=10, r=0.2)
        traj = solve_v1(g, story, horizon=48.0)
        tp = traj.promotion_time
        assert tp is not None and tp < g.lifetime
        y = rk4(v1_rhs(g, story.r, "upcoming", None), [1.0, 10.0], 0.0, tp, 1e-3)
        assert y[0] == pytest.approx(g.h, rel=1e-5)
        y = rk4(v1_rhs(g, story.r, "front", tp), y, tp, 48.0, 2e-3)
        assert traj.final_votes == pytest.approx(y[0], rel=1e-5)

    def test_unpromoted_story_stops_growing(self):
        g = GlobalParamsV1.reference()
        traj = solve_v1(g, StoryParams(S=0, r=0.001), horizon=60.0)
        assert traj.promotion_time is None
        assert list_kind_at(traj, 30.0) == ListKind.REMOVED
        i = np.searchsorted(traj.t, 30.0)
        assert traj.votes[-1] - traj.votes[i] < 1e-3

    def test_votes_non_decreasing(self):
        traj = solve_v1(GlobalParamsV1.reference(), StoryParams(S=50, r=0.4), horizon=72.0)
        assert np.all(np.diff(traj.votes) >= -1e-9)

    def test_promoted_region_is_monotone_in_S(self):
        g = GlobalParamsV1.reference()
        r_min = promoted_region(g, [0, 20, 100], tol=1e-3)
        assert np.all(np.diff(r_min) <= 1e-3)

    def test_rejects_v2_story(self):
        with pytest.raises(InputError):
            solve_v1(GlobalParamsV1.reference(), StoryParams(S=1, r_fan=0.1, r_nonfan=0.01))


class TestSolveV2:
    @pytest.mark.parametrize("rf,rn,S", [(0.2, 0.02, 30), (0.05, 0.003, 5)])
    def test_matches_rk4_oracle(self, rf, rn, S):
        g = GlobalParamsV2.reference()
        story = StoryParams(S=S, r_fan=rf, r_nonfan=rn)
        traj = solve_v2(g, story, 72.0)
        tp = traj.promotion_time
        y0 = [0.0, 1.0, float(S), float(g.U - S - 1)]
        if tp is None:
            y = rk4(v2_rhs(g, story, "upcoming", None), y0, 0.0, g.lifetime, 2e-3)
            y = rk4(v2_rhs(g, story, "removed", None), y, g.lifetime, 72.0, 2e-2)
        else:
            y = rk4(v2_rhs(g, story, "upcoming", None), y0, 0.0, tp, 2e-3)
            y = rk4(v2_rhs(g, story, "front", tp), y, tp, 72.0, 2e-3)
        np.testing.assert_allclose([traj.v_fan[-1], traj.v_nonfan[-1]], y[:2], rtol=1e-5)

    def test_fan_votes_closed_form_without_conversion(self):
        # with negligible fan conversion and no non-fan exposure, v_F = r_F S (1 - e^{-omega t})
        g = GlobalParamsV2.reference().with_(rho=1e-15, c=1e-12, promotion=ThresholdPromotion(10_000))
        story = StoryParams(S=200, r_fan=0.3, r_nonfan=1e-9)
        traj = solve_v2(g, story, 20.0)
        want = 0.3 * 200 * (1 - np.exp(-g.omega * traj.t))
        np.testing.assert_allclose(traj.v_fan, want, rtol=1e-6, atol=1e-8)

    def test_pool_accounting(self):
        g = GlobalParamsV2.reference()
        traj = solve_v2(g, StoryParams(S=10, r_fan=0.1, r_nonfan=0.01), 72.0)
        assert np.all(traj.fans >= 0) and np.all(np.diff(traj.nonfans) <= 1e-9)
        assert np.all(np.diff(traj.votes) >= -1e-9)

    def test_continuation_from_state(self):
        g = GlobalParamsV2.reference()
        story = StoryParams(S=10, r_fan=0.1, r_nonfan=0.01)
        full = solve_v2(g, story, 72.0)
        t0 = 30.0
        vf, vn, F, N = full.at(t0)
        part = solve_v2(g, story, 72.0, start=V2State(t0, vf, vn, F, N, full.promotion_time))
        assert part.final_votes == pytest.approx(full.final_votes, rel=1e-4)

    def test_horizon_before_start_rejected(self):
        g = GlobalParamsV2.reference()
        with pytest.raises(InputError):
            solve_v2(g, StoryParams(S=1, r_fan=0.1, r_nonfan=0.01), 5.0, start=V2State(6.0, 1, 1, 1, 1))

    def test_csv_export(self):
        traj = solve_v2(GlobalParamsV2.reference(), StoryParams(S=1, r_fan=0.1, r_nonfan=0.01), 10.0, n_samples=5)
        lines = traj.to_csv().strip().splitlines()
        assert lines[0].split(",")[:3] == ["t", "vF", "vN"]
        assert len(lines) >= 6


class TestStructuralCases:
    def test_v1_zero_interest(self):
        g = GlobalParamsV1.reference()
        traj = solve_v1(g, StoryParams(S=25, r=0.0), horizon=30.0)
        np.testing.assert_allclose(traj.votes, 1.0)
        np.testing.assert_allclose(traj.s, 25 * np.exp(-g.omega * traj.t), rtol=1e-6)

    def test_v2_zero_interest(self):
        g = GlobalParamsV2.reference()
        traj = solve_v2(g, StoryParams(S=25, r_fan=0.0, r_nonfan=0.0), 30.0)
        np.testing.assert_allclose(traj.v_fan, 0.0)
        np.testing.assert_allclose(traj.v_nonfan, 1.0)
        np.testing.assert_allclose(traj.fans, 25 * np.exp(-g.omega * traj.t), rtol=1e-6)

    @pytest.mark.parametrize("rf,rn,S", [(0.3, 0.05, 0), (0.1, 0.01, 100), (0.9, 0.001, 400)])
    def test_pools_shrink(self, rf, rn, S):
        g = GlobalParamsV2.reference().with_(rho=1.4e-5)
        traj = solve_v2(g, StoryParams(S=S, r_fan=rf, r_nonfan=rn), 72.0)
        assert np.all(np.diff(traj.nonfans) <= 1e-9)
        assert np.all(np.diff(traj.fans + traj.nonfans) <= 1e-9)
        assert np.all(np.diff(traj.v_fan) >= -1e-9) and np.all(np.diff(traj.v_nonfan) >= -1e-9)
