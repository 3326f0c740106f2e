import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vote_dynamics import (ActivityClock, InputError, StoryParams, StoryRecord, TimeUnit, VoteEvent,
                           build_activity_clock, story_to_digg_time)


def _votes(times, fans=None, sid="s"):
    fans = fans or [False] * len(times)
    return tuple(VoteEvent(sid, f"u{i}", t, f) for i, (t, f) in enumerate(zip(times, fans)))


class TestStoryRecord:
    def test_votes_are_sorted(self):
        rec = StoryRecord("s", _votes([0.0, 2.0, 1.0]))
        np.testing.assert_array_equal(rec.times, [0.0, 1.0, 2.0])
        assert rec.n_votes == 3

    def test_empty_story_rejected(self):
        with pytest.raises(InputError):
            StoryRecord("s", ())

    def test_submitter_vote_cannot_be_fan(self):
        with pytest.raises(InputError):
            StoryRecord("s", _votes([0.0, 1.0], [True, False]))

    def test_promotion_before_first_vote_rejected(self):
        with pytest.raises(InputError):
            StoryRecord("s", _votes([1.0, 2.0]), promotion_time=0.5)

    def test_votes_at_promotion_and_truncate(self):
        rec = StoryRecord("s", _votes([0.0, 1.0, 2.0, 3.0]), promotion_time=2.0, final_votes=4)
        assert rec.promoted
        assert rec.votes_at_promotion() == 3
        short = rec.truncate(2)
        assert short.n_votes == 2


class TestStoryParams:
    def test_needs_some_interest(self):
        with pytest.raises(InputError):
            StoryParams(S=3)

    def test_probability_bounds(self):
        with pytest.raises(InputError):
            StoryParams(S=1, r=1.5)

    def test_to_dict(self):
        assert StoryParams(S=2, r_fan=0.1, r_nonfan=0.01).to_dict() == {"S": 2, "r_fan": 0.1, "r_nonfan": 0.01}


class TestActivityClock:
    def test_uniform_activity_is_linear(self):
        ts = np.arange(0.0, 10.01, 0.001)  # 1000 events per hour
        clock = build_activity_clock(ts, votes_per_digg_hour=1000.0)
        np.testing.assert_allclose(clock.to_digg_time([0.0, 2.5, 10.0]), [0.0, 2.5, 10.0], atol=1e-6)

    def test_busy_hours_stretch_digg_time(self):
        clock = ActivityClock.from_counts([0.0, 1.0, 2.0], [100.0, 300.0], votes_per_digg_hour=200.0)
        assert clock.to_digg_time(1.0) == pytest.approx(0.5)
        assert clock.to_digg_time(2.0) == pytest.approx(2.0)

    def test_requires_sorted_times(self):
        with pytest.raises(InputError):
            build_activity_clock([0.0, 2.0, 1.0])

    def test_dict_round_trip(self):
        clock = ActivityClock.from_counts([0, 1, 3], [10, 20], 5.0)
        again = ActivityClock.from_dict(clock.to_dict())
        np.testing.assert_allclose(again.to_digg_time([0.5, 2.0, 5.0]), clock.to_digg_time([0.5, 2.0, 5.0]))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0.0, 50.0), min_size=2, max_size=40),
           st.lists(st.floats(-10.0, 70.0), min_size=1, max_size=20))
    def test_round_trip_and_monotone(self, counts, walls):
        counts = np.asarray(counts) + 0.5
        edges = np.arange(counts.size + 1, dtype=float)
        clock = ActivityClock.from_counts(edges, counts, 3.0)
        w = np.sort(np.asarray(walls))
        d = clock.to_digg_time(w)
        assert np.all(np.diff(d) >= -1e-12)
        np.testing.assert_allclose(clock.from_digg_time(d), w, atol=1e-8)

    def test_story_conversion(self):
        clock = ActivityClock.from_counts([0.0, 10.0, 20.0], [1000.0, 4000.0], 500.0)
        rec = StoryRecord("s", _votes([0.0, 5.0, 15.0]), submission_time=5.0, promotion_time=5.0,
                          time_unit=TimeUnit.WALL)
        d = story_to_digg_time(rec, clock)
        assert d.time_unit == TimeUnit.DIGG
        np.testing.assert_allclose(d.times, [0.0, 1.0, 9.0])  # vote times are relative to submission
        assert d.promotion_time == pytest.approx(1.0)
