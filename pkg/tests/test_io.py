import json

import numpy as np
import pytest

from vote_dynamics import io
from vote_dynamics.core import ActivityClock, InputError, TimeUnit


class TestCorpusRoundTrip:
    def test_jsonl(self, tmp_path, small_corpus):
        _, records, truth = small_corpus
        path = tmp_path / "c.jsonl"
        io.write_corpus(path, records)
        again = io.read_corpus(path)
        assert [r.story_id for r in again] == [r.story_id for r in records]
        for a, b in zip(records, again):
            np.testing.assert_array_equal(a.times, b.times)
            np.testing.assert_array_equal(a.fan_mask, b.fan_mask)
            assert (a.promotion_time, a.final_votes, a.submitter_fans) == (b.promotion_time, b.final_votes,
                                                                           b.submitter_fans)

    def test_truth(self, tmp_path, small_corpus):
        cfg, records, truth = small_corpus
        path = tmp_path / "t.json"
        io.write_truth(path, records, truth, cfg.to_dict())
        got = io.read_truth(path)
        assert got[records[0].story_id] == truth[0]

    def test_clock(self, tmp_path):
        clock = ActivityClock.from_counts([0.0, 1.0, 2.0], [10.0, 30.0], 20.0)
        io.write_clock(tmp_path / "k.json", clock)
        again = io.read_clock(tmp_path / "k.json")
        np.testing.assert_allclose(again.to_digg_time([0.5, 1.5]), clock.to_digg_time([0.5, 1.5]))

    def test_nan_and_inf_become_null(self, tmp_path):
        io.write_json(tmp_path / "x.json", {"a": float("nan"), "b": np.float64(np.inf), "c": np.arange(2)})
        assert json.loads((tmp_path / "x.json").read_text()) == {"a": None, "b": None, "c": [0, 1]}


class TestCsvInput:
    def _write(self, tmp_path):
        (tmp_path / "votes.csv").write_text(
            "story_id,voter_id,timestamp\n"
            "s1,alice,2006-06-01T00:00:00Z\n"
            "s1,bob,2006-06-01T01:00:00Z\n"
            "s1,carol,2006-06-01T01:30:00Z\n"
            "s2,dave,2006-06-01T02:00:00Z\n")
        (tmp_path / "fans.csv").write_text("fan_id,friend_id\nbob,alice\ncarol,zed\n")
        (tmp_path / "stories.csv").write_text("story_id,submitter_fans,final_votes\ns1,1,3\ns2,0,1\n")

    def test_fan_labels_from_graph(self, tmp_path):
        self._write(tmp_path)
        recs = io.read_corpus(tmp_path / "votes.csv", tmp_path / "fans.csv", tmp_path / "stories.csv")
        s1 = recs[0]
        assert s1.time_unit == TimeUnit.WALL
        assert s1.fan_mask.tolist() == [False, True, False]
        np.testing.assert_allclose(s1.times, [0.0, 1.0, 1.5])
        assert s1.submitter_fans == 1 and s1.final_votes == 3

    def test_missing_fan_information(self, tmp_path):
        self._write(tmp_path)
        with pytest.raises(InputError):
            io.read_corpus(tmp_path / "votes.csv")

    def test_event_times(self, tmp_path):
        self._write(tmp_path)
        ts = io.read_event_times(tmp_path / "votes.csv")
        assert np.all(np.diff(ts) >= 0) and ts.size == 4
        assert ts[1] - ts[0] == pytest.approx(1.0)

    def test_timestamp_formats(self):
        assert io.parse_timestamp(7200) == 2.0
        assert io.parse_timestamp("1970-01-01T03:00:00") == 3.0
        with pytest.raises(InputError):
            io.parse_timestamp("yesterday")


class TestValidation:
    def test_wrong_schema(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"schema": "something/else", "version": 1}\n')
        with pytest.raises(InputError):
            io.read_corpus(p)

    def test_unknown_story_field(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"type": "story", "story_id": "a", "colour": "red"}\n'
                     '{"type": "vote", "story_id": "a", "voter_id": "u", "time": 0, "is_fan": false}\n')
        with pytest.raises(InputError):
            io.read_corpus(p)

    def test_bad_json_line(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text("{not json}\n")
        with pytest.raises(InputError):
            io.read_corpus(p)

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        io.atomic_write(tmp_path / "out.txt", "hello")
        assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]
