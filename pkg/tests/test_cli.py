import json

import pytest

from vote_dynamics.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "sim.json").write_text(json.dumps({"simulation": {"n_stories": 24}}))
    assert main(["simulate", "--config", str(d / "sim.json"), "--seed", "5", "--out", str(d / "c.jsonl")]) == 0
    assert main(["fit", "--input", str(d / "c.jsonl"), "--out", str(d / "fit.json")]) == 0
    return d


class TestSimulate:
    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            assert main(["simulate", "--seed", "3", "--out", str(tmp_path / f"{name}.jsonl"),
                         "--config", str(self._cfg(tmp_path))]) == 0
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert (tmp_path / "a.truth.json").exists()

    def test_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"simulation": {"n_stories": 2}, "seed": 1}))
        assert main(["simulate", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "c.jsonl")]) == 0
        truth = json.loads((tmp_path / "c.truth.json").read_text())
        assert truth["config"]["seed"] == 9

    @staticmethod
    def _cfg(tmp_path):
        p = tmp_path / "sim.json"
        p.write_text(json.dumps({"simulation": {"n_stories": 3}}))
        return p


class TestFit:
    def test_report(self, workdir):
        rep = json.loads((workdir / "fit.json").read_text())
        assert rep["schema"] == "vote-dynamics/fit"
        assert set(rep["visibility_fit"]["parameters"]) == {"c", "surf_mu", "surf_lambda"}
        assert len(rep["stories"]) == 24
        assert "ks_p_value" in rep["interest_distribution"]["r_nonfan"]
        assert rep["global_params"]["rho"] > 0


class TestPredictAndEval:
    def test_predict(self, workdir):
        out = workdir / "pred"
        assert main(["predict", "--input", str(workdir / "c.jsonl"), "--params", str(workdir / "fit.json"),
                     "--out", str(out), "--prior"]) == 0
        rows = json.loads((workdir / "pred.json").read_text())["stories"]
        assert len(rows) == 24
        assert (workdir / "pred.csv").read_text().count("\n") == 25

    def test_eval(self, workdir):
        assert main(["eval", "--input", str(workdir / "c.jsonl"), "--params", str(workdir / "fit.json"),
                     "--out", str(workdir / "ev"), "--window", "10"]) == 0
        rep = json.loads((workdir / "ev.json").read_text())
        assert set(rep["grid"]["10"]) >= {"distinct_r", "equal_r", "extrapolation", "bootstrap"}
        assert (workdir / "ev_fan_fraction.csv").exists()


class TestDiggTime:
    def test_clock_and_apply(self, tmp_path):
        rows = ["story_id,voter_id,timestamp,is_fan"]
        for i in range(40):
            rows.append(f"s{i % 3},u{i},{3600 * 0.25 * i},{'true' if i % 5 == 4 else 'false'}")
        (tmp_path / "v.csv").write_text("\n".join(rows) + "\n")
        assert main(["digg-time", "--input", str(tmp_path / "v.csv"), "--votes-per-digg-hour", "4",
                     "--out", str(tmp_path / "clock.json"), "--apply", str(tmp_path / "v.csv"),
                     "--apply-out", str(tmp_path / "d.jsonl")]) == 0
        clock = json.loads((tmp_path / "clock.json").read_text())
        assert clock["schema"] == "vote-dynamics/clock"
        header = json.loads((tmp_path / "d.jsonl").read_text().splitlines()[0])
        assert header["time_unit"] == "digg"


class TestExitCodes:
    def test_missing_params(self, workdir):
        assert main(["predict", "--input", str(workdir / "c.jsonl")]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["fit", "--input", str(tmp_path / "nope.jsonl")]) == 2

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"windw": 10}))
        assert main(["predict", "--config", str(cfg)]) == 2

    def test_wall_time_input_needs_clock(self, tmp_path, workdir):
        (tmp_path / "v.csv").write_text("story_id,voter_id,timestamp,is_fan\ns,a,0,false\ns,b,60,false\n")
        assert main(["predict", "--input", str(tmp_path / "v.csv"), "--params", str(workdir / "fit.json")]) == 2

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["launch"])
        assert exc.value.code == 2

    def test_numerical_failure(self, monkeypatch, workdir):
        from vote_dynamics import cli
        from vote_dynamics.dynamics import IntegrationError

        def boom(*a, **k):
            raise IntegrationError("stiff")
        monkeypatch.setattr(cli, "predict_corpus", boom)
        assert main(["predict", "--input", str(workdir / "c.jsonl"), "--params", str(workdir / "fit.json"),
                     "--out", str(workdir / "p2")]) == 3
