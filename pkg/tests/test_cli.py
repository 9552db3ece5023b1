import json
from pathlib import Path

import pytest

from gearena.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def read_bytes(path: Path) -> bytes:
    return path.read_bytes()


@pytest.fixture
def pgg_config(tmp_path):
    doc = {"game": "pgg", "n": 4, "rounds": 4, "sequence": "GE", "r": 1.5, "seed": 5}
    path = tmp_path / "pgg.json"
    path.write_text(json.dumps(doc))
    return path


class TestSimulate:
    def test_writes_logs_and_manifest(self, tmp_path, pgg_config):
        out = tmp_path / "run"
        assert main(["simulate", "--config", str(pgg_config), "--reps", "3",
                     "--agents", "cooperator", "--out", str(out)]) == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "log_0.jsonl", "log_1.jsonl", "log_2.jsonl", "manifest.json"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["options"]["reps"] == 3

    def test_same_invocation_is_byte_identical(self, tmp_path, pgg_config):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            main(["simulate", "--config", str(pgg_config), "--reps", "2",
                  "--out", str(out)])
        for name in ("log_0.jsonl", "log_1.jsonl"):
            assert read_bytes(out1 / name) == read_bytes(out2 / name)

    def test_missing_config_fails_cleanly(self, tmp_path, capsys):
        code = main(["simulate", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_example_configs_are_usable(self, tmp_path):
        out = tmp_path / "bcz"
        code = main(["simulate", "--config", str(CONFIG_DIR / "bcz_gee.json"),
                     "--reps", "1", "--out", str(out)])
        assert code == 0
        lines = (out / "log_0.jsonl").read_text().splitlines()
        header = json.loads(lines[0])
        assert header["config"]["sequence"] == "GEE"


class TestMetricsCommand:
    def test_metrics_over_logs(self, tmp_path, pgg_config, capsys):
        run = tmp_path / "run"
        main(["simulate", "--config", str(pgg_config), "--reps", "2",
              "--agents", "cooperator", "--out", str(run)])
        out = tmp_path / "metrics"
        code = main(["metrics", str(run / "log_0.jsonl"), str(run / "log_1.jsonl"),
                     "--u3-mode", "ratio", "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "metrics.json").read_text())
        assert doc["aggregate"]["u1"] == 1.0
        assert doc["aggregate"]["n_logs"] == 2
        assert "u1=1.0" in capsys.readouterr().out

    def test_per_round_mode(self, tmp_path, pgg_config, capsys):
        run = tmp_path / "run"
        main(["simulate", "--config", str(pgg_config), "--out", str(run)])
        code = main(["metrics", str(run / "log_0.jsonl"), "--u3-mode", "per-round"])
        assert code == 0
        assert "per-round" in capsys.readouterr().out


class TestSolveCommand:
    def test_pgg_optimum_to_stdout(self, capsys):
        assert main(["solve", "pgg-optimum", "--n", "5", "--r", "1.5"]) == 0
        doc = json.loads(capsys.readouterr().out.strip().splitlines()[0])
        assert doc["total"] == pytest.approx(2.5)

    def test_nash_with_complete_graph(self, tmp_path, capsys):
        config = tmp_path / "bcz.json"
        config.write_text(json.dumps({"game": "bcz", "n": 3, "rounds": 1,
                                      "alpha": [1, 1, 1], "delta": 0.05, "cost": 0.2,
                                      "seed": 0}))
        assert main(["solve", "nash", "--config", str(config),
                     "--graph", "complete"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["converged"]

    def test_solution_file_written(self, tmp_path):
        out = tmp_path / "sol"
        assert main(["solve", "pgg-effort", "--size", "2", "--r", "3.5",
                     "--out", str(out)]) == 0
        doc = json.loads((out / "solution.json").read_text())
        assert doc["effort"] == pytest.approx(1 - 2 / 3.5)


class TestTrainCommand:
    def test_train_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "train"
        code = main(["train", "--seed", "3", "--algo", "tompo", "--steps", "6",
                     "--m", "4", "--scenarios", "2", "--rounds", "3",
                     "--n-agents", "5", "--out", str(out)])
        assert code == 0
        assert (out / "params.json").exists()
        trace_lines = (out / "trace.jsonl").read_text().splitlines()
        assert len(trace_lines) == 6
        rollout_lines = (out / "rollouts.jsonl").read_text().splitlines()
        assert len(rollout_lines) == 24
        assert json.loads((out / "manifest.json").read_text())["command"] == "train"


class TestCompareCommand:
    def test_compare_writes_comparison(self, tmp_path, capsys):
        out = tmp_path / "cmp"
        code = main(["compare", "--seed", "41", "--count", "2", "--n-agents", "5",
                     "--steps", "200", "--m", "6", "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "comparison.json").read_text())
        assert len(doc["scenarios"]) == 2
        assert "tompo" in capsys.readouterr().out


class TestPlotDataCommand:
    def test_csv_written(self, tmp_path, pgg_config):
        run = tmp_path / "run"
        main(["simulate", "--config", str(pgg_config), "--out", str(run)])
        out = tmp_path / "plot"
        assert main(["plotdata", str(run / "log_0.jsonl"), "--out", str(out)]) == 0
        lines = (out / "plot.csv").read_text().splitlines()
        assert lines[0].startswith("round,links")

    def test_stdout_mode(self, tmp_path, pgg_config, capsys):
        run = tmp_path / "run"
        main(["simulate", "--config", str(pgg_config), "--out", str(run)])
        capsys.readouterr()
        assert main(["plotdata", str(run / "log_0.jsonl")]) == 0
        assert capsys.readouterr().out.startswith("round,links")


class TestRerun:
    def test_simulate_rerun_byte_identical(self, tmp_path, pgg_config):
        first = tmp_path / "first"
        main(["simulate", "--config", str(pgg_config), "--reps", "2",
              "--agents", "oracle,random", "--out", str(first)])
        second = tmp_path / "second"
        assert main(["rerun", str(first / "manifest.json"), "--out", str(second)]) == 0
        for name in ("log_0.jsonl", "log_1.jsonl", "manifest.json"):
            assert read_bytes(first / name) == read_bytes(second / name)

    def test_train_rerun_byte_identical(self, tmp_path):
        first = tmp_path / "t1"
        main(["train", "--seed", "8", "--steps", "4", "--m", "4", "--scenarios", "1",
              "--rounds", "3", "--n-agents", "4", "--out", str(first)])
        second = tmp_path / "t2"
        main(["rerun", str(first / "manifest.json"), "--out", str(second)])
        for name in ("params.json", "trace.jsonl", "rollouts.jsonl", "memory.json"):
            assert read_bytes(first / name) == read_bytes(second / name)

    def test_metrics_rerun_byte_identical(self, tmp_path, pgg_config):
        run = tmp_path / "run"
        main(["simulate", "--config", str(pgg_config), "--out", str(run)])
        m1, m2 = tmp_path / "m1", tmp_path / "m2"
        main(["metrics", str(run / "log_0.jsonl"), "--out", str(m1)])
        main(["rerun", str(m1 / "manifest.json"), "--out", str(m2)])
        assert read_bytes(m1 / "metrics.json") == read_bytes(m2 / "metrics.json")
