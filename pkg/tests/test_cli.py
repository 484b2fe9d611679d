import json
import subprocess
import sys

import numpy as np
import pytest

from windcast.cli import main
from windcast.ingest import load_clean
from windcast.stats import adf_test
from windcast.synthetic import synthetic_wind


@pytest.fixture
def tiny_cfg(tmp_path, series_csv):
    data = series_csv(synthetic_wind(1000, seed=3), "wind.csv")
    path = tmp_path / "tiny.cfg"
    path.write_text(
        "\n".join(
            [
                f"data.path = {data.name}",
                "sam.period = 24",
                "forecast.horizons = 1, 3",
                "forecast.windows = 1:3, 3:9",
                "train.epochs = 1",
                "train.batch_size = 64",
                "train.learning_rate = 0.01",
                "train.hidden_units = 4",
                "benchmark.models = BiLSTM, WPD-SAM-BiLSTM",
            ]
        )
        + "\n"
    )
    return path


class TestUsage:
    def test_no_arguments(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [["bogus"], ["adf", "--frobnicate"], ["benchmark", "--mode", "sideways"]])
    def test_bad_invocation(self, argv, capsys):
        assert main(argv) == 1
        assert "usage" in capsys.readouterr().err

    def test_pipeline_command_needs_config(self, capsys):
        assert main(["benchmark"]) == 1
        assert "--config" in capsys.readouterr().err

    def test_runtime_error(self, tmp_path, capsys):
        assert main(["ingest", str(tmp_path / "missing.csv")]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("wpd.depth = 3\n")
        assert main(["benchmark", "--config", str(cfg)]) == 1

    def test_console_script(self):
        out = subprocess.run([sys.executable, "-m", "windcast.cli"], capture_output=True, text=True)
        assert out.returncode == 1 and "usage" in out.stderr


class TestStages:
    def test_ingest_matches_library(self, synthetic_path, tmp_path, capsys):
        assert main(["ingest", str(synthetic_path), "--out", str(tmp_path)]) == 0
        printed = json.loads(capsys.readouterr().out)
        _, report = load_clean(synthetic_path)
        assert printed == json.loads(report.to_json())
        assert (tmp_path / "cleaned.csv").exists()

    def test_adf_white_noise(self, white_noise_path, capsys):
        assert main(["adf", str(white_noise_path)]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert "1%" in printed["reject_at"]
        series, _ = load_clean(white_noise_path)
        assert printed["t_statistic"] == adf_test(series.values).t_statistic

    def test_quiet(self, white_noise_path, capsys):
        assert main(["adf", str(white_noise_path), "--quiet"]) == 0
        assert capsys.readouterr().out == ""

    def test_decompose(self, synthetic_path, tmp_path):
        assert main(["decompose", str(synthetic_path), "--out", str(tmp_path), "--quiet"]) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["wavelet"] == "db22" and len(manifest["leaves"]) == 8
        total = sum(np.loadtxt(tmp_path / leaf["file"], delimiter=",", skiprows=1, usecols=1) for leaf in manifest["leaves"])
        series, _ = load_clean(synthetic_path)
        np.testing.assert_allclose(total, series.values, atol=1e-8)

    def test_selftest(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 6 and "FAIL" not in out


class TestRuns:
    def test_benchmark_deterministic(self, tiny_cfg, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["benchmark", "--config", str(tiny_cfg), "--seed", "7", "--out", str(a), "--quiet"]) == 0
        assert main(["benchmark", "--config", str(tiny_cfg), "--seed", "7", "--out", str(b), "--quiet"]) == 0
        assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()
        doc = json.loads((a / "report.json").read_text())
        assert doc["config"]["seed"] == 7 and doc["mode"] == "segment"

    def test_seed_override_changes_results(self, tiny_cfg, tmp_path):
        main(["benchmark", "--config", str(tiny_cfg), "--seed", "1", "--out", str(tmp_path / "s1"), "--quiet"])
        main(["benchmark", "--config", str(tiny_cfg), "--seed", "2", "--out", str(tmp_path / "s2"), "--quiet"])
        assert (tmp_path / "s1" / "report.csv").read_text() != (tmp_path / "s2" / "report.csv").read_text()

    def test_train_then_evaluate(self, tiny_cfg, tmp_path):
        out = tmp_path / "run"
        assert main(["train", "--config", str(tiny_cfg), "--out", str(out), "--quiet"]) == 0
        assert (out / "models" / "manifest.json").exists()
        trained = (out / "report.csv").read_text()
        assert main(["evaluate", "--config", str(tiny_cfg), "--out", str(out), "--quiet"]) == 0
        assert (out / "report.csv").read_text() == trained

    def test_causal_mode_flag(self, tiny_cfg, tmp_path):
        out = tmp_path / "causal"
        assert main(["benchmark", "--config", str(tiny_cfg), "--mode", "causal", "--out", str(out), "--quiet"]) == 0
        assert json.loads((out / "report.json").read_text())["mode"] == "causal"
