from pathlib import Path

import pytest

from windcast.config import (
    PROPOSED,
    ConfigError,
    ModelSpec,
    PipelineConfig,
    all_models,
    dump_config,
    load_config,
    parse_config_text,
    parse_model,
)
from windcast.synthetic import bundled


class TestModels:
    @pytest.mark.parametrize(
        "name, wavelet, seasonal, bi",
        [
            ("LSTM", None, False, False),
            ("BiLSTM", None, False, True),
            ("SAM-BiLSTM", None, True, True),
            ("DWT-LSTM", "dwt", False, False),
            ("SWT-BiLSTM", "swt", False, True),
            (PROPOSED, "wpd", True, True),
        ],
    )
    def test_parse(self, name, wavelet, seasonal, bi):
        spec = parse_model(name)
        assert (spec.name, spec.wavelet, spec.seasonal, spec.bidirectional) == (name, wavelet, seasonal, bi)

    @pytest.mark.parametrize("name", ["GRU", "EMD-BiLSTM", "WPD-SAM", ""])
    def test_unknown(self, name):
        with pytest.raises(ConfigError):
            parse_model(name)

    def test_matrix_size(self):
        assert len(all_models()) == 12
        assert ModelSpec("", "LSTM").name == "LSTM"


class TestPipelineConfig:
    def test_defaults(self):
        c = PipelineConfig()
        assert (c.train_fraction, c.wavelet_order, c.wpd_level, c.sam_period) == (0.7, 22, 3, 2192)
        assert c.horizons == (1, 3, 5) and c.windows == {1: 3, 3: 9, 5: 15}
        assert c.boundary == "symmetric" and not c.causal_mode

    @pytest.mark.parametrize(
        "kw",
        [
            {"horizons": (1, 2)},
            {"horizons": ()},
            {"horizons": (0,), "windows": {0: 3}},
            {"boundary": "zero"},
            {"wpd_level": 0},
            {"walk_forward_stride": 0},
            {"models": ("TCN",)},
            {"workers": 0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            PipelineConfig(**kw)

    def test_hash_ignores_workers_only(self):
        base = PipelineConfig()
        assert base.hash() == base.with_overrides(workers=4).hash()
        assert base.hash() != base.with_overrides(seed=1).hash()
        assert base.hash() != base.with_train(epochs=5).hash()


class TestFileFormat:
    def test_parse(self, tmp_path):
        text = """
        # comment
        data.path = wind.csv
        wpd.level = 2   # trailing comment
        sam.period = 24
        forecast.horizons = 1, 3
        forecast.windows = 1:4, 3:6
        train.learning_rate = 0.01
        train.hidden_units = 8
        benchmark.models = BiLSTM, WPD-SAM-BiLSTM
        eval.causal_mode = yes
        adf.max_lag = auto
        """
        cfg = parse_config_text(text, tmp_path)
        assert cfg.data_path == str(tmp_path / "wind.csv")
        assert cfg.wpd_level == 2 and cfg.sam_period == 24
        assert cfg.horizons == (1, 3) and cfg.windows == {1: 4, 3: 6}
        assert cfg.train.learning_rate == 0.01 and cfg.train.hidden_units == 8
        assert cfg.models == ("BiLSTM", PROPOSED)
        assert cfg.causal_mode and cfg.adf_max_lag is None

    @pytest.mark.parametrize(
        "text, match",
        [
            ("wpd.depth = 3", "unknown key"),
            ("wpd.level", "expected 'key = value'"),
            ("wpd.level = three", "bad value"),
            ("eval.causal_mode = maybe", "bad value"),
            ("train.loss = huber", "loss"),
            ("forecast.horizons = 1, 7", "window"),
        ],
    )
    def test_errors(self, text, match):
        with pytest.raises(ConfigError, match=match):
            parse_config_text(text)

    def test_absolute_path_kept(self, tmp_path):
        cfg = parse_config_text("data.path = /data/x.csv", tmp_path)
        assert cfg.data_path == "/data/x.csv"

    def test_dump_roundtrip(self):
        cfg = PipelineConfig(data_path="/x.csv", sam_period=24, models=("BiLSTM",), adf_max_lag=5).with_train(epochs=3)
        assert parse_config_text(dump_config(cfg)) == cfg
        plain = PipelineConfig(data_path="/x.csv")
        assert parse_config_text(dump_config(plain)) == plain

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.cfg")

    @pytest.mark.parametrize("name", ["synthetic.cfg", "aljouf.cfg"])
    def test_bundled_configs_load(self, name):
        cfg = load_config(bundled(name))
        assert Path(cfg.data_path).is_absolute()
        assert PROPOSED in cfg.models
