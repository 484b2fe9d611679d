"""Pipeline configuration and its flat ``key = value`` file format.

Example::

    data.path = synthetic_wind.csv
    wpd.level = 3
    sam.period = 2192
    forecast.horizons = 1, 3, 5
    forecast.windows = 1:3, 3:9, 5:15
    train.learning_rate = 0.0001
    benchmark.models = BiLSTM, WPD-SAM-BiLSTM

Blank lines and ``#`` comments are ignored. Unknown keys are errors. A
relative ``data.path`` is resolved against the config file's directory.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .neural import TrainConfig
from .wavelet import BOUNDARY_MODES

DECOMPOSITIONS = ("", "DWT", "SWT", "WPD", "SAM", "WPD-SAM")
CELLS = ("LSTM", "BiLSTM")
PROPOSED = "WPD-SAM-BiLSTM"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    decomposition: str  # one of DECOMPOSITIONS; "" means no decomposition
    cell: str

    @property
    def name(self) -> str:
        return f"{self.decomposition}-{self.cell}" if self.decomposition else self.cell

    @property
    def wavelet(self) -> str | None:
        d = self.decomposition.split("-")[0]
        return d.lower() if d in ("DWT", "SWT", "WPD") else None

    @property
    def seasonal(self) -> bool:
        return "SAM" in self.decomposition.split("-")

    @property
    def bidirectional(self) -> bool:
        return self.cell == "BiLSTM"


def parse_model(name: str) -> ModelSpec:
    name = name.strip()
    for cell in CELLS:
        if name == cell:
            return ModelSpec("", cell)
        if name.endswith("-" + cell):
            decomp = name[: -len(cell) - 1]
            if decomp in DECOMPOSITIONS:
                return ModelSpec(decomp, cell)
    raise ConfigError(f"unknown model {name!r}; expected [<decomposition>-]<LSTM|BiLSTM> with decomposition in {DECOMPOSITIONS[1:]}")


def all_models() -> tuple[str, ...]:
    return tuple(ModelSpec(d, c).name for d in DECOMPOSITIONS for c in CELLS)


@dataclass(frozen=True)
class PipelineConfig:
    data_path: str = ""
    train_fraction: float = 0.7
    sentinel: float = 999.9
    k_sigma: float = 3.0
    wavelet_order: int = 22
    wpd_level: int = 3
    boundary: str = "symmetric"
    sam_period: int = 2192
    sam_detrend: bool = False
    horizons: tuple[int, ...] = (1, 3, 5)
    windows: dict[int, int] = field(default_factory=lambda: {1: 3, 3: 9, 5: 15})
    train: TrainConfig = field(default_factory=TrainConfig)
    models: tuple[str, ...] = (PROPOSED,)
    seed: int = 0
    causal_mode: bool = False
    walk_forward_stride: int = 1
    walk_forward_retrain_every: int = 0
    walk_forward_max_history: int = 0
    adf_max_lag: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        for h in self.horizons:
            if h < 1:
                raise ConfigError(f"horizons must be positive, got {h}")
            if self.windows.get(h, 0) < 1:
                raise ConfigError(f"horizon {h} has no positive window size")
        if not self.horizons:
            raise ConfigError("at least one horizon is required")
        if self.boundary not in BOUNDARY_MODES:
            raise ConfigError(f"wavelet.boundary must be one of {BOUNDARY_MODES}")
        if self.wpd_level < 1 or self.sam_period < 1 or self.wavelet_order < 1:
            raise ConfigError("wpd.level, sam.period and wavelet.order must be positive")
        if self.walk_forward_stride < 1:
            raise ConfigError("walk_forward.stride must be >= 1")
        if self.workers < 1:
            raise ConfigError("pipeline.workers must be >= 1")
        for m in self.models:
            parse_model(m)

    @property
    def model_specs(self) -> list[ModelSpec]:
        return [parse_model(m) for m in self.models]

    def with_overrides(self, **kw) -> "PipelineConfig":
        return replace(self, **kw)

    def with_train(self, **kw) -> "PipelineConfig":
        return replace(self, train=replace(self.train, **kw))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["windows"] = {str(k): v for k, v in sorted(self.windows.items())}
        d["horizons"] = list(self.horizons)
        d["models"] = list(self.models)
        return d

    def hash(self) -> str:
        """Digest of everything that can change results (worker count excluded)."""
        d = self.to_dict()
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _int_list(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in v.replace(" ", "").split(",") if x)


def _window_map(v: str) -> dict[int, int]:
    out = {}
    for item in v.replace(" ", "").split(","):
        if not item:
            continue
        h, _, w = item.partition(":")
        out[int(h)] = int(w)
    return out


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_int(v: str) -> int | None:
    return None if v.strip().lower() in ("", "auto", "none") else int(v)


# dotted key -> (field name, parser); "train." keys map onto TrainConfig
_KEYS = {
    "data.path": ("data_path", str),
    "data.train_fraction": ("train_fraction", float),
    "clean.sentinel": ("sentinel", float),
    "clean.k_sigma": ("k_sigma", float),
    "wavelet.order": ("wavelet_order", int),
    "wavelet.boundary": ("boundary", str),
    "wpd.level": ("wpd_level", int),
    "sam.period": ("sam_period", int),
    "sam.detrend": ("sam_detrend", _bool),
    "forecast.horizons": ("horizons", _int_list),
    "forecast.windows": ("windows", _window_map),
    "benchmark.models": ("models", lambda v: tuple(x.strip() for x in v.split(",") if x.strip())),
    "seed": ("seed", int),
    "eval.causal_mode": ("causal_mode", _bool),
    "walk_forward.stride": ("walk_forward_stride", int),
    "walk_forward.retrain_every": ("walk_forward_retrain_every", int),
    "walk_forward.max_history": ("walk_forward_max_history", int),
    "adf.max_lag": ("adf_max_lag", _opt_int),
    "pipeline.workers": ("workers", int),
}
_TRAIN_KEYS = {
    "train.epochs": ("epochs", int),
    "train.batch_size": ("batch_size", int),
    "train.learning_rate": ("learning_rate", float),
    "train.dropout": ("dropout", float),
    "train.hidden_units": ("hidden_units", int),
    "train.loss": ("loss", str),
}


def parse_config_text(text: str, base_dir: Path | None = None) -> PipelineConfig:
    top: dict = {}
    train: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key in _KEYS:
            name, conv = _KEYS[key]
            target = top
        elif key in _TRAIN_KEYS:
            name, conv = _TRAIN_KEYS[key]
            target = train
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            target[name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if base_dir is not None and top.get("data_path") and not os.path.isabs(top["data_path"]):
        top["data_path"] = str((base_dir / top["data_path"]).resolve())
    try:
        return PipelineConfig(train=TrainConfig(**train), **top)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, path.parent)


def dump_config(cfg: PipelineConfig) -> str:
    """Inverse of :func:`parse_config_text` (paths are written as stored)."""
    inv = {name: key for key, (name, _) in _KEYS.items()}
    tinv = {name: key for key, (name, _) in _TRAIN_KEYS.items()}
    lines = []
    for f in fields(cfg):
        if f.name == "train":
            continue
        v = getattr(cfg, f.name)
        if f.name == "windows":
            v = ", ".join(f"{h}:{w}" for h, w in sorted(v.items()))
        elif f.name in ("horizons", "models"):
            v = ", ".join(str(x) for x in v)
        elif v is None:
            v = "auto"
        lines.append(f"{inv[f.name]} = {v}")
    for name, key in tinv.items():
        lines.append(f"{key} = {getattr(cfg.train, name)}")
    return "\n".join(lines) + "\n"
