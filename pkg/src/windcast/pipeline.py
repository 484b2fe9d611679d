"""End-to-end hybrid forecasting runs and the benchmark matrix.

A run prepares the data once (clean, ADF, split, train-fitted Z-score) and
then, per model entry, decomposes the train and test segments separately,
optionally removes train-fitted seasonal indices from every component, trains
one direct forecaster per (component, horizon), and sums the reseasonalised
component forecasts back into a forecast in original units.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import __version__
from .config import PROPOSED, ModelSpec, PipelineConfig, parse_model
from .ingest import CleanReport, Normalizer, TimeSeries, load_clean, split_index, zscore_fit
from .neural import RecurrentModel, TrainConfig, predict, train, window_supervise
from .seasonal import SeasonalModel, sam_deseasonalize, sam_fit, sam_reseasonalize
from .stats import AdfResult, EvalReport, adf_test, score, summarize
from .wavelet import daubechies_filters, decompose

log = logging.getLogger(__name__)

RECONSTRUCTION_TOL = 1e-8


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class Prepared:
    series: TimeSeries  # cleaned and filled, original units
    clean_report: CleanReport
    adf: AdfResult | None
    n_train: int
    normalizer: Normalizer
    train_z: np.ndarray
    test_z: np.ndarray

    @property
    def n_total(self) -> int:
        return len(self.series)

    @property
    def n_test(self) -> int:
        return self.n_total - self.n_train

    @property
    def full_z(self) -> np.ndarray:
        return np.concatenate([self.train_z, self.test_z])


@dataclass
class FittedEntry:
    spec: ModelSpec
    seasonal: list[SeasonalModel] | None
    models: dict[tuple[int, int], object]
    histories: dict[tuple[int, int], list[float]] = field(default_factory=dict)
    n_components: int = 1


@dataclass
class EntryResult:
    fitted: FittedEntry | None
    # horizon -> (absolute target slots, forecasts in original units)
    forecasts: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    error: str | None = None


@dataclass
class RunArtifacts:
    config: PipelineConfig
    prepared: Prepared
    entries: dict[str, EntryResult]
    report: EvalReport
    mode: str
    provenance: dict

    @property
    def clean_report(self) -> CleanReport:
        return self.prepared.clean_report

    @property
    def adf(self) -> AdfResult | None:
        return self.prepared.adf

    @property
    def normalizer(self) -> Normalizer:
        return self.prepared.normalizer

    def primary_model(self) -> str:
        ok = sorted(n for n, e in self.entries.items() if e.error is None)
        return PROPOSED if PROPOSED in ok else (ok[0] if ok else sorted(self.entries)[0])


def _stage(name: str):
    def wrap(fn):
        def inner(*a, **kw):
            try:
                return fn(*a, **kw)
            except PipelineError:
                raise
            except Exception as exc:  # noqa: BLE001 - re-raised with the stage name attached
                raise PipelineError(name, f"{type(exc).__name__}: {exc}") from exc

        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner

    return wrap


@_stage("prepare")
def prepare(config: PipelineConfig, run_adf: bool = True) -> Prepared:
    """Ingest, clean and fill, ADF gate, split, and train-only Z-score.

    Outlier statistics are computed on the training slots only, so test values
    cannot change any fitted artifact.
    """
    if not config.data_path:
        raise ValueError("data.path is not set")
    series, report = load_clean(
        config.data_path, sentinel=config.sentinel, k_sigma=config.k_sigma, train_fraction=config.train_fraction
    )
    adf = None
    if run_adf:
        adf = adf_test(series.values, max_lag=config.adf_max_lag)
        if not adf.stationary:
            log.warning("ADF does not reject a unit root at 5%% (t=%.3f); continuing", adf.t_statistic)
    if len(series) < 10:
        raise ValueError(f"series too short to split (n={len(series)})")
    n_train = split_index(len(series), config.train_fraction)
    norm = zscore_fit(series.values[:n_train])
    z = norm.apply(series.values)
    return Prepared(series, report, adf, n_train, norm, z[:n_train].copy(), z[n_train:].copy())


def decompose_segment(values: np.ndarray, spec: ModelSpec, config: PipelineConfig) -> np.ndarray:
    """Components of one segment, shape (k, len(values)); they sum to ``values``."""
    method = spec.wavelet
    if method is None:
        return np.asarray(values, dtype=float)[None, :]
    filters = daubechies_filters(config.wavelet_order)
    comps = decompose(values, method, config.wpd_level, filters, config.boundary).subseries
    resid = np.max(np.abs(comps.sum(axis=0) - values)) / max(1.0, float(np.max(np.abs(values))))
    if resid > RECONSTRUCTION_TOL:
        raise PipelineError("decompose", f"{method} components do not sum to the segment (residual {resid:.2e})")
    return comps


def task_seed(master: int, component: int, horizon: int, *extra: int) -> int:
    """Independent per-task seed from (master seed, component index, horizon, ...)."""
    entropy = [int(master) & 0xFFFFFFFFFFFFFFFF, int(component), int(horizon), *(int(e) for e in extra)]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def _train_task(args):
    inputs, targets, window, horizon, cfg = args
    from .neural import WindowDataset

    model, history = train(WindowDataset(inputs, targets, window, horizon), cfg)
    return model, history


def resolve_workers(config: PipelineConfig, workers: int | None = None) -> int:
    """Requested worker count, capped by ``WINDCAST_WORKERS`` when set."""
    n = workers if workers is not None else config.workers
    env = os.environ.get("WINDCAST_WORKERS")
    if env:
        n = min(n, int(env))
    return max(1, n)


Trainer = Callable[[object, TrainConfig], object]


def _components(prep: Prepared, spec: ModelSpec, config: PipelineConfig, seasonal: list[SeasonalModel] | None):
    train_c = decompose_segment(prep.train_z, spec, config)
    test_c = decompose_segment(prep.test_z, spec, config)
    if seasonal is not None:
        train_c = np.stack([sam_deseasonalize(c, m, 0) for c, m in zip(train_c, seasonal)])
        test_c = np.stack([sam_deseasonalize(c, m, prep.n_train) for c, m in zip(test_c, seasonal)])
    return train_c, test_c


@_stage("fit")
def fit_entry(
    prep: Prepared,
    spec: ModelSpec,
    config: PipelineConfig,
    workers: int = 1,
    trainer: Trainer | None = None,
) -> FittedEntry:
    """Fit seasonal indices and one forecaster per (component, horizon) on train data."""
    raw_train = decompose_segment(prep.train_z, spec, config)
    seasonal = None
    if spec.seasonal:
        seasonal = [sam_fit(c, config.sam_period, origin=0, detrend=config.sam_detrend) for c in raw_train]
        train_c = np.stack([sam_deseasonalize(c, m, 0) for c, m in zip(raw_train, seasonal)])
    else:
        train_c = raw_train
    keys, tasks = [], []
    for ci, comp in enumerate(train_c):
        for h in config.horizons:
            ds = window_supervise(comp, config.windows[h], h)
            cfg = replace(config.train, seed=task_seed(config.seed, ci, h), bidirectional=spec.bidirectional)
            keys.append((ci, h))
            tasks.append((ds.inputs, ds.targets, ds.window, ds.horizon, cfg))
    models: dict[tuple[int, int], object] = {}
    histories: dict[tuple[int, int], list[float]] = {}
    if trainer is not None:
        from .neural import WindowDataset

        for key, (x, y, w, h, cfg) in zip(keys, tasks):
            models[key] = trainer(WindowDataset(x, y, w, h), cfg)
    elif workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            for key, (m, hist) in zip(keys, pool.map(_train_task, tasks)):
                models[key], histories[key] = m, hist
    else:
        for key, task in zip(keys, tasks):
            models[key], histories[key] = _train_task(task)
    return FittedEntry(spec, seasonal, models, histories, len(train_c))


def _predict(model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, RecurrentModel):
        return predict(model, X)
    return np.asarray(model.predict(X), dtype=float)


@_stage("forecast")
def forecast_segment(prep: Prepared, fitted: FittedEntry, config: PipelineConfig) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Forecast every test slot for every horizon (segment mode).

    Each component's first test windows are seeded with the last ``W + h - 1``
    train values of that component so the forecasts cover the whole test
    segment.
    """
    train_c, test_c = _components(prep, fitted.spec, config, fitted.seasonal)
    if train_c.shape[0] != fitted.n_components:
        raise PipelineError("forecast", "component count differs from the fitted entry")
    n_test, n_train = prep.n_test, prep.n_train
    slots = np.arange(n_train, n_train + n_test)
    out = {}
    for h in config.horizons:
        W = config.windows[h]
        lead = W + h - 1
        total = np.zeros(n_test)
        for ci in range(fitted.n_components):
            combined = np.concatenate([train_c[ci, n_train - lead :], test_c[ci]])
            X = sliding_window_view(combined, W)[:n_test]
            pred = _predict(fitted.models[(ci, h)], X)
            if len(pred) != n_test:
                raise PipelineError("aggregate", f"component {ci} produced {len(pred)} forecasts for {n_test} slots")
            if fitted.seasonal is not None:
                pred = sam_reseasonalize(pred, fitted.seasonal[ci], n_train)
            total += pred
        out[h] = (slots, prep.normalizer.invert(total))
    return out


def _score_entry(name: str, prep: Prepared, forecasts: dict[int, tuple[np.ndarray, np.ndarray]]):
    rows = []
    for h, (slots, pred) in sorted(forecasts.items()):
        rows.append(score(name, h, prep.series.values[slots], pred))
    return rows


def _failed_rows(name: str, horizons) -> list:
    from .stats import EvalRow

    return [EvalRow(name, h, float("nan"), float("nan"), float("nan")) for h in horizons]


def _provenance(config: PipelineConfig, mode: str, workers: int) -> dict:
    data_hash = None
    if config.data_path and Path(config.data_path).is_file():
        data_hash = hashlib.sha256(Path(config.data_path).read_bytes()).hexdigest()
    return {
        "config_hash": config.hash(),
        "seed": config.seed,
        "data_sha256": data_hash,
        "mode": mode,
        "workers": workers,
        "test_edge": "first test windows seeded with the last W+h-1 train values of each component",
        "leaf_ordering": "natural",
        "windcast_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def run_matrix(
    config: PipelineConfig,
    models: list[str] | None = None,
    workers: int | None = None,
    trainer: Trainer | None = None,
    prepared: Prepared | None = None,
) -> RunArtifacts:
    """Fit and evaluate every model entry under one shared split and normalizer."""
    names = list(models) if models is not None else list(config.models)
    if not names:
        raise PipelineError("config", "model matrix is empty")
    specs = [parse_model(n) for n in names]
    n_workers = resolve_workers(config, workers)
    mode = "causal" if config.causal_mode else "segment"
    prov = _provenance(config, mode, n_workers)
    prep = prepared if prepared is not None else prepare(config)
    entries: dict[str, EntryResult] = {}
    rows, errors = [], {}
    for spec in sorted(specs, key=lambda s: s.name):
        try:
            fitted = fit_entry(prep, spec, config, n_workers, trainer)
            if config.causal_mode:
                fc = walk_forward_forecasts(prep, fitted, config, config.walk_forward_stride, trainer)
            else:
                fc = forecast_segment(prep, fitted, config)
            entries[spec.name] = EntryResult(fitted, fc)
            rows += _score_entry(spec.name, prep, fc)
        except Exception as exc:  # noqa: BLE001 - one failed entry must not abort the matrix
            log.error("model %s failed: %s", spec.name, exc)
            entries[spec.name] = EntryResult(None, {}, f"{type(exc).__name__}: {exc}")
            errors[spec.name] = entries[spec.name].error
            rows += _failed_rows(spec.name, config.horizons)
    prov["finished_utc"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return RunArtifacts(config, prep, entries, summarize(rows, errors), mode, prov)


def run_proposed(config: PipelineConfig, workers: int | None = None, trainer: Trainer | None = None) -> RunArtifacts:
    """The full WPD-SAM-BiLSTM flow."""
    return run_matrix(config, [PROPOSED], workers, trainer)


def run_benchmark(config: PipelineConfig, workers: int | None = None) -> EvalReport:
    return run_matrix(config, None, workers).report


def _history_components(history: np.ndarray, spec: ModelSpec, config: PipelineConfig, seasonal, start: int):
    comps = decompose_segment(history, spec, config)
    if seasonal is not None:
        comps = np.stack([sam_deseasonalize(c, m, start) for c, m in zip(comps, seasonal)])
    return comps


@_stage("walk-forward")
def walk_forward_forecasts(
    prep: Prepared,
    fitted: FittedEntry,
    config: PipelineConfig,
    stride: int,
    trainer: Trainer | None = None,
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Strictly causal forecasts from origins ``n_train, n_train + stride, ...``.

    At origin ``o`` only slots ``< o`` are decomposed; the h-step forecast
    targets slot ``o + h - 1``. Normalizer and seasonal indices stay
    train-fitted. With ``walk_forward_retrain_every = k > 0`` the forecasters
    are refitted on the available history every ``k`` origins.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    z = prep.full_z
    n_train, n_total = prep.n_train, prep.n_total
    origins = np.arange(n_train, n_total, stride)
    max_hist = config.walk_forward_max_history
    models = dict(fitted.models)
    per_h: dict[int, list[tuple[int, float]]] = {h: [] for h in config.horizons}
    for k, o in enumerate(origins.tolist()):
        start = max(0, o - max_hist) if max_hist > 0 else 0
        comps = _history_components(z[start:o], fitted.spec, config, fitted.seasonal, start)
        if config.walk_forward_retrain_every > 0 and k > 0 and k % config.walk_forward_retrain_every == 0:
            models = _refit(comps, fitted, config, o, trainer)
        for h in config.horizons:
            target = o + h - 1
            if target >= n_total:
                continue
            W = config.windows[h]
            total = 0.0
            for ci in range(fitted.n_components):
                pred = float(_predict(models[(ci, h)], comps[ci, -W:][None, :])[0])
                if fitted.seasonal is not None:
                    pred = float(sam_reseasonalize([pred], fitted.seasonal[ci], target)[0])
                total += pred
            per_h[h].append((target, total))
    out = {}
    for h, pairs in per_h.items():
        slots = np.array([p[0] for p in pairs], dtype=int)
        vals = np.array([p[1] for p in pairs])
        out[h] = (slots, prep.normalizer.invert(vals))
    return out


def _refit(comps: np.ndarray, fitted: FittedEntry, config: PipelineConfig, origin: int, trainer):
    models = {}
    for ci, comp in enumerate(comps):
        for h in config.horizons:
            ds = window_supervise(comp, config.windows[h], h)
            cfg = replace(
                config.train,
                seed=task_seed(config.seed, ci, h, origin),
                bidirectional=fitted.spec.bidirectional,
            )
            models[(ci, h)] = trainer(ds, cfg) if trainer is not None else train(ds, cfg)[0]
    return models


def walk_forward_eval(
    config: PipelineConfig,
    stride: int,
    artifacts: RunArtifacts | None = None,
    model: str | None = None,
) -> EvalReport:
    """Causal re-evaluation of already-trained models (trains them first if needed)."""
    if stride < 1:
        raise PipelineError("walk-forward", "stride must be >= 1")
    if artifacts is None:
        artifacts = run_matrix(replace(config, causal_mode=False), [model or PROPOSED])
    rows = []
    names = [model] if model else sorted(n for n, e in artifacts.entries.items() if e.error is None)
    for name in names:
        entry = artifacts.entries[name]
        fc = walk_forward_forecasts(artifacts.prepared, entry.fitted, config, stride)
        rows += _score_entry(name, artifacts.prepared, fc)
    return summarize(rows)


def fitted_fingerprint(prep: Prepared, entries: dict[str, EntryResult]) -> str:
    """Digest of every fitted artifact: normalizer, seasonal indices, parameters."""
    h = hashlib.sha256()
    h.update(np.array([prep.normalizer.mean, prep.normalizer.std]).tobytes())
    for name in sorted(entries):
        fitted = entries[name].fitted
        if fitted is None:
            continue
        h.update(name.encode())
        for m in fitted.seasonal or []:
            h.update(m.indices.tobytes())
        for key in sorted(fitted.models):
            model = fitted.models[key]
            if isinstance(model, RecurrentModel):
                for pname in sorted(model.params):
                    h.update(model.params[pname].tobytes())
    return h.hexdigest()


def emit_report(artifacts: RunArtifacts, out_dir: str | Path) -> list[Path]:
    """Write report.csv, report.json and predictions_h{h}.csv."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise PipelineError("emit", f"cannot write to {out}: {exc}") from exc
    written = []
    p = out / "report.csv"
    p.write_text(artifacts.report.to_csv())
    written.append(p)

    prep = artifacts.prepared
    primary = artifacts.primary_model()
    entry = artifacts.entries[primary]
    start = prep.series.start
    from .ingest import HOUR

    for h, (slots, pred) in sorted(entry.forecasts.items()):
        p = out / f"predictions_h{h}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", "actual", "predicted"])
            for s, v in zip(slots, pred):
                w.writerow([(start + int(s) * HOUR).isoformat(sep=" "), f"{prep.series.values[s]:.6f}", f"{v:.6f}"])
        written.append(p)

    doc = {
        "config": artifacts.config.to_dict(),
        "mode": artifacts.mode,
        "provenance": artifacts.provenance,
        "clean_report": json.loads(prep.clean_report.to_json()),
        "adf": json.loads(prep.adf.to_json()) if prep.adf else None,
        "normalizer": prep.normalizer.to_dict(),
        "split": {"n_total": prep.n_total, "n_train": prep.n_train, "n_test": prep.n_test},
        "report": artifacts.report.to_dict(),
        "predictions_model": primary,
        "entries": {},
    }
    for name, e in sorted(artifacts.entries.items()):
        info: dict = {"error": e.error}
        if e.fitted is not None:
            info["n_components"] = e.fitted.n_components
            if e.fitted.seasonal is not None:
                info["seasonal_models"] = [m.to_dict() for m in e.fitted.seasonal]
            info["final_train_loss"] = {
                f"c{c}_h{h}": hist[-1] for (c, h), hist in sorted(e.fitted.histories.items()) if hist
            }
        doc["entries"][name] = info
    p = out / "report.json"
    p.write_text(json.dumps(doc, indent=2, default=_json_default))
    written.append(p)
    return written


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def save_fitted(artifacts: RunArtifacts, out_dir: str | Path) -> Path:
    """Persist normalizer, seasonal models and forecaster parameters."""
    root = Path(out_dir) / "models"
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_hash": artifacts.config.hash(),
        "normalizer": artifacts.normalizer.to_dict(),
        "entries": {},
    }
    for name, e in sorted(artifacts.entries.items()):
        if e.fitted is None:
            continue
        files = {}
        for (c, h), m in sorted(e.fitted.models.items()):
            f = root / f"{name}__c{c}_h{h}.json"
            f.write_text(m.to_json())
            files[f"{c},{h}"] = f.name
        manifest["entries"][name] = {
            "n_components": e.fitted.n_components,
            "seasonal": [m.to_dict() for m in e.fitted.seasonal] if e.fitted.seasonal is not None else None,
            "models": files,
        }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_fitted(model_dir: str | Path) -> tuple[Normalizer, dict[str, FittedEntry], str]:
    root = Path(model_dir) / "models"
    manifest = json.loads((root / "manifest.json").read_text())
    entries = {}
    for name, info in manifest["entries"].items():
        models = {}
        for key, fname in info["models"].items():
            c, h = (int(v) for v in key.split(","))
            models[(c, h)] = RecurrentModel.from_json((root / fname).read_text())
        seasonal = [SeasonalModel.from_dict(d) for d in info["seasonal"]] if info["seasonal"] is not None else None
        entries[name] = FittedEntry(parse_model(name), seasonal, models, {}, int(info["n_components"]))
    return Normalizer.from_dict(manifest["normalizer"]), entries, manifest["config_hash"]


def evaluate_fitted(config: PipelineConfig, model_dir: str | Path) -> RunArtifacts:
    """Score previously saved forecasters on the configured data."""
    norm, fitted, saved_hash = load_fitted(model_dir)
    prep = prepare(config)
    if (norm.mean, norm.std) != (prep.normalizer.mean, prep.normalizer.std):
        raise PipelineError("evaluate", "saved normalizer does not match the configured training data")
    mode = "causal" if config.causal_mode else "segment"
    prov = _provenance(config, mode, 1)
    prov["saved_config_hash"] = saved_hash
    entries, rows, errors = {}, [], {}
    for name, fe in sorted(fitted.items()):
        try:
            if config.causal_mode:
                fc = walk_forward_forecasts(prep, fe, config, config.walk_forward_stride)
            else:
                fc = forecast_segment(prep, fe, config)
            entries[name] = EntryResult(fe, fc)
            rows += _score_entry(name, prep, fc)
        except Exception as exc:  # noqa: BLE001
            entries[name] = EntryResult(None, {}, str(exc))
            errors[name] = str(exc)
            rows += _failed_rows(name, config.horizons)
    if not rows:
        raise PipelineError("evaluate", f"no saved models in {model_dir}")
    return RunArtifacts(config, prep, entries, summarize(rows, errors), mode, prov)
