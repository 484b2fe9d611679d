"""Additive seasonal adjustment with positional seasonal indices."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class SeasonalError(ValueError):
    pass


@dataclass(frozen=True)
class SeasonalModel:
    """Zero-sum additive indices; phase 0 sits at absolute slot ``origin``."""

    period: int
    indices: np.ndarray
    origin: int = 0

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=float)
        if idx.shape != (self.period,):
            raise SeasonalError(f"expected {self.period} indices, got shape {idx.shape}")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def phase_values(self, start_slot: int, length: int) -> np.ndarray:
        phase = (start_slot + np.arange(length) - self.origin) % self.period
        return self.indices[phase]

    def to_dict(self) -> dict:
        return {"period": self.period, "origin": self.origin, "indices": self.indices.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SeasonalModel":
        return cls(int(d["period"]), np.asarray(d["indices"], dtype=float), int(d.get("origin", 0)))


def _centered_moving_average(x: np.ndarray, period: int) -> np.ndarray:
    """2xL moving average for even L, plain L-point for odd L; NaN where undefined."""
    n = len(x)
    out = np.full(n, np.nan)
    c = np.concatenate([[0.0], np.cumsum(x)])
    if period % 2:
        half = period // 2
        out[half : n - half] = (c[period:] - c[:-period]) / period
    else:
        half = period // 2
        ma = (c[period:] - c[:-period]) / period  # ma[i] averages x[i : i+period]
        centred = 0.5 * (ma[:-1] + ma[1:])
        out[half : half + len(centred)] = centred
    return out


def sam_fit(train, period: int, origin: int = 0, detrend: bool = False) -> SeasonalModel:
    """Fit indices on a training segment that starts at absolute slot ``origin``.

    ``s_j`` is the mean of the observations at phase ``j`` minus the grand
    mean, re-centred so the indices sum to zero. ``detrend=True`` subtracts a
    centred moving average first (classical decomposition), for sensitivity
    checks only.
    """
    x = np.asarray(train, dtype=float)
    period = int(period)
    if period < 1:
        raise SeasonalError(f"period must be positive, got {period}")
    if len(x) < 2 * period:
        raise SeasonalError(f"need at least two full periods ({2 * period}) of data, got {len(x)}")
    if period == 1:
        return SeasonalModel(1, np.zeros(1), origin)
    phase = np.arange(len(x)) % period
    if detrend:
        dev = x - _centered_moving_average(x, period)
        ok = np.isfinite(dev)
        sums = np.bincount(phase[ok], dev[ok], minlength=period)
        counts = np.bincount(phase[ok], minlength=period)
        means = sums / counts
    else:
        means = np.bincount(phase, x, minlength=period) / np.bincount(phase, minlength=period)
        means = means - x.mean()
    return SeasonalModel(period, means - means.mean(), origin)


def sam_deseasonalize(series, model: SeasonalModel, start_slot: int) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    return x - model.phase_values(start_slot, len(x))


def sam_reseasonalize(values, model: SeasonalModel, start_slot: int) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    return x + model.phase_values(start_slot, len(x))
