"""Seeded synthetic series used as bundled fixtures.

``synthetic_wind.csv`` is a daily plus weekly sinusoid around a 7 m/s mean
with AR(1) noise; ``white_noise.csv`` is i.i.d. Gaussian noise. Both are
regenerated bit-for-bit by the functions below (values rounded to 6 decimals).
"""

from __future__ import annotations

import csv
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path

import numpy as np

START = datetime(2018, 1, 1)
WIND_SEED = 20230615
NOISE_SEED = 7

# the weekly period is a whole number of days, so SAM with period 168 sees
# both sinusoids as one exact seasonal pattern
DAILY, WEEKLY = 24, 168
SYNTHETIC_SAM_PERIOD = WEEKLY


def synthetic_wind(n: int = 5000, seed: int = WIND_SEED, phi: float = 0.9, noise_sd: float = 0.25) -> np.ndarray:
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    signal = 7.0 + 2.0 * np.sin(2 * np.pi * t / DAILY) + 1.5 * np.sin(2 * np.pi * t / WEEKLY + 0.7)
    eps = rng.normal(0.0, noise_sd, n)
    ar = np.empty(n)
    ar[0] = eps[0] / np.sqrt(1 - phi**2)
    for i in range(1, n):
        ar[i] = phi * ar[i - 1] + eps[i]
    return np.round(signal + ar, 6)


def white_noise(n: int = 2000, seed: int = NOISE_SEED) -> np.ndarray:
    return np.round(5.0 + np.random.default_rng(seed).standard_normal(n), 6)


def write_series_csv(values, path: str | Path, start: datetime = START) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "wind_speed"])
        for i, v in enumerate(values):
            w.writerow([(start + timedelta(hours=i)).strftime("%Y-%m-%d %H:%M"), f"{v:.6f}"])
    return path


def bundled(name: str) -> Path:
    """Path of a file shipped in ``windcast/data``."""
    return Path(str(resources.files("windcast") / "data" / name))


def regenerate(directory: str | Path) -> None:
    directory = Path(directory)
    write_series_csv(synthetic_wind(), directory / "synthetic_wind.csv")
    write_series_csv(white_noise(), directory / "white_noise.csv")
