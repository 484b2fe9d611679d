"""Loading and cleaning of hourly wind-speed records.

The cleaning chain is ``parse_csv -> resample_hourly -> clean -> fill_missing``,
followed by a chronological ``split`` and a train-only Z-score ``Normalizer``.
Missing slots are tracked with an explicit boolean mask; no sentinel number is
ever written back into the values.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

HOUR = timedelta(hours=1)
DEFAULT_SCHEMA = ("timestamp", "wind_speed")


class IngestError(ValueError):
    """Raised for malformed input files or degenerate series."""


@dataclass(frozen=True)
class RawSeries:
    """Parsed rows, sorted by timestamp. ``None`` marks an unparseable value."""

    timestamps: tuple[datetime, ...]
    values: tuple[float | None, ...]

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass
class TimeSeries:
    """Values on a uniform hourly grid; slot ``i`` is ``start + i`` hours."""

    start: datetime
    values: np.ndarray
    missing: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.missing is None:
            self.missing = ~np.isfinite(self.values)
        self.missing = np.asarray(self.missing, dtype=bool)
        if self.missing.shape != self.values.shape:
            raise IngestError("missing mask and values differ in shape")
        # keep the numbers under the mask inert so they cannot leak into statistics
        self.values = np.where(self.missing, 0.0, self.values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    def timestamps(self) -> list[datetime]:
        return [self.start + i * HOUR for i in range(len(self))]

    def slice(self, lo: int, hi: int) -> "TimeSeries":
        return TimeSeries(self.start + lo * HOUR, self.values[lo:hi].copy(), self.missing[lo:hi].copy())

    def with_values(self, values: np.ndarray) -> "TimeSeries":
        return TimeSeries(self.start, np.asarray(values, dtype=float), self.missing.copy())


@dataclass(frozen=True)
class CleanReport:
    n_total: int
    n_sentinel: int
    n_outliers: int
    n_filled: int
    missing_fraction: float
    # slots that were already empty on the hourly grid before cleaning
    n_gap_slots: int = 0
    outlier_rule: str = "global k-sigma, applied before gap filling"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1]
    return datetime.fromisoformat(text)


def _parse_value(text: str | None) -> float | None:
    if text is None:
        return None
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def parse_csv(path: str | Path, schema: Sequence[str] = DEFAULT_SCHEMA) -> RawSeries:
    """Read a ``timestamp,wind_speed`` CSV into a :class:`RawSeries`.

    Values that do not parse as finite numbers become ``None``. Raw values
    (including the 999.9 sentinel) are kept as-is; :func:`clean` handles them.
    """
    ts_col, val_col = schema
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    rows: list[tuple[datetime, float | None, int]] = []
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (ts_col, val_col):
            if col not in header:
                raise IngestError(f"{path}: missing required column {col!r} (have {header})")
        for lineno, row in enumerate(reader, start=2):
            raw_ts = row.get(ts_col)
            try:
                ts = _parse_timestamp(raw_ts or "")
            except ValueError:
                raise IngestError(f"{path}:{lineno}: unparseable timestamp {raw_ts!r}") from None
            rows.append((ts, _parse_value(row.get(val_col)), lineno))
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if cur[0] == prev[0]:
            raise IngestError(f"{path}:{cur[2]}: duplicate timestamp {cur[0].isoformat()}")
    return RawSeries(tuple(r[0] for r in rows), tuple(r[1] for r in rows))


def resample_hourly(raw: RawSeries) -> TimeSeries:
    """Average readings per clock hour onto a gap-free hourly grid."""
    if len(raw) == 0:
        raise IngestError("cannot resample an empty series")
    floors = [t.replace(minute=0, second=0, microsecond=0) for t in raw.timestamps]
    start = floors[0]
    n = int((floors[-1] - start) / HOUR) + 1
    sums = np.zeros(n)
    counts = np.zeros(n, dtype=int)
    for t, v in zip(floors, raw.values):
        if v is None:
            continue
        i = int((t - start) / HOUR)
        sums[i] += v
        counts[i] += 1
    missing = counts == 0
    values = np.divide(sums, counts, out=np.zeros(n), where=~missing)
    return TimeSeries(start, values, missing)


def clean(
    series: TimeSeries,
    sentinel: float = 999.9,
    k_sigma: float = 3.0,
    stats_slice: slice | None = None,
) -> tuple[TimeSeries, CleanReport]:
    """Mark sentinel readings and k-sigma outliers as missing.

    Mean and population standard deviation are taken once over the non-missing,
    non-sentinel values. ``stats_slice`` restricts those statistics to a
    sub-range (the forecasting pipeline passes the training slots so that test
    values cannot influence what counts as an outlier).
    """
    values = series.values
    gap = series.missing.copy()
    is_sentinel = ~gap & np.isclose(values, sentinel, rtol=0.0, atol=1e-9)
    usable = ~gap & ~is_sentinel
    ref = usable.copy()
    if stats_slice is not None:
        window = np.zeros_like(ref)
        window[stats_slice] = True
        ref &= window
    if not ref.any():
        raise IngestError("no usable values left to compute outlier statistics")
    mu = values[ref].mean()
    sd = values[ref].std()
    is_outlier = usable & (np.abs(values - mu) > k_sigma * sd)
    missing = gap | is_sentinel | is_outlier
    if missing.all():
        raise IngestError("every slot is missing after cleaning")
    n = len(series)
    n_sent, n_out, n_gap = int(is_sentinel.sum()), int(is_outlier.sum()), int(gap.sum())
    report = CleanReport(
        n_total=n,
        n_sentinel=n_sent,
        n_outliers=n_out,
        n_filled=n_sent + n_out + n_gap,
        missing_fraction=(n_sent + n_out + n_gap) / n,
        n_gap_slots=n_gap,
    )
    return TimeSeries(series.start, values, missing), report


def fill_missing(series: TimeSeries) -> TimeSeries:
    """Forward fill, then backward fill whatever leading slots remain."""
    present = ~series.missing
    if not present.any():
        raise IngestError("cannot fill an all-missing series")
    idx = np.where(present, np.arange(len(series)), -1)
    np.maximum.accumulate(idx, out=idx)
    idx[idx < 0] = int(np.argmax(present))
    return TimeSeries(series.start, series.values[idx], np.zeros(len(series), dtype=bool))


def split_index(n: int, train_fraction: float = 0.7) -> int:
    if not 0.0 < train_fraction < 1.0:
        raise IngestError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    # Fraction(str(...)) keeps 0.7 * 10 from landing on 6.999...
    return math.floor(Fraction(str(train_fraction)) * n)


def split(series: TimeSeries, train_fraction: float = 0.7) -> tuple[TimeSeries, TimeSeries]:
    """Chronological train/test split at ``floor(train_fraction * n)``."""
    n = len(series)
    if n < 10:
        raise IngestError(f"series too short to split (n={n})")
    k = split_index(n, train_fraction)
    return series.slice(0, k), series.slice(k, n)


@dataclass(frozen=True)
class Normalizer:
    """Z-score transform. ``std`` is the population (divide-by-n) deviation."""

    mean: float
    std: float

    def __post_init__(self) -> None:
        if not (self.std > 0 and math.isfinite(self.std)):
            raise IngestError(f"Normalizer needs a positive finite std, got {self.std}")

    def apply(self, x):
        return _map_values(x, lambda v: (v - self.mean) / self.std)

    def invert(self, z):
        return _map_values(z, lambda v: v * self.std + self.mean)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(float(d["mean"]), float(d["std"]))


def _map_values(x, fn):
    if isinstance(x, TimeSeries):
        return x.with_values(fn(x.values))
    return fn(np.asarray(x, dtype=float))


def zscore_fit(train) -> Normalizer:
    """Fit on the training segment only."""
    values = train.values[~train.missing] if isinstance(train, TimeSeries) else np.asarray(train, float)
    if values.size == 0:
        raise IngestError("cannot fit a normalizer on an empty segment")
    std = float(values.std())
    if std == 0.0:
        raise IngestError("zero variance in training segment")
    return Normalizer(float(values.mean()), std)


def zscore_apply(norm: Normalizer, series):
    return norm.apply(series)


def zscore_invert(norm: Normalizer, series):
    return norm.invert(series)


def load_clean(
    path: str | Path,
    schema: Sequence[str] = DEFAULT_SCHEMA,
    sentinel: float = 999.9,
    k_sigma: float = 3.0,
    train_fraction: float | None = None,
) -> tuple[TimeSeries, CleanReport]:
    """parse -> resample -> clean -> fill in one call.

    With ``train_fraction`` set, outlier statistics come from the would-be
    training slots only.
    """
    grid = resample_hourly(parse_csv(path, schema))
    stats_slice = None
    if train_fraction is not None:
        stats_slice = slice(0, split_index(len(grid), train_fraction))
    cleaned, report = clean(grid, sentinel, k_sigma, stats_slice)
    return fill_missing(cleaned), report


def write_csv(series: TimeSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DEFAULT_SCHEMA)
        for ts, v, m in zip(series.timestamps(), series.values, series.missing):
            w.writerow([ts.isoformat(sep=" "), "" if m else repr(float(v))])
