"""Augmented Dickey-Fuller test and forecast error metrics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

SIGNIFICANCE_LEVELS = ("1%", "5%", "10%")

# MacKinnon (2010) response surface, one variable, constant and no trend:
# cv(T) = b0 + b1/T + b2/T^2 + b3/T^3
_CRIT_SURFACE = {
    "1%": (-3.43035, -6.5393, -16.786, -79.433),
    "5%": (-2.86154, -2.8903, -4.234, -40.040),
    "10%": (-2.56677, -1.5384, -2.809, 0.0),
}

# Asymptotic quantiles of the constant-only Dickey-Fuller t distribution
# (cumulative probability, t value). Used for an approximate p-value only.
_DF_QUANTILES = (
    (0.01, -3.43),
    (0.025, -3.12),
    (0.05, -2.86),
    (0.10, -2.57),
    (0.50, -1.57),
    (0.90, -0.44),
    (0.95, -0.07),
    (0.975, 0.23),
    (0.99, 0.60),
)


class AdfError(ValueError):
    pass


@dataclass(frozen=True)
class AdfResult:
    t_statistic: float
    n_lags: int
    n_obs: int
    critical_values: dict[str, float]
    reject_at: tuple[str, ...]
    approx_p: float | None
    lag_selection: str = "aic"

    def to_json(self) -> str:
        d = asdict(self)
        d["reject_at"] = list(self.reject_at)
        if self.approx_p is None:
            d["approx_p"] = "not computed"
        return json.dumps(d, indent=2)

    @property
    def stationary(self) -> bool:
        return "5%" in self.reject_at


def critical_values(n_obs: int) -> dict[str, float]:
    out = {}
    for level, (b0, b1, b2, b3) in _CRIT_SURFACE.items():
        out[level] = b0 + b1 / n_obs + b2 / n_obs**2 + b3 / n_obs**3
    return out


def approx_pvalue(t: float) -> float:
    """Left-tail probability, linear in logit(p) between the DF table quantiles."""
    ts = np.array([q[1] for q in _DF_QUANTILES])
    ps = np.array([q[0] for q in _DF_QUANTILES])
    logit = np.log(ps / (1.0 - ps))
    if t <= ts[0]:
        slope = (logit[1] - logit[0]) / (ts[1] - ts[0])
        v = logit[0] + slope * (t - ts[0])
    elif t >= ts[-1]:
        slope = (logit[-1] - logit[-2]) / (ts[-1] - ts[-2])
        v = logit[-1] + slope * (t - ts[-1])
    else:
        v = np.interp(t, ts, logit)
    return float(1.0 / (1.0 + np.exp(-v)))


def _design(y: np.ndarray, lags: int, start: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows t = start..n-1 of [1, y_{t-1}, dy_{t-1}, ..., dy_{t-lags}] and dy_t."""
    dy = np.diff(y)  # dy[t-1] = y[t] - y[t-1]
    t = np.arange(start, len(y))
    cols = [np.ones(len(t)), y[t - 1]]
    cols += [dy[t - 1 - i] for i in range(1, lags + 1)]
    return np.column_stack(cols), dy[t - 1]


def _ols(X: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    beta, _, rank, _ = np.linalg.lstsq(X, z, rcond=None)
    if rank < X.shape[1]:
        raise AdfError("singular ADF regression matrix")
    resid = z - X @ beta
    return beta, float(resid @ resid), resid


def default_max_lag(n: int) -> int:
    """Schwert's upper bound floor(12 * (n/100)^(1/4))."""
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def adf_test(series: Sequence[float], max_lag: int | None = None, autolag: bool = True) -> AdfResult:
    """ADF regression with constant; lag order by AIC over ``0..max_lag``.

    All candidate lags are compared on the same sample (the first
    ``max_lag + 1`` observations are dropped), then the chosen lag is refitted
    on every observation it can use.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or len(y) < 50:
        raise AdfError(f"ADF needs at least 50 observations, got {len(y)}")
    if not np.all(np.isfinite(y)):
        raise AdfError("ADF input contains missing or non-finite values")
    if max_lag is None:
        max_lag = default_max_lag(len(y))
    if max_lag < 0 or len(y) - max_lag - 1 <= max_lag + 3:
        raise AdfError(f"series too short for max_lag={max_lag}")

    if autolag:
        best_aic, lags = math.inf, 0
        for p in range(max_lag + 1):
            X, z = _design(y, p, max_lag + 1)
            _, ssr, _ = _ols(X, z)
            nobs = len(z)
            aic = nobs * math.log(ssr / nobs) + 2 * X.shape[1]
            if aic < best_aic - 1e-12:
                best_aic, lags = aic, p
    else:
        lags = max_lag

    X, z = _design(y, lags, lags + 1)
    beta, ssr, _ = _ols(X, z)
    nobs, k = X.shape
    sigma2 = ssr / (nobs - k)
    xtx_inv = np.linalg.inv(X.T @ X)
    se = math.sqrt(sigma2 * xtx_inv[1, 1])
    if se == 0.0:
        raise AdfError("degenerate ADF regression (zero residual variance)")
    t = float(beta[1] / se)
    cv = critical_values(nobs)
    reject = tuple(level for level in SIGNIFICANCE_LEVELS if t < cv[level])
    return AdfResult(
        t_statistic=t,
        n_lags=lags,
        n_obs=nobs,
        critical_values=cv,
        reject_at=reject,
        approx_p=approx_pvalue(t),
        lag_selection="aic" if autolag else "fixed",
    )


def _pair(actual, predicted) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size == 0:
        raise ValueError("metrics need at least one value")
    return a, p


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.sqrt(np.mean((a - p) ** 2)))


def r2(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 is undefined for constant actual values")
    return 1.0 - float(np.sum((a - p) ** 2)) / ss_tot


@dataclass(frozen=True)
class EvalRow:
    model: str
    horizon: int
    mae: float
    rmse: float
    r2: float


def score(model: str, horizon: int, actual, predicted) -> EvalRow:
    try:
        r = r2(actual, predicted)
    except ValueError:
        if len(np.atleast_1d(actual)) == 0:
            raise
        r = math.nan
    return EvalRow(model, horizon, mae(actual, predicted), rmse(actual, predicted), r)


@dataclass
class EvalReport:
    rows: list[EvalRow]
    overall: dict[str, tuple[float, float, float]]
    errors: dict[str, str] = field(default_factory=dict)

    def models(self) -> list[str]:
        return sorted({r.model for r in self.rows})

    def row(self, model: str, horizon: int) -> EvalRow:
        for r in self.rows:
            if r.model == model and r.horizon == horizon:
                return r
        raise KeyError((model, horizon))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "horizon_h", "mae", "rmse", "r2"])
        for model in self.models():
            for r in sorted((r for r in self.rows if r.model == model), key=lambda r: r.horizon):
                w.writerow([model, r.horizon, _fmt(r.mae), _fmt(r.rmse), _fmt(r.r2)])
            w.writerow([model, "overall", *(_fmt(v) for v in self.overall[model])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in sorted(self.rows, key=lambda r: (r.model, r.horizon))],
            "overall": {m: dict(zip(("mae", "rmse", "r2"), v)) for m, v in sorted(self.overall.items())},
            "errors": dict(sorted(self.errors.items())),
        }


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.10f}"


def summarize(rows: Iterable[EvalRow], errors: dict[str, str] | None = None) -> EvalReport:
    """Per-model arithmetic means across horizons."""
    rows = list(rows)
    if not rows:
        raise ValueError("summarize needs at least one row")
    overall = {}
    for model in sorted({r.model for r in rows}):
        mine = [r for r in rows if r.model == model]
        overall[model] = (
            float(np.mean([r.mae for r in mine])),
            float(np.mean([r.rmse for r in mine])),
            float(np.mean([r.r2 for r in mine])),
        )
    return EvalReport(sorted(rows, key=lambda r: (r.model, r.horizon)), overall, dict(errors or {}))
