"""Fast in-library property checks, run by ``windcast selftest``.

Each check returns a short detail string and raises ``AssertionError`` on
failure. They are quick versions of the properties the test suite covers at
full strength.
"""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from .neural import gradient_check, init_model
from .seasonal import sam_deseasonalize, sam_fit, sam_reseasonalize
from .stats import adf_test, mae, r2, rmse
from .wavelet import daubechies_filters, decompose


def check_filters() -> str:
    for order in (1, 2, 22):
        h = daubechies_filters(order).lowpass
        assert abs(h.sum() - np.sqrt(2)) < 1e-10, f"db{order} lowpass sum"
        for k in range(0, len(h) // 2):
            dot = float(h[2 * k :] @ h[: len(h) - 2 * k])
            assert abs(dot - (k == 0)) < 1e-10, f"db{order} shift {k}"
    return "db1, db2, db22 orthonormal"


def check_reconstruction() -> str:
    rng = np.random.default_rng(0)
    worst = 0.0
    for n in (256, 1000):
        x = rng.standard_normal(n)
        for method in ("wpd", "dwt", "swt"):
            for boundary in ("symmetric", "periodic"):
                comps = decompose(x, method, 3, daubechies_filters(22), boundary).subseries
                worst = max(worst, float(np.max(np.abs(comps.sum(axis=0) - x)) / np.max(np.abs(x))))
    assert worst < 1e-8, f"reconstruction error {worst:.2e}"
    return f"worst relative error {worst:.1e}"


def check_metrics() -> str:
    rng = np.random.default_rng(1)
    a, p = rng.standard_normal(50), rng.standard_normal(50)
    assert abs(mae(a, p) - np.mean(np.abs(a - p))) < 1e-12
    assert abs(rmse(a, p) - np.sqrt(np.mean((a - p) ** 2))) < 1e-12
    assert r2(a, a) == 1.0 and mae(a, a) == 0.0
    assert abs(r2(a, np.full_like(a, a.mean()))) < 1e-12
    return "MAE, RMSE, R2 identities hold"


def check_seasonal() -> str:
    pattern = np.sin(2 * np.pi * np.arange(24) / 24)
    x = np.tile(pattern, 10) + 3.0
    m = sam_fit(x, 24)
    assert abs(m.indices.sum()) < 1e-12
    d = sam_deseasonalize(x, m, 0)
    assert np.var(d) < 1e-10 * np.var(x)
    assert np.max(np.abs(sam_reseasonalize(d, m, 0) - x)) < 1e-12
    return "zero-sum indices, exact round trip"


def check_gradients() -> str:
    rng = np.random.default_rng(2)
    model = init_model(4, True, rng)
    X, y = rng.standard_normal((5, 3)), rng.standard_normal(5)
    worst = max(gradient_check(model, X, y, "mse").values())
    assert worst < 1e-4, f"gradient mismatch {worst:.2e}"
    return f"worst relative gradient error {worst:.1e}"


def check_adf() -> str:
    rng = np.random.default_rng(3)
    noise = adf_test(rng.standard_normal(1000))
    walk = adf_test(np.cumsum(rng.standard_normal(1000)))
    assert "1%" in noise.reject_at, "white noise not rejected"
    assert "1%" not in walk.reject_at, "random walk rejected at 1%"
    return f"noise t={noise.t_statistic:.2f}, walk t={walk.t_statistic:.2f}"


CHECKS: dict[str, Callable[[], str]] = {
    "filters": check_filters,
    "reconstruction": check_reconstruction,
    "metrics": check_metrics,
    "seasonal": check_seasonal,
    "gradients": check_gradients,
    "adf": check_adf,
}


def run_all() -> list[tuple[str, bool, str, float]]:
    """``(name, passed, detail, seconds)`` per check."""
    out = []
    for name, fn in CHECKS.items():
        t0 = time.perf_counter()
        try:
            detail, ok = fn(), True
        except AssertionError as exc:
            detail, ok = str(exc) or "assertion failed", False
        out.append((name, ok, detail, time.perf_counter() - t0))
    return out
