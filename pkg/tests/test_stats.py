import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windcast.stats import (
    AdfError,
    EvalRow,
    adf_test,
    approx_pvalue,
    critical_values,
    default_max_lag,
    mae,
    r2,
    rmse,
    score,
    summarize,
)


def naive_metrics(actual, predicted):
    n = len(actual)
    abs_sum = sq_sum = 0.0
    for a, p in zip(actual, predicted):
        abs_sum += abs(a - p)
        sq_sum += (a - p) ** 2
    mean = sum(actual) / n
    ss_tot = sum((a - mean) ** 2 for a in actual)
    return abs_sum / n, math.sqrt(sq_sum / n), 1.0 - sq_sum / ss_tot


def ar1(n, phi, rng):
    e = rng.standard_normal(n)
    y = np.empty(n)
    y[0] = e[0]
    for i in range(1, n):
        y[i] = phi * y[i - 1] + e[i]
    return y


class TestMetrics:
    def test_forced_arithmetic(self):
        assert mae([0, 0, 0, 0], [1, 1, 1, 1]) == 1.0
        assert rmse([0, 0, 0, 0], [1, 1, 1, 1]) == 1.0

    def test_identity_cases(self):
        a = np.random.default_rng(0).standard_normal(30)
        assert (mae(a, a), rmse(a, a), r2(a, a)) == (0.0, 0.0, 1.0)
        assert r2(a, np.full_like(a, a.mean())) == pytest.approx(0.0, abs=1e-15)

    def test_naive_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(2, 200))
            a, p = rng.normal(5, 2, n), rng.normal(5, 2, n)
            m, r, q = naive_metrics(a, p)
            assert mae(a, p) == pytest.approx(m, rel=1e-12)
            assert rmse(a, p) == pytest.approx(r, rel=1e-12)
            assert r2(a, p) == pytest.approx(q, rel=1e-12, abs=1e-12)

    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    def test_scaling(self, seed, c):
        rng = np.random.default_rng(seed)
        a, p = rng.standard_normal(40), rng.standard_normal(40)
        assert mae(c * a, c * p) == pytest.approx(c * mae(a, p), rel=1e-10)
        assert rmse(c * a, c * p) == pytest.approx(c * rmse(a, p), rel=1e-10)
        assert r2(c * a, c * p) == pytest.approx(r2(a, p), rel=1e-10, abs=1e-10)

    @given(st.integers(0, 2**32 - 1))
    def test_ordering_bounds(self, seed):
        rng = np.random.default_rng(seed)
        a, p = rng.standard_normal(25), rng.standard_normal(25) * rng.uniform(0, 3)
        assert rmse(a, p) >= mae(a, p) >= 0.0
        assert r2(a, p) <= 1.0

    @pytest.mark.parametrize("a, p", [([1, 2], [1]), ([], [])])
    def test_bad_lengths(self, a, p):
        with pytest.raises(ValueError):
            mae(a, p)

    def test_constant_actual(self):
        with pytest.raises(ValueError, match="undefined"):
            r2([1.0, 1.0], [1.0, 2.0])
        assert math.isnan(score("m", 1, [1.0, 1.0], [1.0, 2.0]).r2)


class TestSummarize:
    def test_reference_overall_values(self):
        rows = [
            EvalRow("WPD-SAM-BiLSTM", 1, 0.116901, 0.152297, 0.995279),
            EvalRow("WPD-SAM-BiLSTM", 3, 0.155379, 0.223525, 0.989834),
            EvalRow("WPD-SAM-BiLSTM", 5, 0.257366, 0.365386, 0.972849),
        ]
        m, r, q = summarize(rows).overall["WPD-SAM-BiLSTM"]
        assert m == pytest.approx(0.176549, abs=5e-7)
        assert r == pytest.approx(0.247069, abs=5e-7)
        assert q == pytest.approx(0.985987, abs=5e-7)

    def test_single_row(self):
        rep = summarize([EvalRow("A", 1, 0.1, 0.2, 0.9)])
        assert rep.overall["A"] == (0.1, 0.2, 0.9)

    def test_csv_layout(self):
        rows = [EvalRow(m, h, 0.1 * h, 0.2 * h, 1 - 0.01 * h) for m in ("B", "A") for h in (5, 1, 3)]
        rows.append(EvalRow("C", 1, math.nan, math.nan, math.nan))
        text = summarize(rows, {"C": "boom"}).to_csv()
        lines = text.splitlines()
        assert lines[0] == "model,horizon_h,mae,rmse,r2"
        assert [ln.split(",")[:2] for ln in lines[1:5]] == [["A", "1"], ["A", "3"], ["A", "5"], ["A", "overall"]]
        assert len(lines) == 1 + 3 * 3 + 3 - 2
        assert lines[-1] == "C,overall,nan,nan,nan"
        assert text.endswith("\n") and "\r" not in text

    def test_empty(self):
        with pytest.raises(ValueError):
            summarize([])


class TestAdf:
    def test_critical_values_ordered(self):
        for n in (50, 100, 2000, 43772):
            cv = critical_values(n)
            assert cv["1%"] < cv["5%"] < cv["10%"] < 0

    def test_large_sample_critical_values(self):
        cv = critical_values(43772)
        assert cv["1%"] == pytest.approx(-3.430499, abs=1e-6)
        assert cv["5%"] == pytest.approx(-2.861606, abs=1e-6)
        assert cv["10%"] == pytest.approx(-2.566805, abs=1e-6)

    def test_pvalue_monotone_and_anchored(self):
        ts = np.linspace(-6, 2, 200)
        p = [approx_pvalue(t) for t in ts]
        assert all(b >= a for a, b in zip(p, p[1:]))
        assert approx_pvalue(-2.86) == pytest.approx(0.05, rel=1e-9)

    def test_white_noise_rejects(self, white_noise_path):
        y = np.loadtxt(white_noise_path, delimiter=",", skiprows=1, usecols=1)
        res = adf_test(y)
        assert res.t_statistic < -10
        assert res.reject_at == ("1%", "5%", "10%")
        assert res.stationary

    def test_reject_at_downward_closed(self):
        rng = np.random.default_rng(2)
        for phi in (0.0, 0.9, 0.97, 0.99, 1.0):
            res = adf_test(ar1(400, phi, rng))
            levels = ("1%", "5%", "10%")
            flags = [lvl in res.reject_at for lvl in levels]
            assert flags == sorted(flags)

    @given(st.integers(0, 2**32 - 1), st.floats(-1e3, 1e3))
    @settings(max_examples=25)
    def test_level_shift_invariant(self, seed, c):
        y = ar1(200, 0.8, np.random.default_rng(seed))
        assert adf_test(y + c).t_statistic == pytest.approx(adf_test(y).t_statistic, abs=1e-8)

    def test_default_max_lag(self):
        assert default_max_lag(100) == 12
        assert default_max_lag(2000) == 25

    def test_fixed_lag(self):
        res = adf_test(ar1(300, 0.5, np.random.default_rng(3)), max_lag=4, autolag=False)
        assert res.n_lags == 4 and res.lag_selection == "fixed"
        assert res.n_obs == 300 - 5

    @pytest.mark.parametrize("y", [np.arange(10.0), np.r_[np.zeros(99), np.nan]])
    def test_bad_input(self, y):
        with pytest.raises(AdfError):
            adf_test(y)

    def test_json(self):
        res = adf_test(np.random.default_rng(4).standard_normal(100))
        assert '"reject_at"' in res.to_json()


class TestAdfAgainstStatsmodels:
    """Independent implementation as the oracle for the test statistic."""

    @pytest.fixture(autouse=True)
    def _sm(self):
        self.adfuller = pytest.importorskip("statsmodels.tsa.stattools").adfuller

    @pytest.mark.parametrize("phi", [0.0, 0.5, 0.95, 1.0])
    @pytest.mark.parametrize("max_lag", [None, 3])
    def test_autolag_t_statistic(self, phi, max_lag):
        y = ar1(600, phi, np.random.default_rng(int(phi * 100)))
        ours = adf_test(y, max_lag=max_lag)
        ref = self.adfuller(y, maxlag=max_lag, regression="c", autolag="AIC")
        assert ours.t_statistic == pytest.approx(ref[0], abs=1e-9)
        assert ours.n_lags == ref[2]
        assert ours.n_obs == ref[3]
        for level in ("1%", "5%", "10%"):
            assert ours.critical_values[level] == pytest.approx(ref[4][level], abs=1e-9)

    def test_fixed_lag_t_statistic(self):
        y = ar1(300, 0.7, np.random.default_rng(9))
        ref = self.adfuller(y, maxlag=5, regression="c", autolag=None)
        assert adf_test(y, max_lag=5, autolag=False).t_statistic == pytest.approx(ref[0], abs=1e-9)

    def test_pvalue_close_to_response_surface(self):
        from statsmodels.tsa.adfvalues import mackinnonp

        for t in np.linspace(-6.0, 3.0, 91):
            assert approx_pvalue(t) == pytest.approx(mackinnonp(t), abs=0.01)
