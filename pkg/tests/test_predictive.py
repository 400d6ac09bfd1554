import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

import denguecast as dc
from denguecast.errors import DataError, FitError
from denguecast.predictive import support_length


def direct_pmf(n, lam, lower):
    """Direct-summation reference: tail normalizer summed term by term."""
    if n < lower:
        return 0.0

    def logpmf(k):
        return -lam + k * math.log(lam) - math.lgamma(k + 1)

    upper = int(lower + 20.0 * (1.0 + math.sqrt(lam)) + 200)
    logs = [logpmf(k) for k in range(lower, upper + 1)]
    peak = max(logs)
    log_norm = peak + math.log(sum(math.exp(v - peak) for v in logs))
    return math.exp(logpmf(n) - log_norm)


class TestCensoredPmf:
    def test_plain_poisson_at_zero(self, oracles):
        d = dc.CensoredPoisson(lam=2.0, lower=0)
        assert dc.cpoisson_pmf(d, 0) == pytest.approx(math.exp(-2.0), abs=1e-12)
        assert dc.cpoisson_pmf(d, 0) == pytest.approx(
            oracles["censored_poisson"]["pmf_lam2_lower0_n0"], abs=1e-12)

    def test_truncated_value(self, oracles):
        d = dc.CensoredPoisson(lam=2.0, lower=2)
        assert dc.cpoisson_pmf(d, 2) == pytest.approx(
            oracles["censored_poisson"]["pmf_lam2_lower2_n2"], abs=1e-10)
        # the normalizer is 1 - e^-2 * (1 + 2)
        expected = (2.0 * math.exp(-2.0)) / (1.0 - 3.0 * math.exp(-2.0))
        assert dc.cpoisson_pmf(d, 2) == pytest.approx(expected, abs=1e-12)

    def test_below_support(self):
        d = dc.CensoredPoisson(lam=2.0, lower=2)
        assert dc.cpoisson_pmf(d, 1) == 0.0
        assert dc.cpoisson_pmf(d, 0) == 0.0

    def test_matches_plain_poisson_when_uncensored(self):
        for lam in (0.5, 3.0, 17.0, 50.0):
            d = dc.CensoredPoisson(lam=lam, lower=0)
            ns = np.arange(0, support_length(lam))
            assert np.allclose(dc.cpoisson_pmf(d, ns), poisson.pmf(ns, lam),
                               atol=1e-12)

    def test_sums_to_one(self):
        for lam, lower in ((2.0, 0), (2.0, 2), (40.0, 55), (150.0, 120)):
            d = dc.CensoredPoisson(lam=lam, lower=lower)
            ns = np.arange(lower, lower + support_length(lam))
            assert dc.cpoisson_pmf(d, ns).sum() == pytest.approx(1.0, abs=1e-9)

    def test_empty_support(self):
        with pytest.raises(FitError, match="empty support mass"):
            dc.cpoisson_pmf(dc.CensoredPoisson(lam=1.0, lower=200), 200)

    def test_validation(self):
        with pytest.raises(DataError):
            dc.CensoredPoisson(lam=0.0, lower=0)
        with pytest.raises(DataError):
            dc.CensoredPoisson(lam=1.0, lower=-1)

    def test_log_space_large_rate(self):
        d = dc.CensoredPoisson(lam=165.0, lower=160)
        ns = np.arange(160, 160 + support_length(165.0))
        probs = dc.cpoisson_pmf(d, ns)
        assert np.isfinite(probs).all()
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert direct_pmf(170, 165.0, 160) == pytest.approx(
            dc.cpoisson_pmf(d, 170), abs=1e-12)


class TestCensoredQuantile:
    def test_median_uncensored(self, oracles):
        d = dc.CensoredPoisson(lam=2.0, lower=0)
        assert dc.cpoisson_quantile(d, 0.5) == \
            oracles["censored_poisson"]["quantile_lam2_lower0_q50"] == 2

    def test_median_censored(self, oracles):
        d = dc.CensoredPoisson(lam=5.0, lower=8)
        assert dc.cpoisson_quantile(d, 0.5) == \
            oracles["censored_poisson"]["quantile_lam5_lower8_q50"] == 9

    def test_near_one_terminates(self):
        d = dc.CensoredPoisson(lam=30.0, lower=10)
        n = dc.cpoisson_quantile(d, 1.0 - 1e-9)
        assert dc.cpoisson_cdf(d, n) >= 1.0 - 1e-9

    def test_invalid_level(self):
        d = dc.CensoredPoisson(lam=2.0, lower=0)
        with pytest.raises(DataError):
            dc.cpoisson_quantile(d, 0.0)

    @given(st.floats(min_value=0.5, max_value=80.0),
           st.integers(min_value=0, max_value=90),
           st.floats(min_value=0.01, max_value=0.99))
    @settings(max_examples=60, deadline=None)
    def test_quantile_is_smallest_admissible(self, lam, lower, q):
        if lower > lam + 30:
            lower = int(lam + 30)
        d = dc.CensoredPoisson(lam=lam, lower=lower)
        n = dc.cpoisson_quantile(d, q)
        assert n >= lower
        assert dc.cpoisson_cdf(d, n) >= q
        if n > lower:
            assert dc.cpoisson_cdf(d, n - 1) < q


class TestRollingForecast:
    def test_outbreak1_anchor15(self, outbreak1):
        fset = dc.rolling_forecast(outbreak1, 15)
        assert fset.forecasts[0].week == 16
        assert fset.forecasts[0].point == 2

    def test_outbreak1_anchor19(self, outbreak1):
        fset = dc.rolling_forecast(outbreak1, 19)
        assert fset.forecasts[0].week == 20
        assert fset.forecasts[0].point == 8

    def test_one_week_points(self, outbreak1):
        points = [dc.rolling_forecast(outbreak1, t0).forecasts[0].point
                  for t0 in range(15, 21)]
        assert points == [2, 1, 1, 6, 8, 11]

    def test_live_lower_bounds(self, outbreak1):
        fset = dc.rolling_forecast(outbreak1, 18, retrospective=False)
        assert all(f.dist.lower == 6 for f in fset.forecasts)  # R_18 = 6
        assert all(f.point >= f.dist.lower for f in fset.forecasts)

    def test_retrospective_lower_bounds(self, outbreak1):
        fset = dc.rolling_forecast(outbreak1, 18, retrospective=True)
        # realized cumulative at weeks 18..21 is 6, 6, 10, 10
        assert [f.dist.lower for f in fset.forecasts] == [6, 6, 10, 10]

    def test_retrospective_extends_beyond_season(self, outbreak1):
        fset = dc.rolling_forecast(outbreak1, 20, horizons=4, retrospective=True)
        assert [f.dist.lower for f in fset.forecasts] == [10, 10, 10, 10]

    def test_horizon_monotone_and_floors(self, outbreak1):
        for t0 in range(15, 21):
            fset = dc.rolling_forecast(outbreak1, t0, horizons=4)
            pts = [f.point for f in fset.forecasts]
            assert pts == sorted(pts)
            r_anchor = dc.observed_cumulative(outbreak1, t0)
            assert all(p >= r_anchor for p in pts)

    def test_anchor_too_early(self, outbreak1):
        with pytest.raises(DataError, match="at least 3 weeks"):
            dc.rolling_forecast(outbreak1, 14)

    def test_model_consistent_band(self):
        # slow-growth noiseless logistic: forecasts track the true curve;
        # the weekly-increment discretization caps the attainable accuracy
        l0, delta, mu = 500.0, 0.2, 30.0
        weeks = np.arange(10, 31)
        cum = np.round(l0 / (1 + np.exp(-delta * (weeks - mu)))).astype(int)
        counts = tuple(int(v) for v in np.diff(np.concatenate([[0], cum])))
        season = dc.IncidenceSeries(10, counts)
        fset = dc.rolling_forecast(season, 30, horizons=4)
        for f in fset.forecasts:
            true = l0 / (1 + math.exp(-delta * (f.week - mu)))
            assert abs(f.point - true) <= max(1.0, 0.05 * true)

    def test_exact_when_true_final_size_supplied(self):
        l0, delta, mu = 1530.0, math.log(2.0), 14.0
        weeks = np.arange(10, 19)
        cum = l0 / (1 + np.exp(-delta * (weeks - mu)))
        assert np.allclose(cum, np.round(cum))  # integer-valued logistic
        counts = tuple(int(v) for v in np.diff(np.concatenate([[0], np.round(cum)]))
                       .astype(int))
        season = dc.IncidenceSeries(10, counts)
        fit = dc.fit_logistic(season, l0)
        assert fit.delta == pytest.approx(delta, rel=1e-9)
        assert fit.mu == pytest.approx(mu, abs=1e-9)
        for t in range(19, 23):
            true = l0 / (1 + math.exp(-delta * (t - mu)))
            assert dc.predict_cumulative(fit, t) == pytest.approx(true, rel=1e-9)


class TestSerialization:
    def test_forecast_dict_shape(self, outbreak1):
        fset = dc.rolling_forecast(outbreak1, 19, horizons=2)
        payload = dc.predictive.forecast_set_to_dict(fset)
        assert payload["anchor_week"] == 19
        assert [f["week"] for f in payload["forecasts"]] == [20, 21]
        for f in payload["forecasts"]:
            qs = f["quantiles"]
            assert qs["q05"] <= qs["q25"] <= qs["q50"] <= qs["q75"] <= qs["q95"]
            assert f["lower"] <= qs["q05"]

    def test_pmf_grid_rows(self, outbreak1):
        fset = dc.rolling_forecast(outbreak1, 19, horizons=2)
        rows = dc.pmf_grid(fset)
        weeks = {w for w, _, _ in rows}
        assert weeks == {20, 21}
        by_week = {w: sum(p for ww, _, p in rows if ww == w) for w in weeks}
        for total in by_week.values():
            assert total == pytest.approx(1.0, abs=1e-4)
