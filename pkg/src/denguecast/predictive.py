"""Censored-Poisson predictive law and rolling multi-horizon forecasts.

The cumulative count N_t for a future week is modelled as a Poisson variable
with rate equal to the fitted logistic value C_t, renormalized on the support
n >= R_{t-1} so the prediction can never fall below what has already been
reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .errors import DataError, FitError
from .icc import IccFit, LogisticFit, fit_season, predict_cumulative
from .timeseries import IncidenceSeries, cumulative

#: below this normalizer the truncated support carries no usable mass
_MIN_LOG_NORMALIZER = math.log(1e-300)

#: tail length that captures the distribution to well below 1e-9
def support_length(lam: float) -> int:
    return int(20.0 * (1.0 + math.sqrt(lam))) + 50


@dataclass(frozen=True)
class CensoredPoisson:
    """Poisson(lam) restricted to counts >= lower and renormalized."""

    lam: float
    lower: int

    def __post_init__(self):
        if not self.lam > 0:
            raise DataError("rate must be positive")
        if self.lower < 0 or int(self.lower) != self.lower:
            raise DataError("lower bound must be a non-negative integer")
        object.__setattr__(self, "lower", int(self.lower))


def _log_normalizer(d: CensoredPoisson) -> float:
    # poisson.logsf(lower - 1) = log P(X >= lower); exactly 0 when lower == 0
    log_z = float(poisson.logsf(d.lower - 1, d.lam))
    if log_z < _MIN_LOG_NORMALIZER:
        raise FitError("empty support mass")
    return log_z


def cpoisson_pmf(d: CensoredPoisson, n) -> float:
    """Probability of exactly n cumulative cases; 0 below the censoring bound.

    Evaluated in log space throughout, so large rates cannot overflow.
    """
    log_z = _log_normalizer(d)
    n_arr = np.asarray(n)
    with np.errstate(divide="ignore"):
        out = np.where(n_arr >= d.lower,
                       np.exp(poisson.logpmf(np.maximum(n_arr, 0), d.lam) - log_z),
                       0.0)
    return float(out) if np.ndim(n) == 0 else out


def cpoisson_cdf(d: CensoredPoisson, n) -> float:
    """P(N <= n) under the censored law, computed from survival ratios."""
    log_z = _log_normalizer(d)
    n_arr = np.asarray(n)
    out = np.where(n_arr >= d.lower,
                   -np.expm1(poisson.logsf(n_arr, d.lam) - log_z),
                   0.0)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(n) == 0 else out


def cpoisson_quantile(d: CensoredPoisson, q: float) -> int:
    """Smallest n >= lower with CDF(n) >= q; the median is quantile(0.5)."""
    if not 0.0 < q < 1.0:
        raise DataError("quantile level must lie in (0, 1)")
    _log_normalizer(d)  # propagate the empty-support error up front
    lo = d.lower
    block = support_length(d.lam)
    while True:
        ns = np.arange(lo, lo + block)
        cdf = cpoisson_cdf(d, ns)
        hit = np.nonzero(cdf >= q)[0]
        if hit.size:
            return int(ns[hit[0]])
        lo += block


def cpoisson_quantiles(d: CensoredPoisson, qs) -> list[int]:
    return [cpoisson_quantile(d, q) for q in qs]


@dataclass(frozen=True)
class Forecast:
    week: int
    horizon: int
    point: int
    dist: CensoredPoisson


@dataclass(frozen=True)
class ForecastSet:
    """Point and distributional forecasts issued from one anchor week."""

    anchor_week: int
    retrospective: bool
    para: IccFit
    logi: LogisticFit
    forecasts: tuple[Forecast, ...]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def rolling_forecast(season: IncidenceSeries, t0: int, horizons: int = 4,
                     retrospective: bool = False) -> ForecastSet:
    """Fit on season data through week t0 and forecast weeks t0+1 .. t0+horizons.

    Point forecasts are the fitted logistic values rounded to the closest
    integer and never below the cumulative total already reported at t0.
    In retrospective mode each horizon's censoring bound is the realized
    cumulative count at the week before the target (held at the season total
    once the season has ended); in live mode, where those counts are unknown,
    the bound is the anchor-week total.
    """
    if horizons < 1:
        raise DataError("horizons must be >= 1")
    if t0 < season.start_week + 2 or t0 > season.end_week:
        raise DataError(
            f"anchor {t0} needs at least 3 weeks of data within "
            f"[{season.start_week}, {season.end_week}]")
    window = season.slice(season.start_week, t0)
    try:
        para, logi = fit_season(window)
    except FitError as err:
        raise FitError(f"week {t0}: {err}") from err
    full_cum = cumulative(season)
    r_anchor = full_cum.value_at(t0)

    def realized(week: int) -> int:
        return full_cum.value_at(min(week, season.end_week))

    forecasts = []
    for h in range(1, horizons + 1):
        target = t0 + h
        lam = max(predict_cumulative(logi, target), 1e-12)
        point = max(_round_half_up(lam), r_anchor)
        lower = realized(target - 1) if retrospective else r_anchor
        forecasts.append(Forecast(week=target, horizon=h, point=point,
                                  dist=CensoredPoisson(lam=lam, lower=lower)))
    return ForecastSet(anchor_week=t0, retrospective=retrospective,
                       para=para, logi=logi, forecasts=tuple(forecasts))


def forecast_set_to_dict(fset: ForecastSet) -> dict:
    rows = []
    for f in fset.forecasts:
        q05, q25, q50, q75, q95 = cpoisson_quantiles(f.dist, (0.05, 0.25, 0.5, 0.75, 0.95))
        rows.append({"week": f.week, "horizon": f.horizon, "point": f.point,
                     "lambda": f.dist.lam, "lower": f.dist.lower,
                     "quantiles": {"q05": q05, "q25": q25, "q50": q50,
                                   "q75": q75, "q95": q95}})
    return {"anchor_week": fset.anchor_week,
            "retrospective": fset.retrospective,
            "fit": {"w": fset.para.w, "l0": fset.para.l0, "rss": fset.para.rss,
                    "delta": fset.logi.delta, "mu": fset.logi.mu},
            "forecasts": rows}


def pmf_grid(fset: ForecastSet, tail_q: float = 0.9995) -> list[tuple[int, int, float]]:
    """(week, count, probability) rows for every forecast week, for heat-map plots."""
    rows = []
    for f in fset.forecasts:
        hi = cpoisson_quantile(f.dist, tail_q) + 2
        ns = np.arange(f.dist.lower, hi + 1)
        probs = cpoisson_pmf(f.dist, ns)
        rows.extend((f.week, int(n), float(p)) for n, p in zip(ns, probs))
    return rows
