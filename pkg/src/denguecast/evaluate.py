"""Forecast evaluation: RMSE, absolute-error distributions, logarithmic score,
and lagged rank correlation against auxiliary weekly series."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata
from scipy.stats import t as student_t

from .errors import DataError
from .predictive import CensoredPoisson, cpoisson_cdf, rolling_forecast
from .timeseries import IncidenceSeries, cumulative

LOG_SCORE_FLOOR = -10.0


def rmse(pairs) -> float:
    """Root mean square error over (point, observed) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise DataError("no forecast pairs")
    sq = [(float(p) - float(o)) ** 2 for p, o in pairs]
    return math.sqrt(sum(sq) / len(sq))


def mean_abs_error(pairs) -> float:
    pairs = list(pairs)
    if not pairs:
        raise DataError("no forecast pairs")
    return sum(abs(float(p) - float(o)) for p, o in pairs) / len(pairs)


@dataclass(frozen=True)
class AveDistribution:
    """Empirical pmf/cdf of absolute forecast errors, largest errors groupable."""

    errors: tuple[int, ...]   # distinct error values in increasing order
    pmf: tuple[float, ...]
    cdf: tuple[float, ...]
    tail_from: int | None     # errors >= tail_from are pooled in the last entry

    def labels(self) -> list[str]:
        out = [str(e) for e in self.errors]
        if self.tail_from is not None:
            out[-1] = f">={self.tail_from}"
        return out


def ave_distribution(pairs, tail_from: int | None = None) -> AveDistribution:
    """Distribution of |point - observed| with an optional grouped tail bucket."""
    pairs = list(pairs)
    if not pairs:
        raise DataError("no forecast pairs")
    errors = [abs(int(round(p)) - int(o)) for p, o in pairs]
    if tail_from is not None:
        errors = [min(e, tail_from) for e in errors]
    values = sorted(set(errors))
    n = len(errors)
    pmf = [errors.count(v) / n for v in values]
    cdf = list(itertools.accumulate(pmf))
    cdf[-1] = 1.0  # kill round-off so the cdf ends exactly at 1
    grouped = tail_from if (tail_from is not None and values and values[-1] == tail_from) else None
    return AveDistribution(errors=tuple(values), pmf=tuple(pmf),
                           cdf=tuple(cdf), tail_from=grouped)


@dataclass(frozen=True)
class BinScheme:
    """Integer-count bins used by the logarithmic score.

    Unit-width bins by default; counts at or above ``open_from`` share one
    open-ended bin (the style used in public forecasting challenges).
    """

    width: int = 1
    open_from: int | None = None

    def __post_init__(self):
        if self.width < 1:
            raise DataError("bin width must be >= 1")

    def bin_of(self, observed: int) -> tuple[int, int | None]:
        """[lo, hi) bin containing the observation; hi is None for the open tail."""
        if observed < 0:
            raise DataError("observed count must be >= 0")
        if self.open_from is not None and observed >= self.open_from:
            return self.open_from, None
        lo = (observed // self.width) * self.width
        return lo, lo + self.width


def _bin_mass(dist, lo: int, hi: int | None) -> float:
    if isinstance(dist, CensoredPoisson):
        upper = 1.0 if hi is None else cpoisson_cdf(dist, hi - 1)
        lower = cpoisson_cdf(dist, lo - 1) if lo > 0 else 0.0
        return max(upper - lower, 0.0)
    samples = np.asarray(dist, dtype=float)
    if samples.size == 0:
        raise DataError("empty predictive sample")
    inside = samples >= lo if hi is None else (samples >= lo) & (samples < hi)
    return float(inside.mean())


def log_score(dist, observed: int, bins: BinScheme = BinScheme()) -> float:
    """Log predictive mass on the bin containing the observation, floored at -10.

    ``dist`` is either a CensoredPoisson or an array of posterior predictive
    samples (for which the mass is the fraction of samples in the bin).
    """
    lo, hi = bins.bin_of(int(observed))
    mass = _bin_mass(dist, lo, hi)
    if mass <= 0.0:
        return LOG_SCORE_FLOOR
    return max(math.log(min(mass, 1.0)), LOG_SCORE_FLOOR)


@dataclass(frozen=True)
class LagCorrelation:
    lag: int
    n: int
    rho: float | None
    p_value: float | None


def _spearman(x: np.ndarray, y: np.ndarray, exact: bool) -> tuple[float | None, float | None]:
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return None, None
    rx = rankdata(x)  # midranks: ties get average ranks
    ry = rankdata(y)
    rho = float(np.corrcoef(rx, ry)[0, 1])
    n = len(x)
    if exact:
        if n > 9:
            raise DataError("exact permutation p-value limited to n <= 9")
        hits = 0
        total = 0
        for perm in itertools.permutations(ry):
            r = float(np.corrcoef(rx, np.array(perm))[0, 1])
            hits += abs(r) >= abs(rho) - 1e-12
            total += 1
        return rho, hits / total
    if abs(rho) >= 1.0:
        return rho, 0.0
    tstat = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, float(2.0 * student_t.sf(abs(tstat), n - 2))


def lagged_spearman(risk, abundance, max_lag: int, exact: bool = False) -> list[LagCorrelation]:
    """Rank correlation of abundance at week w with risk at week w + lag.

    Both inputs are weekly series aligned on the same week axis.  Every lag
    from 0 to max_lag must leave at least 5 overlapping pairs.
    """
    risk = np.asarray(risk, dtype=float)
    abundance = np.asarray(abundance, dtype=float)
    if max_lag < 0:
        raise DataError("max_lag must be >= 0")
    out = []
    for lag in range(max_lag + 1):
        n = min(len(abundance), len(risk) - lag)
        if n < 5:
            raise DataError(f"lag {lag}: overlap {max(n, 0)} is below the minimum of 5")
        rho, p = _spearman(abundance[:n], risk[lag:lag + n], exact)
        out.append(LagCorrelation(lag=lag, n=n, rho=rho, p_value=p))
    return out


@dataclass(frozen=True)
class ScoredForecast:
    week: int
    horizon: int
    point: int
    observed: int
    abs_error: int
    log_score: float


def observed_cumulative(season: IncidenceSeries, week: int) -> int:
    """Realized cumulative count at a week, held at the total after season end."""
    cum = cumulative(season)
    if week < season.start_week:
        raise DataError(f"week {week} precedes the season")
    return cum.value_at(min(week, season.end_week))


def score_season(season: IncidenceSeries, horizons: int = 4,
                 bins: BinScheme = BinScheme(),
                 anchors=None) -> list[ScoredForecast]:
    """Retrospective rolling forecasts over a season, scored against observations.

    Anchors default to every week from the third week of data through the
    week before season end; targets past the end score against the final
    season total.
    """
    if anchors is None:
        anchors = range(season.start_week + 2, season.end_week)
    rows = []
    for t0 in anchors:
        fset = rolling_forecast(season, t0, horizons=horizons, retrospective=True)
        for f in fset.forecasts:
            observed = observed_cumulative(season, f.week)
            rows.append(ScoredForecast(
                week=f.week, horizon=f.horizon, point=f.point, observed=observed,
                abs_error=abs(f.point - observed),
                log_score=log_score(f.dist, observed, bins)))
    return rows


def horizon_rmse(rows: list[ScoredForecast]) -> dict[int, float]:
    out = {}
    for h in sorted({r.horizon for r in rows}):
        out[h] = rmse([(r.point, r.observed) for r in rows if r.horizon == h])
    return out
