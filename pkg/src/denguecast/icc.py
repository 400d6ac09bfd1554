"""Two-parameter growth-curve fitting.

The weekly rate of new cases plotted against cumulative cases follows an
inverted parabola dC/dt = W*C*(L0 - C); equivalently the cumulative
trajectory is logistic in time, C_t = L0 / (1 + exp(-delta*(t - mu))) with
delta = W*L0.  The parabola yields the final-size estimate L0, after which
the logistic is fitted in the time domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import FitError
from .timeseries import IncidenceSeries, cumulative

#: smallest admissible growth-rate constant when a fit collapses
W_FLOOR = 1e-8


@dataclass(frozen=True)
class IccPoint:
    """One week on the rate-vs-cumulative plane."""

    c: float   # cumulative cases through the week
    dc: float  # new cases during the week


@dataclass(frozen=True)
class IccFit:
    w: float    # growth-rate constant, 1/(cases*week)
    l0: float   # final epidemic size, cases
    rss: float  # residual sum of squares of the rate parabola


@dataclass(frozen=True)
class LogisticFit:
    l0: float     # final size, cases
    delta: float  # growth rate, 1/week
    mu: float     # midpoint week


def icc_points(season: IncidenceSeries) -> list[IccPoint]:
    """Pair each week's cumulative total with that week's new-case count."""
    cum = cumulative(season).cumulative
    return [IccPoint(float(c), float(x)) for c, x in zip(cum, season.new_cases)]


def _parabola_rss(points, w, l0) -> float:
    return float(sum((p.dc - w * p.c * (l0 - p.c)) ** 2 for p in points))


def _one_parameter_w(points, l0) -> float:
    """Least-squares W with the final size held fixed."""
    num = sum(p.c * (l0 - p.c) * p.dc for p in points)
    den = sum((p.c * (l0 - p.c)) ** 2 for p in points)
    if den <= 0 or num <= 0:
        return W_FLOOR
    return max(num / den, W_FLOOR)


def fit_parabola(points: list[IccPoint], s: float) -> IccFit:
    """Least-squares fit of dc = a*c + b*c^2 through the origin; W = -b, L0 = -a/b.

    ``s`` is the total number of reported cases; the returned final size is
    clamped to at least s + 1 and W to a small positive floor.  When the
    unconstrained parabola opens upward (or is otherwise inadmissible) the
    fit falls back to L0 = 2s with a one-parameter refit of W, so a forecast
    exists even on pre-inflection data.
    """
    usable = [p for p in points if p.c > 0]
    if len(usable) < 3:
        raise FitError("fewer than 3 usable points")
    if s < max(p.c for p in usable):
        raise FitError("total cases below the largest cumulative point")
    if len({p.c for p in usable}) < 2:
        raise FitError("degenerate design: all c equal")

    c = np.array([p.c for p in usable])
    dc = np.array([p.dc for p in usable])
    s2, s3, s4 = (c ** 2).sum(), (c ** 3).sum(), (c ** 4).sum()
    r1, r2 = (c * dc).sum(), (c ** 2 * dc).sum()
    det = s2 * s4 - s3 * s3
    w = l0 = None
    if det > 0:
        a = (r1 * s4 - s3 * r2) / det
        b = (s2 * r2 - s3 * r1) / det
        if b < 0:
            w, l0 = -b, -a / b
    if w is None:
        l0 = max(2.0 * s, s + 1.0)
        w = _one_parameter_w(usable, l0)
    l0 = max(l0, s + 1.0)
    w = max(w, W_FLOOR)
    return IccFit(w=w, l0=l0, rss=_parabola_rss(points, w, l0))


def fit_logistic_curve(weeks, cum, l0: float) -> LogisticFit:
    """Fit (delta, mu) with L0 fixed, via OLS on logit(C_t/L0) = delta*(t - mu).

    Only weeks with 0 < C_t < L0 enter the regression.
    """
    weeks = np.asarray(weeks, dtype=float)
    cum = np.asarray(cum, dtype=float)
    mask = (cum > 0) & (cum < l0)
    t = weeks[mask]
    c = cum[mask]
    if len(t) < 2:
        raise FitError("fewer than 2 usable weeks")
    if np.ptp(t) == 0:
        raise FitError("zero time-variance among usable weeks")
    y = np.log(c) - np.log(l0 - c)
    tbar, ybar = t.mean(), y.mean()
    slope = float(np.dot(t - tbar, y - ybar) / np.dot(t - tbar, t - tbar))
    if slope <= 0:
        raise FitError("nonpositive growth rate (zero slope)")
    mu = tbar - ybar / slope
    return LogisticFit(l0=float(l0), delta=slope, mu=float(mu))


def fit_logistic(season: IncidenceSeries, l0: float) -> LogisticFit:
    """Time-domain logistic fit of a season's cumulative counts with L0 fixed."""
    cum = cumulative(season)
    if l0 <= cum.total:
        raise FitError("final size must exceed the observed cumulative total")
    return fit_logistic_curve(np.arange(season.start_week, season.end_week + 1),
                              cum.cumulative, l0)


def predict_cumulative(fit: LogisticFit, t) -> float:
    """Cumulative cases at week t under the fitted logistic; L0/2 at t = mu."""
    value = fit.l0 * expit(fit.delta * (np.asarray(t, dtype=float) - fit.mu))
    return float(value) if np.ndim(t) == 0 else value


def fit_season(season: IncidenceSeries) -> tuple[IccFit, LogisticFit]:
    """Full fitting cascade used by the forecast pipeline.

    The parabola is fitted to weeks that actually reported new cases: a
    zero-count week re-plots an existing cumulative level at rate zero,
    which contradicts the quadratic rate law at any interior C and drags
    the final-size estimate away from the data.  Sparse early-season data
    falls through to the full point set and then to the L0 = 2S fallback.
    The time-domain fit likewise degrades to the model-consistency relation
    delta = W*L0, anchored at the latest cumulative observation, when the
    logit regression is degenerate.
    """
    points = icc_points(season)
    s = float(season.total)
    para = None
    for subset in ([p for p in points if p.dc > 0], [p for p in points if p.c > 0]):
        try:
            para = fit_parabola(subset, s)
            break
        except FitError:
            continue
    if para is None:
        usable = [p for p in points if p.c > 0]
        if not usable:
            raise FitError("no informative points: season has no cases")
        l0 = max(2.0 * s, s + 1.0)
        w = _one_parameter_w(usable, l0)
        para = IccFit(w=w, l0=l0, rss=_parabola_rss(points, w, l0))
    try:
        logi = fit_logistic(season, para.l0)
    except FitError:
        delta = para.w * para.l0
        mu = season.end_week + math.log(para.l0 / s - 1.0) / delta
        logi = LogisticFit(l0=para.l0, delta=delta, mu=mu)
    return para, logi


def fit_to_dict(para: IccFit, logi: LogisticFit) -> dict:
    return {"w": para.w, "l0": para.l0, "delta": logi.delta,
            "mu": logi.mu, "rss": para.rss}
