"""File emitters for the CLI: delimited tables, JSON summaries, and figures.

Every artifact embeds the effective configuration (including the seed) so a
run can be reproduced byte for byte: JSON outputs carry a ``config`` field,
CSV outputs a ``# key=value`` comment header.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.stats import gaussian_kde

from .evaluate import AveDistribution, LagCorrelation, ScoredForecast
from .timeseries import IncidenceSeries, cumulative


def _config_lines(config: dict) -> list[str]:
    return [f"# {key}={config[key]}" for key in sorted(config)]


def write_csv(path, header: list[str], rows, config: dict) -> Path:
    path = Path(path)
    with path.open("w", newline="") as handle:
        for line in _config_lines(config):
            handle.write(line + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_json(path, payload: dict, config: dict) -> Path:
    path = Path(path)
    body = dict(payload)
    body["config"] = config
    path.write_text(json.dumps(body, indent=2) + "\n")
    return path


# ---------------------------------------------------------------------------
# figures


def _save(fig, path) -> Path:
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_seasons(series: IncidenceSeries, seasons, path) -> Path:
    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.bar(series.weeks, series.new_cases, width=0.9, color="0.35")
    for season in seasons:
        ax.axvspan(season.first_week - 0.5, season.last_week + 0.5,
                   alpha=0.2, color="tab:orange")
    ax.set_xlabel("week")
    ax.set_ylabel("new cases")
    ax.set_title("weekly cases with outbreak seasons")
    fig.tight_layout()
    return _save(fig, path)


def plot_pmf_grid(grid_rows, points, path) -> Path:
    """Heat map of per-week predictive pmfs with point forecasts overlaid."""
    weeks = sorted({w for w, _, _ in grid_rows})
    counts = sorted({n for _, n, _ in grid_rows})
    z = np.zeros((len(counts), len(weeks)))
    widx = {w: i for i, w in enumerate(weeks)}
    nidx = {n: i for i, n in enumerate(counts)}
    for w, n, p in grid_rows:
        z[nidx[n], widx[w]] = p
    fig, ax = plt.subplots(figsize=(6, 4))
    mesh = ax.pcolormesh(weeks, counts, z, cmap="Blues", shading="nearest")
    fig.colorbar(mesh, ax=ax, label="probability")
    if points:
        ax.plot([w for w, _ in points], [p for _, p in points], "k^",
                label="point forecast")
        ax.legend(loc="upper left")
    ax.set_xlabel("week")
    ax.set_ylabel("cumulative cases")
    fig.tight_layout()
    return _save(fig, path)


def plot_forecast_curve(season: IncidenceSeries, fset, path) -> Path:
    from .icc import predict_cumulative

    cum = cumulative(season)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(list(season.weeks), cum.cumulative, "ko", label="observed cumulative")
    grid = np.linspace(season.start_week, fset.forecasts[-1].week + 1, 200)
    ax.plot(grid, predict_cumulative(fset.logi, grid), "-", color="tab:blue",
            label="fitted trajectory")
    ax.plot([f.week for f in fset.forecasts], [f.point for f in fset.forecasts],
            "r^", label="point forecast")
    ax.axvline(fset.anchor_week + 0.5, color="0.6", ls="--", lw=1)
    ax.set_xlabel("week")
    ax.set_ylabel("cumulative cases")
    ax.legend(loc="upper left")
    fig.tight_layout()
    return _save(fig, path)


def plot_posterior(values: np.ndarray, week: int, path, observed=None) -> Path:
    """Histogram at integer resolution plus a Silverman-bandwidth KDE."""
    values = np.asarray(values, dtype=float)
    lo = int(np.floor(values.min()))
    hi = int(np.ceil(values.max())) + 1
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=np.arange(lo, hi + 1) - 0.5, density=True,
            color="0.75", label="posterior sample")
    if np.ptp(values) > 0:
        kde = gaussian_kde(values, bw_method="silverman")
        grid = np.linspace(lo - 1, hi + 1, 400)
        ax.plot(grid, kde(grid), color="tab:blue", label="kernel density")
    if observed is not None:
        ax.axvline(observed, color="tab:red", ls="--", label="observed")
    ax.set_xlabel(f"cumulative cases, week {week}")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_traces(per_chain: np.ndarray, week: int, path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for k, chain in enumerate(per_chain):
        ax.plot(chain, lw=0.6, label=f"chain {k}")
    ax.set_xlabel("retained draw")
    ax.set_ylabel(f"predictive cumulative, week {week}")
    ax.legend(ncol=len(per_chain), fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_predicted_vs_observed(rows: list[ScoredForecast], path) -> Path:
    horizons = sorted({r.horizon for r in rows})
    fig, axes = plt.subplots(1, len(horizons), figsize=(3.2 * len(horizons), 3.4),
                             squeeze=False)
    for ax, h in zip(axes[0], horizons):
        sub = [r for r in rows if r.horizon == h]
        obs = [r.observed for r in sub]
        pts = [r.point for r in sub]
        top = max(obs + pts + [1])
        ax.plot([0, top], [0, top], "r--", lw=1)
        ax.plot(obs, pts, "o", ms=4, alpha=0.7)
        ax.set_title(f"{h}-week ahead")
        ax.set_xlabel("observed")
        ax.set_ylabel("predicted")
    fig.tight_layout()
    return _save(fig, path)


def plot_ave(dist: AveDistribution, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(range(len(dist.errors)), dist.pmf, color="0.4")
    ax.set_xticks(range(len(dist.errors)), dist.labels())
    ax.set_xlabel("absolute error (cases)")
    ax.set_ylabel("fraction of forecasts")
    fig.tight_layout()
    return _save(fig, path)


def plot_seir(traj, incidence: IncidenceSeries, path) -> Path:
    from .seir import STATE_FIELDS

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.8))
    for i, name in enumerate(STATE_FIELDS):
        ax1.plot(traj.weeks, traj.states[:, i], label=name, lw=1)
    ax1.set_xlabel("week")
    ax1.set_ylabel("population fraction")
    ax1.legend(ncol=4, fontsize=7)
    ax2.bar(incidence.weeks, incidence.new_cases, width=0.9, color="0.35")
    ax2.set_xlabel("week")
    ax2.set_ylabel("new cases")
    fig.tight_layout()
    return _save(fig, path)


def plot_icc_shape(points, para, path) -> Path:
    cs = np.array([p.c for p in points])
    dcs = np.array([p.dc for p in points])
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(cs, dcs, "ko", ms=4, label="weekly points")
    grid = np.linspace(0, para.l0, 300)
    ax.plot(grid, para.w * grid * (para.l0 - grid), "-", color="tab:blue",
            label="fitted parabola")
    ax.set_xlabel("cumulative cases")
    ax.set_ylabel("new cases per week")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_lagged_correlation(rows: list[LagCorrelation], path) -> Path:
    lags = [r.lag for r in rows if r.rho is not None]
    rhos = [r.rho for r in rows if r.rho is not None]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.bar(lags, rhos, color="0.4")
    ax.axhline(0, color="k", lw=0.8)
    ax.set_xlabel("lag (weeks)")
    ax.set_ylabel("rank correlation")
    fig.tight_layout()
    return _save(fig, path)
