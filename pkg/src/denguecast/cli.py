"""Command-line pipelines: segment, forecast, bayes, evaluate, simulate, correlate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
The ICC_LOG environment variable sets the log level (e.g. INFO, DEBUG).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import report
from .bayes import (BayesConfig, diagnose_chain_set, posterior_summary,
                    predictive_cumulative, run_ensemble, write_trace)
from .errors import DataError, FitError
from .evaluate import (BinScheme, ave_distribution, horizon_rmse,
                       lagged_spearman, score_season)
from .icc import fit_parabola, icc_points
from .predictive import forecast_set_to_dict, pmf_grid, rolling_forecast
from .seir import icc_shape_check, load_scenario, run_scenario
from .timeseries import (apply_splits, parse_weekly_csv, seasons_to_dicts,
                         segment_seasons)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

log = logging.getLogger("denguecast")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="denguecast",
                     description="ICC-curve forecasting for weekly outbreak surveillance")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0, help="RNG seed recorded in outputs")
        p.add_argument("--no-figures", dest="figures", action="store_false",
                       help="skip rendering figures")

    def add_season_args(p):
        p.add_argument("--input", required=True, help="weekly CSV with header week,cases")
        p.add_argument("--quiet-weeks", type=int, default=3)
        p.add_argument("--quiet-level", type=int, default=0)
        p.add_argument("--split-week", type=int, action="append", default=[],
                       help="explicit season boundary (repeatable)")

    p = sub.add_parser("segment", help="identify outbreak seasons")
    add_season_args(p)
    add_common(p)

    p = sub.add_parser("forecast", help="point and censored-Poisson forecasts from one anchor week")
    add_season_args(p)
    p.add_argument("--season", type=int, required=True, help="1-based season index")
    p.add_argument("--anchor", type=int, required=True, help="last week of data used for fitting")
    p.add_argument("--horizons", type=int, default=4)
    p.add_argument("--retrospective", action="store_true",
                   help="censor each horizon at the realized previous-week total")
    add_common(p)

    p = sub.add_parser("bayes", help="posterior predictive forecasts with traces and diagnostics")
    add_season_args(p)
    p.add_argument("--season", type=int, required=True)
    p.add_argument("--anchor", type=int, required=True)
    p.add_argument("--horizons", type=int, default=4)
    p.add_argument("--delta-e", type=float, default=0.3)
    p.add_argument("--delta-l", type=float, default=1e6)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--burn-in", type=int, default=10_000)
    p.add_argument("--thin", type=int, default=5)
    p.add_argument("--draws", type=int, default=2_000)
    p.add_argument("--step-o", type=float, default=None)
    p.add_argument("--step-l", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers across target weeks")
    add_common(p)

    p = sub.add_parser("evaluate", help="rolling retrospective forecasts scored against observations")
    add_season_args(p)
    p.add_argument("--season", type=int, required=True)
    p.add_argument("--horizons", type=int, default=4)
    p.add_argument("--bins", type=int, default=1, help="log-score bin width in cases")
    p.add_argument("--open-bin-from", type=int, default=None,
                   help="counts at or above this share one open-ended bin")
    p.add_argument("--ave-tail", type=int, default=None,
                   help="group absolute errors >= this value")
    add_common(p)

    p = sub.add_parser("simulate", help="run a two-strain scenario and check the quadratic rate law")
    p.add_argument("--scenario", required=True, help="key=value scenario file")
    add_common(p)

    p = sub.add_parser("correlate", help="lagged rank correlation of risk against an abundance series")
    p.add_argument("--risk", required=True, help="weekly CSV with header week,value")
    p.add_argument("--abundance", required=True, help="weekly CSV with header week,value")
    p.add_argument("--max-lag", type=int, default=10)
    p.add_argument("--exact", action="store_true",
                   help="exact permutation p-values (small n only)")
    add_common(p)

    return parser


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _season_config(args) -> dict:
    return {"command": args.command, "input": args.input,
            "quiet_weeks": args.quiet_weeks, "quiet_level": args.quiet_level,
            "split_weeks": ",".join(map(str, args.split_week)), "seed": args.seed}


def _select_season(args):
    series = parse_weekly_csv(args.input)
    seasons = apply_splits(segment_seasons(series, args.quiet_weeks, args.quiet_level),
                           args.split_week)
    if not seasons:
        raise DataError("no outbreak season found")
    if not 1 <= args.season <= len(seasons):
        raise DataError(f"season index {args.season} out of range 1..{len(seasons)}")
    return series, seasons, seasons[args.season - 1]


def cmd_segment(args) -> int:
    out = _outdir(args)
    series = parse_weekly_csv(args.input)
    seasons = apply_splits(segment_seasons(series, args.quiet_weeks, args.quiet_level),
                           args.split_week)
    config = _season_config(args)
    report.write_json(out / "seasons.json", {"seasons": seasons_to_dicts(seasons)}, config)
    if args.figures:
        report.plot_seasons(series, seasons, out / "seasons.png")
    log.info("segment: %d season(s) -> %s", len(seasons), out)
    return EXIT_OK


def cmd_forecast(args) -> int:
    out = _outdir(args)
    _, _, season = _select_season(args)
    fset = rolling_forecast(season.series, args.anchor, horizons=args.horizons,
                            retrospective=args.retrospective)
    config = _season_config(args) | {"season": args.season, "anchor": args.anchor,
                                     "horizons": args.horizons,
                                     "retrospective": args.retrospective}
    report.write_json(out / "forecasts.json", forecast_set_to_dict(fset), config)
    grid = pmf_grid(fset)
    report.write_csv(out / "pmf_grid.csv", ["week", "count", "probability"],
                     grid, config)
    if args.figures:
        report.plot_pmf_grid(grid, [(f.week, f.point) for f in fset.forecasts],
                             out / "forecast_pmf.png")
        report.plot_forecast_curve(season.series.slice(season.first_week, args.anchor),
                                   fset, out / "forecast_curve.png")
    log.info("forecast: anchor %d -> %s", args.anchor, out)
    return EXIT_OK


def _bayes_target(payload):
    window, target, config = payload
    chain_set = run_ensemble(window, target, config)
    return chain_set


def cmd_bayes(args) -> int:
    out = _outdir(args)
    _, _, season = _select_season(args)
    if not season.first_week + 2 <= args.anchor <= season.last_week:
        raise DataError(f"anchor {args.anchor} needs at least 3 weeks of season data")
    window = season.series.slice(season.first_week, args.anchor)
    config = BayesConfig(delta_e=args.delta_e, delta_l=args.delta_l,
                         chains=args.chains, burn_in=args.burn_in,
                         thin=args.thin, draws=args.draws,
                         step_o=args.step_o, step_l=args.step_l, seed=args.seed)
    targets = [args.anchor + h for h in range(1, args.horizons + 1)]
    jobs = max(1, args.jobs)
    payloads = [(window, t, config) for t in targets]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(targets))) as pool:
            chain_sets = list(pool.map(_bayes_target, payloads))
    else:
        chain_sets = [_bayes_target(p) for p in payloads]

    run_config = _season_config(args) | {
        "season": args.season, "anchor": args.anchor, "horizons": args.horizons,
        **{k: v for k, v in config.to_dict().items()}}
    summaries = []
    for target, chain_set in zip(targets, chain_sets):
        sample = predictive_cumulative(chain_set, target)
        if sample.dropped_fraction > 0.05:
            log.warning("week %d: %.1f%% of posterior draws failed the logistic refit",
                        target, 100 * sample.dropped_fraction)
        summaries.append(posterior_summary(chain_set, sample))
        write_trace(chain_set, out / f"trace_week{target}.jsonl")
        _write_posterior_density(out / f"posterior_week{target}.csv",
                                 sample.pooled, run_config)
        reports = diagnose_chain_set(chain_set, sample)
        report.write_json(out / f"diagnostics_week{target}.json",
                          {"week": target,
                           "acceptance": [float(a) for a in chain_set.acceptance],
                           "scalars": {k: r.to_dict() for k, r in reports.items()}},
                          run_config)
        if args.figures:
            report.plot_posterior(sample.pooled, target, out / f"posterior_week{target}.png")
            report.plot_traces(sample.per_chain, target, out / f"trace_week{target}.png")
    report.write_json(out / "posterior.json",
                      {"anchor_week": args.anchor, "targets": summaries}, run_config)
    log.info("bayes: anchor %d, %d target week(s) -> %s", args.anchor, len(targets), out)
    return EXIT_OK


def _write_posterior_density(path, values: np.ndarray, config: dict) -> None:
    from scipy.stats import gaussian_kde

    lo = int(np.floor(values.min()))
    hi = int(np.ceil(values.max()))
    cases = np.arange(lo, hi + 1)
    edges = np.arange(lo, hi + 2) - 0.5
    hist, _ = np.histogram(values, bins=edges, density=True)
    if np.ptp(values) > 0:
        kde = gaussian_kde(values, bw_method="silverman")(cases.astype(float))
    else:
        kde = np.zeros_like(cases, dtype=float)
    rows = [(int(c), float(h), float(k)) for c, h, k in zip(cases, hist, kde)]
    report.write_csv(path, ["cases", "hist_density", "kde_density"], rows, config)


def cmd_evaluate(args) -> int:
    out = _outdir(args)
    _, _, season = _select_season(args)
    bins = BinScheme(width=args.bins, open_from=args.open_bin_from)
    rows = score_season(season.series, horizons=args.horizons, bins=bins)
    config = _season_config(args) | {"season": args.season, "horizons": args.horizons,
                                     "bins": args.bins,
                                     "open_bin_from": args.open_bin_from,
                                     "ave_tail": args.ave_tail}
    report.write_csv(out / "evaluation.csv",
                     ["week", "horizon", "point", "observed", "abs_error", "log_score"],
                     [(r.week, r.horizon, r.point, r.observed, r.abs_error,
                       f"{r.log_score:.6f}") for r in rows],
                     config)
    rmse_by_h = horizon_rmse(rows)
    summary = {f"rmse_{h}wk": rmse_by_h[h] for h in sorted(rmse_by_h)}
    summary["n_forecasts"] = len(rows)
    summary["mean_log_score"] = float(np.mean([r.log_score for r in rows]))
    ave_rows = []
    ave_json = {}
    for h in sorted({r.horizon for r in rows}):
        dist = ave_distribution([(r.point, r.observed) for r in rows if r.horizon == h],
                                tail_from=args.ave_tail)
        ave_json[f"{h}wk"] = {"errors": dist.labels(),
                              "pmf": list(dist.pmf), "cdf": list(dist.cdf)}
        ave_rows.extend((h, label, f"{p:.6f}", f"{c:.6f}")
                        for label, p, c in zip(dist.labels(), dist.pmf, dist.cdf))
        if args.figures:
            report.plot_ave(dist, out / f"ave_h{h}.png")
    report.write_csv(out / "ave_distribution.csv",
                     ["horizon", "abs_error", "pmf", "cdf"], ave_rows, config)
    report.write_json(out / "summary.json", {"rmse": summary, "ave": ave_json}, config)
    if args.figures:
        report.plot_predicted_vs_observed(rows, out / "predicted_vs_observed.png")
    log.info("evaluate: %d scored forecasts -> %s", len(rows), out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = _outdir(args)
    scenario = load_scenario(args.scenario)
    traj, incidence = run_scenario(scenario)
    config = {"command": "simulate", "scenario": args.scenario, "seed": args.seed}
    rows = []
    for idx, week in enumerate(traj.weeks):
        cases = incidence.new_cases[idx - 1] if idx >= 1 else 0
        rows.append((int(week),) + tuple(f"{v:.10e}" for v in traj.states[idx]) + (cases,))
    report.write_csv(out / "trajectory.csv",
                     ["week", "s", "i1", "r1", "i2", "r2", "d", "y1", "y2", "r",
                      "v1", "v2", "new_cases"],
                     rows, config)
    payload = {"weeks": int(traj.weeks[-1]), "dt": scenario.dt,
               "population": scenario.population,
               "total_cases": incidence.total,
               "peak_week": int(incidence.weeks[int(np.argmax(incidence.new_cases))]),
               "clamp_events": traj.clamp_events}
    try:
        r2, delta_rel = icc_shape_check(incidence)
        payload["shape_check"] = {"parabola_r_squared": r2,
                                  "delta_relative_error": delta_rel}
    except (DataError, FitError) as err:
        payload["shape_check"] = {"skipped": str(err)}
    report.write_json(out / "simulate.json", payload, config)
    if args.figures:
        report.plot_seir(traj, incidence, out / "seir_trajectory.png")
        if "parabola_r_squared" in payload["shape_check"]:
            pts = [p for p in icc_points(incidence) if p.dc > 0]
            para = fit_parabola(pts, float(incidence.total))
            report.plot_icc_shape(pts, para, out / "icc_shape.png")
    log.info("simulate: %d weeks, %d cases -> %s", payload["weeks"],
             incidence.total, out)
    return EXIT_OK


def _read_weekly_values(path) -> tuple[int, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file: {path}")
    weeks, values = [], []
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or header[0].strip().lower() != "week" or len(header) < 2:
            raise DataError(f"{path}: expected header 'week,<value>'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                weeks.append(int(row[0]))
                values.append(float(row[1]))
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: malformed row {row!r}") from None
    if not weeks:
        raise DataError(f"{path}: no data rows")
    if any(b != a + 1 for a, b in zip(weeks, weeks[1:])):
        raise DataError(f"{path}: weeks must be consecutive")
    return weeks[0], np.array(values)


def cmd_correlate(args) -> int:
    out = _outdir(args)
    risk_start, risk = _read_weekly_values(args.risk)
    ab_start, abundance = _read_weekly_values(args.abundance)
    start = max(risk_start, ab_start)
    end = min(risk_start + len(risk), ab_start + len(abundance))
    if end <= start:
        raise DataError("risk and abundance series do not overlap")
    risk = risk[start - risk_start:end - risk_start]
    abundance = abundance[start - ab_start:end - ab_start]
    rows = lagged_spearman(risk, abundance, args.max_lag, exact=args.exact)
    config = {"command": "correlate", "risk": args.risk, "abundance": args.abundance,
              "max_lag": args.max_lag, "exact": args.exact, "seed": args.seed}
    report.write_csv(out / "lagged_spearman.csv", ["lag", "n", "rho", "p_value"],
                     [(r.lag, r.n,
                       "" if r.rho is None else f"{r.rho:.6f}",
                       "" if r.p_value is None else f"{r.p_value:.6g}") for r in rows],
                     config)
    if args.figures:
        report.plot_lagged_correlation(rows, out / "lagged_spearman.png")
    log.info("correlate: lags 0..%d over %d weeks -> %s", args.max_lag,
             len(risk), out)
    return EXIT_OK


_COMMANDS = {
    "segment": cmd_segment,
    "forecast": cmd_forecast,
    "bayes": cmd_bayes,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "correlate": cmd_correlate,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ICC_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as err:
        print(f"denguecast: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as err:
        print(f"denguecast: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, FloatingPointError) as err:
        print(f"denguecast: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


#: spec-facing alias: run(argv) -> exit code
run = main


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
