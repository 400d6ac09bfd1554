"""denguecast: data-parsimonious dengue outbreak forecasting.

Weekly case counts are the only input.  The rate of new cases against
cumulative cases is fitted as an inverted parabola, the cumulative
trajectory as a logistic curve; forecasts are issued as censored-Poisson
distributions, optionally refined by a Bayesian model over latent counts
and the final epidemic size.  A two-strain host-vector simulator provides
synthetic outbreaks for validating the quadratic rate law.
"""

from .bayes import (BayesConfig, ChainSet, LogisticPosterior, PosteriorState,
                    PredictiveSample, diagnose_chain_set, load_trace,
                    log_posterior, mh_step, posterior_summary,
                    predictive_cumulative, reflect, run_ensemble, write_trace)
from .diagnostics import DiagnosticReport, diagnose, ess_iat, geweke_z, split_rhat
from .errors import DataError, FitError
from .evaluate import (AveDistribution, BinScheme, LagCorrelation,
                       ScoredForecast, ave_distribution, horizon_rmse,
                       lagged_spearman, log_score, mean_abs_error,
                       observed_cumulative, rmse, score_season)
from .icc import (IccFit, IccPoint, LogisticFit, fit_logistic,
                  fit_logistic_curve, fit_parabola, fit_season, icc_points,
                  predict_cumulative)
from .predictive import (CensoredPoisson, Forecast, ForecastSet, cpoisson_cdf,
                         cpoisson_pmf, cpoisson_quantile, pmf_grid,
                         rolling_forecast)
from .seir import (Scenario, SeirParams, SeirState, Trajectory, derivatives,
                   icc_shape_check, integrate, load_scenario, run_scenario,
                   weekly_incidence)
from .timeseries import (CumulativeSeries, IncidenceSeries, OutbreakSeason,
                         apply_splits, cumulative, parse_weekly_csv,
                         segment_seasons, split_season)

__version__ = "0.1.0"
