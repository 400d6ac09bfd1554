"""Bayesian predictive model over latent weekly counts and the final size.

Reported counts are treated as noisy observations of latent true counts with
a non-negative truncated-Gaussian prior; the final size gets a truncated
Gaussian centred on the curve-fit estimate.  The likelihood is the logistic
infection-time density evaluated at the forecast week, with the logistic
parameters recomputed from the latent state exactly as in the point pipeline.
Sampling is random-walk Metropolis with proposals reflected into the
admissible region, which keeps the proposal symmetric.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, log_ndtr

from .diagnostics import DiagnosticReport, diagnose
from .errors import DataError, FitError
from .icc import fit_season
from .timeseries import IncidenceSeries

MIN_ACCEPTANCE_RATE = 0.01


@dataclass(frozen=True)
class BayesConfig:
    """Sampler and prior settings.

    ``delta_e`` and ``delta_l`` are the observation-noise and final-size
    prior variances; burn-in counts *accepted* draws, after which every
    ``thin``-th iteration is retained until ``draws`` states are stored per
    chain.  Step sizes default to sqrt(delta_e) per latent count and
    max(1, 0.05 * L0_hat) for the final size, the latter capped at three
    prior standard deviations so a deliberately tight prior cannot stall
    the walk.
    """

    delta_e: float = 0.3
    delta_l: float = 1e6
    chains: int = 4
    burn_in: int = 10_000
    thin: int = 5
    draws: int = 2_000
    step_o: float | None = None
    step_l: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.delta_e <= 0 or self.delta_l <= 0:
            raise DataError("prior variances must be positive")
        if self.chains < 2:
            raise DataError("need at least 2 chains")
        if self.thin < 1 or self.draws < 1 or self.burn_in < 0:
            raise DataError("invalid sampler settings")

    def resolved_steps(self, l0_hat: float) -> tuple[float, float]:
        step_o = self.step_o if self.step_o is not None else math.sqrt(self.delta_e)
        if self.step_l is not None:
            step_l = self.step_l
        else:
            step_l = min(max(1.0, 0.05 * l0_hat), 3.0 * math.sqrt(self.delta_l))
        if step_o <= 0 or step_l <= 0:
            raise DataError("step sizes must be positive")
        return step_o, step_l

    def to_dict(self) -> dict:
        return {"delta_e": self.delta_e, "delta_l": self.delta_l,
                "chains": self.chains, "burn_in": self.burn_in,
                "thin": self.thin, "draws": self.draws,
                "step_o": self.step_o, "step_l": self.step_l, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class PosteriorState:
    """Latent weekly counts and final size, the sampled parameter vector."""

    o: np.ndarray
    l: float

    def __post_init__(self):
        o = np.asarray(self.o, dtype=float)
        if o.ndim != 1 or len(o) == 0:
            raise DataError("latent counts must form a non-empty vector")
        object.__setattr__(self, "o", o)


def reflect(v, lo):
    """Fold values below ``lo`` back into [lo, inf); an involution on proposals.

    An infinite lower bound leaves values untouched (unbounded coordinate).
    """
    v = np.asarray(v, dtype=float)
    lo = np.asarray(lo, dtype=float)
    with np.errstate(invalid="ignore"):
        folded = lo + np.abs(v - lo)
    return np.where(np.isneginf(lo), v, folded)


def reflected_random_walk(log_density, x0, n_steps: int, step, rng,
                          lower=-np.inf):
    """Generic reflected-walk Metropolis sampler over a vector state.

    Useful for step-size tuning and for validating the accept rule against
    simple targets.  Returns (samples, acceptance_rate); samples has shape
    (n_steps, len(x0)).
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    logp = float(log_density(x))
    samples = np.empty((n_steps, len(x)))
    accepted = 0
    for i in range(n_steps):
        prop = reflect(x + rng.normal(0.0, step, x.shape), lower)
        prop_logp = float(log_density(prop))
        if math.log(rng.random()) < prop_logp - logp:
            x, logp = prop, prop_logp
            accepted += 1
        samples[i] = x
    return samples, accepted / n_steps


class LogisticPosterior:
    """Unnormalized log posterior of (latent counts, final size) given one target week.

    Vectorized over batches of states so an ensemble of chains can be
    advanced in lockstep.
    """

    def __init__(self, season: IncidenceSeries, target_week: int,
                 config: BayesConfig, l0_hat: float | None = None):
        if len(season) < 3:
            raise DataError("need at least 3 weeks of data")
        if target_week <= season.end_week:
            raise DataError("target week must follow the data")
        self.season = season
        self.target_week = int(target_week)
        self.config = config
        self.x = np.asarray(season.new_cases, dtype=float)
        self.weeks = np.arange(season.start_week, season.end_week + 1, dtype=float)
        self.s = float(self.x.sum())
        if l0_hat is None:
            l0_hat = fit_season(season)[0].l0
        self.l0_hat = float(l0_hat)
        sd_e = math.sqrt(config.delta_e)
        sd_l = math.sqrt(config.delta_l)
        # truncation normalizers: P(N(x_i, delta_e) >= 0) and P(N(L0_hat, delta_l) >= S)
        self._log_const = float(
            -0.5 * len(self.x) * math.log(2.0 * math.pi * config.delta_e)
            - log_ndtr(self.x / sd_e).sum()
            - 0.5 * math.log(2.0 * math.pi * config.delta_l)
            - log_ndtr((self.l0_hat - self.s) / sd_l)
        )

    def fit_params(self, o: np.ndarray, l: np.ndarray):
        """Logistic (delta, mu) refitted from latent cumulative counts, batched.

        Returns (delta, mu, ok); rows with a degenerate fit have ok False.
        """
        o = np.atleast_2d(o)
        l = np.atleast_1d(np.asarray(l, dtype=float))
        ccum = np.cumsum(o, axis=1)
        lcol = l[:, None]
        mask = (ccum > 0.0) & (ccum < lcol)
        m = mask.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(mask, np.log(ccum) - np.log(lcol - ccum), 0.0)
        tw = self.weeks
        st = (mask * tw).sum(axis=1)
        stt = (mask * tw * tw).sum(axis=1)
        sy = y.sum(axis=1)
        sty = (y * tw).sum(axis=1)
        det = m * stt - st * st
        safe = np.where(det > 0, det, 1.0)
        delta = (m * sty - st * sy) / safe
        ok = (m >= 2) & (det > 0) & (delta > 0)
        safe_delta = np.where(delta > 0, delta, 1.0)
        intercept = (sy - delta * st) / np.maximum(m, 1)
        mu = -intercept / safe_delta
        return delta, mu, ok

    def log_density(self, o: np.ndarray, l: np.ndarray) -> np.ndarray:
        o = np.atleast_2d(np.asarray(o, dtype=float))
        l = np.atleast_1d(np.asarray(l, dtype=float))
        delta, mu, ok = self.fit_params(o, l)
        valid = ok & (l >= self.s) & (o >= 0.0).all(axis=1)
        u = -np.where(valid, delta, 1.0) * (self.target_week - mu)
        loglik = (np.log(np.where(valid, delta, 1.0)) + u
                  - 2.0 * np.logaddexp(0.0, u))
        logp_o = -0.5 * ((o - self.x) ** 2).sum(axis=1) / self.config.delta_e
        logp_l = -0.5 * (l - self.l0_hat) ** 2 / self.config.delta_l
        return np.where(valid, loglik + logp_o + logp_l + self._log_const, -np.inf)


def log_posterior(state: PosteriorState, t: int, data: IncidenceSeries,
                  config: BayesConfig, l0_hat: float | None = None) -> float:
    """Unnormalized log posterior density of one state; -inf outside the support."""
    post = LogisticPosterior(data, t, config, l0_hat)
    return float(post.log_density(state.o[None, :], np.array([state.l]))[0])


def mh_step(state: PosteriorState, rng: np.random.Generator,
            posterior: LogisticPosterior,
            step_o: float, step_l: float,
            current_logp: float | None = None) -> tuple[PosteriorState, bool]:
    """One reflected random-walk Metropolis update of (o, l)."""
    p = len(state.o)
    o_prop = reflect(state.o + rng.normal(0.0, step_o, p), 0.0)
    l_prop = float(reflect(state.l + rng.normal(0.0, step_l), posterior.s))
    log_u = math.log(rng.random())
    if current_logp is None:
        current_logp = float(posterior.log_density(state.o[None, :],
                                                   np.array([state.l]))[0])
    prop_logp = float(posterior.log_density(o_prop[None, :], np.array([l_prop]))[0])
    if math.isinf(current_logp) and current_logp < 0:
        accept = prop_logp > -math.inf
    else:
        accept = log_u < prop_logp - current_logp
    if accept:
        return PosteriorState(o=o_prop, l=l_prop), True
    return state, False


@dataclass
class ChainSet:
    """Retained post-burn-in draws from independent chains, plus run metadata."""

    season: IncidenceSeries
    target_week: int
    config: BayesConfig
    l0_hat: float
    o: np.ndarray           # (chains, draws, p)
    l: np.ndarray           # (chains, draws)
    iters: np.ndarray       # (chains, draws) iteration at which each draw was kept
    acceptance: np.ndarray  # (chains,) accepted / total iterations

    @property
    def n_chains(self) -> int:
        return self.o.shape[0]

    @property
    def s(self) -> float:
        return float(sum(self.season.new_cases))

    def posterior(self) -> LogisticPosterior:
        return LogisticPosterior(self.season, self.target_week, self.config, self.l0_hat)


def run_ensemble(data: IncidenceSeries, t: int, config: BayesConfig) -> ChainSet:
    """Run independent reflected-walk chains and return their retained draws.

    Chains start from jittered data; each discards its first ``burn_in``
    accepted draws, then keeps every ``thin``-th iteration until ``draws``
    states are stored.  Fully deterministic given the seed: chain k draws
    from its own generator seeded by (seed, k).
    """
    post = LogisticPosterior(data, t, config)
    x, s, p = post.x, post.s, len(post.x)
    step_o, step_l = config.resolved_steps(post.l0_hat)
    n_chains = config.chains
    rngs = [np.random.default_rng([config.seed, k]) for k in range(n_chains)]

    o = np.empty((n_chains, p))
    l = np.empty(n_chains)
    for k, rng in enumerate(rngs):
        o[k] = x + np.abs(rng.normal(0.0, 1.0, p))
        l[k] = max(post.l0_hat + abs(rng.normal(0.0, math.sqrt(config.delta_l) / 10.0)), s)
    logp = post.log_density(o, l)

    kept_o = [[] for _ in range(n_chains)]
    kept_l = [[] for _ in range(n_chains)]
    kept_iter = [[] for _ in range(n_chains)]
    accepted = np.zeros(n_chains, dtype=int)
    post_iters = np.full(n_chains, -1, dtype=int)
    if config.burn_in == 0:
        post_iters[:] = 0
    cap = 100 * config.burn_in + 20 * config.draws * config.thin
    o_inc = np.empty((n_chains, p))
    l_inc = np.empty(n_chains)
    log_u = np.empty(n_chains)

    total_iters = 0
    while any(len(kept_l[k]) < config.draws for k in range(n_chains)):
        if total_iters >= cap:
            raise FitError("stuck chain; retune step sizes")
        total_iters += 1
        for k, rng in enumerate(rngs):
            o_inc[k] = rng.normal(0.0, step_o, p)
            l_inc[k] = rng.normal(0.0, step_l)
            log_u[k] = math.log(rng.random())
        prop_o = np.abs(o + o_inc)
        prop_l = s + np.abs(l + l_inc - s)
        prop_logp = post.log_density(prop_o, prop_l)
        with np.errstate(invalid="ignore"):
            accept = np.where(np.isneginf(logp), prop_logp > -np.inf,
                              log_u < prop_logp - logp)
        o[accept] = prop_o[accept]
        l[accept] = prop_l[accept]
        logp[accept] = prop_logp[accept]
        accepted += accept
        for k in range(n_chains):
            if post_iters[k] < 0:
                if accepted[k] >= config.burn_in:
                    post_iters[k] = 0
            else:
                post_iters[k] += 1
                if post_iters[k] % config.thin == 0 and len(kept_l[k]) < config.draws:
                    kept_o[k].append(o[k].copy())
                    kept_l[k].append(l[k])
                    kept_iter[k].append(total_iters)

    rates = accepted / total_iters
    if np.any(rates < MIN_ACCEPTANCE_RATE):
        raise FitError("stuck chain; retune step sizes")
    return ChainSet(
        season=data, target_week=int(t), config=config, l0_hat=post.l0_hat,
        o=np.array(kept_o), l=np.array(kept_l),
        iters=np.array(kept_iter), acceptance=rates,
    )


@dataclass
class PredictiveSample:
    """Posterior predictive cumulative counts at one week, pooled over chains."""

    week: int
    per_chain: np.ndarray   # (chains, draws)
    mean: float
    median: float
    q005: float
    q995: float
    dropped_fraction: float

    @property
    def pooled(self) -> np.ndarray:
        return self.per_chain[np.isfinite(self.per_chain)].ravel()


def predictive_cumulative(chain_set: ChainSet, t: int) -> PredictiveSample:
    """Map every retained state through the refitted logistic at week t.

    States whose refit degenerates are dropped and counted; pooled summaries
    are the mean, median, and equal-tailed central 99% range.
    """
    post = chain_set.posterior()
    n_chains, draws, _ = chain_set.o.shape
    values = np.empty((n_chains, draws))
    dropped = 0
    for k in range(n_chains):
        delta, mu, ok = post.fit_params(chain_set.o[k], chain_set.l[k])
        vals = chain_set.l[k] * expit(delta * (t - mu))
        values[k] = np.where(ok, vals, np.nan)
        dropped += int((~ok).sum())
    pooled = values[np.isfinite(values)]
    if pooled.size == 0:
        raise FitError("no retained state admits a logistic refit")
    return PredictiveSample(
        week=int(t), per_chain=values,
        mean=float(pooled.mean()), median=float(np.median(pooled)),
        q005=float(np.quantile(pooled, 0.005)),
        q995=float(np.quantile(pooled, 0.995)),
        dropped_fraction=dropped / values.size,
    )


def latent_streams(chain_set: ChainSet) -> dict[str, np.ndarray]:
    """Per-chain scalar streams of each latent weekly count, keyed by week."""
    weeks = range(chain_set.season.start_week, chain_set.season.end_week + 1)
    return {f"o_week_{w}": chain_set.o[:, :, i] for i, w in enumerate(weeks)}


def diagnose_chain_set(chain_set: ChainSet,
                       sample: PredictiveSample | None = None) -> dict[str, DiagnosticReport]:
    """Diagnostics on the predictive cumulative count and every latent count."""
    if sample is None:
        sample = predictive_cumulative(chain_set, chain_set.target_week)
    streams = {"c_pred": sample.per_chain}
    streams.update(latent_streams(chain_set))
    return {name: diagnose(chains) for name, chains in streams.items()}


def posterior_summary(chain_set: ChainSet, sample: PredictiveSample | None = None) -> dict:
    """The JSON-ready predictive summary for the chain set's target week."""
    if sample is None:
        sample = predictive_cumulative(chain_set, chain_set.target_week)
    report = diagnose(sample.per_chain)
    return {
        "week": sample.week,
        "mean": sample.mean,
        "median": sample.median,
        "q005": sample.q005,
        "q995": sample.q995,
        "ess": report.ess_pooled,
        "rhat": report.rhat,
        "geweke": report.max_abs_geweke,
        "dropped_fraction": sample.dropped_fraction,
    }


def write_trace(chain_set: ChainSet, path) -> None:
    """Line-delimited JSON trace: one retained state per line."""
    path = Path(path)
    with path.open("w") as handle:
        for k in range(chain_set.n_chains):
            for j in range(chain_set.o.shape[1]):
                handle.write(json.dumps({
                    "chain": k,
                    "iter": int(chain_set.iters[k, j]),
                    "l": float(chain_set.l[k, j]),
                    "o": [float(v) for v in chain_set.o[k, j]],
                }) + "\n")


def load_trace(path) -> dict[str, np.ndarray]:
    """Read a trace file back into (chains, draws, ...) arrays."""
    records: dict[int, list[dict]] = {}
    with Path(path).open() as handle:
        for line in handle:
            rec = json.loads(line)
            records.setdefault(int(rec["chain"]), []).append(rec)
    if not records:
        raise DataError(f"{path}: empty trace")
    chains = sorted(records)
    lengths = {len(records[k]) for k in chains}
    if len(lengths) != 1:
        raise DataError(f"{path}: chains have unequal retained lengths")
    o = np.array([[rec["o"] for rec in records[k]] for k in chains])
    l = np.array([[rec["l"] for rec in records[k]] for k in chains])
    iters = np.array([[rec["iter"] for rec in records[k]] for k in chains])
    return {"o": o, "l": l, "iters": iters}
