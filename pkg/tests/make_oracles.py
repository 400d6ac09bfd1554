"""Regenerate the frozen reference values in tests/oracle_values.json.

Every value is computed by a deliberately plain, independent route (direct
summation, textbook formulas, scalar loops) so the library can be checked
against numbers that never touched its own code paths.  Run from the
repository root:

    python tests/make_oracles.py

The "seir_benchmark" block is different: those are self-recorded regression
baselines produced by the simulator itself (see test_acceptance.py) and are
left untouched by this script if already present.
"""

import json
import math
from pathlib import Path

import numpy as np

import _fixtures as fx

OUT = Path(__file__).resolve().parent / "oracle_values.json"


# ---------------------------------------------------------------------------
# censored Poisson by direct summation

def _poisson_logpmf(n, lam):
    return -lam + n * math.log(lam) - math.lgamma(n + 1)


def _log_tail_sum(lam, lower):
    """log sum of Poisson terms for k >= lower, summed term by term."""
    upper = int(lower + 20.0 * (1.0 + math.sqrt(lam)) + 200)
    logs = [_poisson_logpmf(k, lam) for k in range(lower, upper + 1)]
    peak = max(logs)
    return peak + math.log(sum(math.exp(v - peak) for v in logs))


def censored_pmf_reference(n, lam, lower):
    if n < lower:
        return 0.0
    return math.exp(_poisson_logpmf(n, lam) - _log_tail_sum(lam, lower))


def censored_quantile_reference(q, lam, lower):
    total = 0.0
    n = lower
    while True:
        total += censored_pmf_reference(n, lam, lower)
        if total >= q:
            return n
        n += 1


# ---------------------------------------------------------------------------
# reflected random-walk Metropolis on a standard normal target

def mh_reference(seed=fx.CHAIN_SEED, n=100_000, step=2.4):
    rng = np.random.default_rng(seed)
    incs = rng.normal(0.0, step, n)
    logu = np.log(rng.random(n))
    x = 0.0
    logp = 0.0
    accepted = 0
    for i in range(n):
        y = x + incs[i]
        logq = -0.5 * y * y
        if logu[i] < logq - logp:
            x, logp = y, logq
            accepted += 1
    return accepted / n


# ---------------------------------------------------------------------------
# MCMC diagnostics, textbook formulas

def oracle_split_rhat(chains):
    halves = []
    for c in chains:
        h = len(c) // 2
        halves.append(np.asarray(c[:h], dtype=float))
        halves.append(np.asarray(c[h:2 * h], dtype=float))
    halves = np.asarray(halves)
    n = halves.shape[1]
    within = halves.var(axis=1, ddof=1).mean()
    between = n * np.var(halves.mean(axis=1), ddof=1)
    var_hat = (n - 1) / n * within + between / n
    return math.sqrt(var_hat / within)


def _batch_means_se2(window):
    window = np.asarray(window, dtype=float)
    bs = max(1, math.isqrt(len(window)))
    nb = len(window) // bs
    means = window[: nb * bs].reshape(nb, bs).mean(axis=1)
    return np.var(means, ddof=1) / nb


def oracle_geweke(chain, first=0.1, last=0.5):
    chain = np.asarray(chain, dtype=float)
    n = len(chain)
    head = chain[: int(first * n)]
    tail = chain[n - int(last * n):]
    return (head.mean() - tail.mean()) / math.sqrt(
        _batch_means_se2(head) + _batch_means_se2(tail)
    )


def oracle_ess(chain):
    x = np.asarray(chain, dtype=float)
    n = len(x)
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))

    def rho(k):
        if k == 0:
            return 1.0
        return float(np.dot(xc[:-k], xc[k:])) / denom

    tau = -1.0
    m = 0
    while 2 * m + 1 < n:
        gamma = rho(2 * m) + rho(2 * m + 1)
        if gamma <= 0.0:
            break
        tau += 2.0 * gamma
        m += 1
    if tau <= 0.0:
        return float(n)
    return min(n / tau, float(n))


# ---------------------------------------------------------------------------
# noisy-parabola refit via numpy lstsq (origin-constrained quadratic)

def parabola_reference():
    c, dc = fx.noisy_parabola_points()
    design = np.column_stack([c, c * c])
    coef, *_ = np.linalg.lstsq(design, dc, rcond=None)
    a, b = coef
    return {"w": -b, "l0": -a / b}


def main():
    values = {}
    if OUT.exists():
        values = json.loads(OUT.read_text())

    values["censored_poisson"] = {
        "pmf_lam2_lower0_n0": censored_pmf_reference(0, 2.0, 0),
        "pmf_lam2_lower2_n2": censored_pmf_reference(2, 2.0, 2),
        "quantile_lam2_lower0_q50": censored_quantile_reference(0.5, 2.0, 0),
        "quantile_lam5_lower8_q50": censored_quantile_reference(0.5, 5.0, 8),
    }

    values["mh_acceptance_rate_step2.4"] = mh_reference()

    iid = fx.iid_chains()
    shifted = fx.shifted_chains()
    ar = fx.ar1_chains()
    trend = fx.trend_chain()
    values["diagnostics"] = {
        "rhat_iid": oracle_split_rhat(iid),
        "rhat_shifted": oracle_split_rhat(shifted),
        "geweke_iid_chain0": oracle_geweke(iid[0]),
        "geweke_trend": oracle_geweke(trend),
        "ess_iid_chain0": oracle_ess(iid[0]),
        "ess_ar09_chain0": oracle_ess(ar[0.9][0]),
        "ess_ar05_chain0": oracle_ess(ar[0.5][0]),
        "ess_ar09_pooled": sum(oracle_ess(c) for c in ar[0.9]),
    }

    values["noisy_parabola"] = parabola_reference()

    OUT.write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")
    for key, val in values.items():
        print(f"  {key}: {val}")


if __name__ == "__main__":
    main()
