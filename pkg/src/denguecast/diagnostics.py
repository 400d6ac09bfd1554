"""Convergence and mixing diagnostics for Markov-chain output.

Split Gelman-Rubin R-hat across chains, Geweke's early-versus-late Z score
within a chain, and effective sample size from the integrated autocorrelation
time with the initial-positive-sequence truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError


def split_rhat(chains) -> float:
    """Potential scale reduction after splitting each chain in half.

    With 2m half-chains of length n, R-hat = sqrt(((n-1)/n * W + B/n) / W)
    where W is the mean within-sequence variance and B the between-sequence
    variance.
    """
    chains = [np.asarray(c, dtype=float) for c in chains]
    if len(chains) < 2:
        raise DataError("need at least 2 chains")
    if any(len(c) < 4 for c in chains):
        raise DataError("each chain needs at least 4 draws")
    halves = []
    for c in chains:
        h = len(c) // 2
        halves.append(c[:h])
        halves.append(c[h:2 * h])
    halves = np.asarray(halves)
    n = halves.shape[1]
    within = halves.var(axis=1, ddof=1).mean()
    if within <= 0:
        raise DataError("degenerate chains")
    between = n * np.var(halves.mean(axis=1), ddof=1)
    var_hat = (n - 1) / n * within + between / n
    return float(math.sqrt(var_hat / within))


def _batch_means_se2(window: np.ndarray) -> float:
    """Squared standard error of the window mean via batch means.

    Batch size floor(sqrt(len)) approximates the spectral density at zero;
    the remainder after the last full batch is dropped.
    """
    bs = max(1, math.isqrt(len(window)))
    nb = len(window) // bs
    if nb < 2:
        raise DataError("window too short for batch means")
    means = window[: nb * bs].reshape(nb, bs).mean(axis=1)
    var = float(np.var(means, ddof=1))
    if var <= 0:
        raise DataError("zero variance in window")
    return var / nb


def geweke_z(chain, first: float = 0.1, last: float = 0.5) -> float:
    """Z score comparing the mean of the early window against the late window."""
    chain = np.asarray(chain, dtype=float)
    n = len(chain)
    if n < 100:
        raise DataError("chain too short for the Geweke diagnostic")
    head = chain[: int(first * n)]
    tail = chain[n - int(last * n):]
    return float((head.mean() - tail.mean())
                 / math.sqrt(_batch_means_se2(head) + _batch_means_se2(tail)))


def _autocorrelations(x: np.ndarray) -> np.ndarray:
    n = len(x)
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    if acov[0] <= 0:
        raise DataError("zero variance")
    return acov / acov[0]


def ess_iat(chain) -> float:
    """n divided by the integrated autocorrelation time, clamped to (0, n].

    The autocorrelation sum is truncated at the first non-positive pair sum
    rho(2m) + rho(2m+1), which bounds the bias for reversible chains.
    """
    chain = np.asarray(chain, dtype=float)
    n = len(chain)
    if n < 10:
        raise DataError("chain too short for an ESS estimate")
    rho = _autocorrelations(chain)
    tau = -1.0
    for m in range(n // 2):
        gamma = rho[2 * m] + rho[2 * m + 1]
        if gamma <= 0:
            break
        tau += 2.0 * gamma
    if tau <= 0:
        return float(n)
    return float(min(n / tau, n))


@dataclass(frozen=True)
class DiagnosticReport:
    """Per-scalar convergence summary across an ensemble of chains."""

    rhat: float
    geweke_z: tuple[float, ...]      # one Z per chain
    ess_per_chain: tuple[float, ...]
    ess_pooled: float

    def to_dict(self) -> dict:
        return {"rhat": self.rhat,
                "geweke_z": list(self.geweke_z),
                "ess_per_chain": list(self.ess_per_chain),
                "ess_pooled": self.ess_pooled}

    @property
    def max_abs_geweke(self) -> float:
        return max(abs(z) for z in self.geweke_z)


def diagnose(chains) -> DiagnosticReport:
    """All three diagnostics for one scalar tracked across several chains."""
    chains = [np.asarray(c, dtype=float) for c in chains]
    ess = tuple(ess_iat(c) for c in chains)
    return DiagnosticReport(
        rhat=split_rhat(chains),
        geweke_z=tuple(geweke_z(c) for c in chains),
        ess_per_chain=ess,
        ess_pooled=float(sum(ess)),
    )
