"""Chain summaries and MCMC quality metrics (ACF, ESS, credible bands)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChainStats",
    "DegenerateChainError",
    "InsufficientSamplesError",
    "acf",
    "ess",
    "summarize",
]


class DegenerateChainError(ValueError):
    """Chain has zero variance; autocorrelation is undefined."""


class InsufficientSamplesError(ValueError):
    """Too few accepted samples for a meaningful summary."""


@dataclass
class ChainStats:
    """Per-coordinate posterior summaries plus sampler quality metrics."""

    mean: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    ess_per_coordinate: np.ndarray
    acceptance_rate: float
    wall_time: float
    n_samples: int
    n_accepted: int

    @property
    def ess_min(self) -> float:
        return float(np.nanmin(self.ess_per_coordinate))

    @property
    def ess_median(self) -> float:
        return float(np.nanmedian(self.ess_per_coordinate))

    @property
    def ess_max(self) -> float:
        return float(np.nanmax(self.ess_per_coordinate))

    @property
    def ess_per_second(self) -> float:
        return self.ess_median / self.wall_time if self.wall_time > 0 else float("nan")


def acf(chain: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Biased (1/N-normalized) sample autocorrelation, rho[0] = 1.

    Computed with an FFT of the demeaned, zero-padded chain.
    """
    chain = np.asarray(chain, dtype=np.float64)
    if chain.ndim != 1 or chain.size < 10:
        raise ValueError("chain must be a 1D series with at least 10 entries")
    n = chain.size
    if max_lag is None:
        max_lag = n - 1
    max_lag = min(max_lag, n - 1)
    x = chain - chain.mean()
    var = np.dot(x, x) / n
    if var == 0.0:
        raise DegenerateChainError("chain is constant; autocorrelation undefined")
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, nfft)
    autocov = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1] / n
    return autocov / autocov[0]


def ess(chains: np.ndarray) -> float:
    """Effective sample size from the initial positive sequence of the ACF.

    chains is (M, N) or a single (N,) series.  ACFs are averaged across
    chains, then summed in consecutive pairs (rho_2t + rho_2t+1) up to the
    last strictly positive pair:

        ESS = M*N / (-1 + 2 * sum_t (rho_2t + rho_2t+1)).

    Strongly anticorrelated chains can drive the denominator nonpositive;
    the estimate is then clamped to M*N.
    """
    chains = np.asarray(chains, dtype=np.float64)
    if chains.ndim == 1:
        chains = chains[None, :]
    if chains.ndim != 2:
        raise ValueError("chains must be 1D or 2D (M, N)")
    n_chains, n = chains.shape
    if n < 10:
        raise ValueError("need at least 10 samples per chain")
    rho = np.mean([acf(c) for c in chains], axis=0)
    if rho.size % 2 == 1:
        rho = rho[:-1]
    pair_sums = rho[0::2] + rho[1::2]
    positive = np.flatnonzero(pair_sums <= 0.0)
    cutoff = positive[0] if positive.size else pair_sums.size
    denom = -1.0 + 2.0 * np.sum(pair_sums[:cutoff])
    total = n_chains * n
    if denom <= 0.0:
        return float(total)
    return float(total / denom)


def summarize(result, ci_level: float = 0.95, min_accepted: int = 100) -> ChainStats:
    """Posterior mean, pointwise credible interval and per-coordinate ESS.

    Operates on the post-MH f-space chain (rejections repeat the previous
    state, as usual for MCMC estimators).  Coordinates whose chain is
    constant get ESS reported as NaN.
    """
    n_accepted = result.n_accepted
    if n_accepted < min_accepted:
        raise InsufficientSamplesError(
            f"only {n_accepted} accepted samples; need at least {min_accepted}"
        )
    samples = result.f_samples
    lo = (1.0 - ci_level) / 2.0
    mean = samples.mean(axis=0)
    ci_lower = np.quantile(samples, lo, axis=0)
    ci_upper = np.quantile(samples, 1.0 - lo, axis=0)
    ess_vals = np.empty(samples.shape[1])
    for j in range(samples.shape[1]):
        try:
            ess_vals[j] = ess(samples[:, j])
        except DegenerateChainError:
            ess_vals[j] = np.nan
    return ChainStats(
        mean=mean,
        ci_lower=ci_lower,
        ci_upper=ci_upper,
        ess_per_coordinate=ess_vals,
        acceptance_rate=result.acceptance_rate,
        wall_time=result.wall_time,
        n_samples=samples.shape[0],
        n_accepted=n_accepted,
    )
