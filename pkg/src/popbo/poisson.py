"""Truncated-Poisson probability mass, moments, and the ranking-robustness formula.

A candidate's rank among ``max_rank`` comparison points is modeled by a Poisson
distribution restricted to the support {0, ..., max_rank}:

    pmf(k) = (rate^k / k!) / S(max_rank),   S(m) = sum_{i=0..m} rate^i / i!

The exp(-rate) factor of the plain Poisson cancels between numerator and
normalizer, so it is never evaluated.  All arithmetic runs in log space
(cumulative log-factorial table, log-sum-exp for S) so that rates up to 1e4
neither overflow nor lose the small-probability tail.

Everything here is pure and stateless: no learning, no I/O, no hidden RNG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError

__all__ = [
    "TruncatedPoisson",
    "RankPosterior",
    "pmf",
    "log_pmf",
    "pmf_vector",
    "truncated_mean",
    "truncated_variance",
    "untruncated_mean_variance",
    "correct_ranking_probability",
    "log_factorials",
    "log_partial_exp_sum",
]


def log_factorials(max_k: int) -> np.ndarray:
    """Return the table [log(0!), log(1!), ..., log(max_k!)].

    Args:
        max_k: largest factorial argument, >= 0.

    Returns:
        Array of shape (max_k + 1,) with entry i equal to log(i!).
    """
    if max_k < 0:
        raise DomainError(f"max_k must be >= 0, got {max_k}")
    table = np.zeros(max_k + 1)
    if max_k >= 1:
        table[1:] = np.cumsum(np.log(np.arange(1, max_k + 1, dtype=float)))
    return table


def log_partial_exp_sum(rate, m: int):
    """log S(m) with S(m) = sum_{i=0..m} rate^i / i!, the partial exponential sum.

    Accepts a scalar or an array of rates and broadcasts over them.  By
    convention ``m = -1`` yields -inf (empty sum), which keeps derivative
    identities such as S'(m) = S(m-1) uniform at the boundary.

    Args:
        rate: nonnegative rate(s).
        m: truncation bound of the sum.

    Returns:
        log S(m) as a float for scalar input, else an array of the same shape.
    """
    rates = np.asarray(rate, dtype=float)
    scalar = rates.ndim == 0
    rates = np.atleast_1d(rates)
    if m < 0:
        out = np.full(rates.shape, -np.inf)
        return float(out[0]) if scalar else out
    ks = np.arange(m + 1, dtype=float)
    lf = log_factorials(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.log(rates)
        terms = ks * log_r[..., None] - lf
    # k = 0 contributes rate^0/0! = 1 exactly; overwrite the 0 * log(0) = nan slot.
    terms[..., 0] = 0.0
    out = logsumexp(terms, axis=-1)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class TruncatedPoisson:
    """Poisson distribution renormalized on the ranks {0, ..., max_rank}.

    Attributes:
        rate: nonnegative intensity-times-volume product.
        max_rank: truncation bound, the number of comparison points.
    """

    rate: float
    max_rank: int

    def __post_init__(self):
        if not (isinstance(self.max_rank, (int, np.integer)) and self.max_rank >= 0):
            raise DomainError(f"max_rank must be a nonnegative integer, got {self.max_rank!r}")
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise DomainError(f"rate must be finite and >= 0, got {self.rate!r}")
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "max_rank", int(self.max_rank))

    def pmf(self, k: int) -> float:
        return pmf(self, k)

    def log_pmf(self, k: int) -> float:
        return log_pmf(self, k)

    def pmf_vector(self) -> np.ndarray:
        return pmf_vector(self.rate, self.max_rank)

    def mean(self) -> float:
        return truncated_mean(self)

    def variance(self) -> float:
        return truncated_variance(self)


@dataclass(frozen=True)
class RankPosterior:
    """Predicted rank distribution of a candidate.

    Attributes:
        pmf: probabilities indexed by rank k = 0, 1, ...
        mean: expected rank.
        stddev: reported spread, defined as sqrt(mean) in both regimes.
    """

    pmf: np.ndarray
    mean: float
    stddev: float

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("pmf must be a non-empty vector")
        if p.min() < 0.0:
            raise DomainError("pmf entries must be nonnegative")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise DomainError(f"pmf mass {p.sum()!r} deviates from 1 beyond 1e-12")
        expected = float(np.dot(np.arange(p.size, dtype=float), p))
        if abs(expected - self.mean) > 1e-10:
            raise DomainError(
                f"mean {self.mean!r} deviates from sum(k * pmf) = {expected!r} beyond 1e-10"
            )
        if not math.isclose(self.stddev, math.sqrt(self.mean), rel_tol=1e-12, abs_tol=1e-15):
            raise DomainError("stddev must equal sqrt(mean)")
        object.__setattr__(self, "pmf", p)
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "stddev", float(self.stddev))


def _check_k(dist: TruncatedPoisson, k: int) -> int:
    if not isinstance(k, (int, np.integer)):
        raise DomainError(f"rank k must be an integer, got {k!r}")
    if k < 0 or k > dist.max_rank:
        raise DomainError(f"rank k={k} outside support [0, {dist.max_rank}]")
    return int(k)


def log_pmf(dist: TruncatedPoisson, k: int) -> float:
    """log pmf(k) of the truncated distribution; -inf when rate = 0 and k > 0."""
    k = _check_k(dist, k)
    if dist.rate == 0.0:
        return 0.0 if k == 0 else -np.inf
    lf = log_factorials(max(k, 0))
    log_s = log_partial_exp_sum(dist.rate, dist.max_rank)
    return k * math.log(dist.rate) - float(lf[k]) - log_s


def pmf(dist: TruncatedPoisson, k: int) -> float:
    """Probability that the candidate's rank equals k.

    Args:
        dist: the truncated distribution.
        k: rank in [0, dist.max_rank]; anything outside raises DomainError.

    Returns:
        (rate^k / k!) / S(max_rank), evaluated in log space.
    """
    return float(math.exp(log_pmf(dist, k)))


def pmf_vector(rate: float, max_rank: int) -> np.ndarray:
    """Full pmf over the support {0, ..., max_rank} as an array."""
    dist = TruncatedPoisson(rate, max_rank)
    ks = np.arange(dist.max_rank + 1, dtype=float)
    if dist.rate == 0.0:
        out = np.zeros(dist.max_rank + 1)
        out[0] = 1.0
        return out
    lf = log_factorials(dist.max_rank)
    log_s = log_partial_exp_sum(dist.rate, dist.max_rank)
    log_p = ks * math.log(dist.rate) - lf - log_s
    return np.exp(log_p)


def truncated_mean(dist: TruncatedPoisson) -> float:
    """Expectation of the truncated distribution.

    Equals rate * S(max_rank - 1) / S(max_rank); 0 when max_rank = 0 (all mass
    is pinned at rank 0) or rate = 0.
    """
    if dist.max_rank == 0 or dist.rate == 0.0:
        return 0.0
    log_num = log_partial_exp_sum(dist.rate, dist.max_rank - 1)
    log_den = log_partial_exp_sum(dist.rate, dist.max_rank)
    return float(dist.rate * math.exp(log_num - log_den))


def truncated_variance(dist: TruncatedPoisson) -> float:
    """Exact variance of the truncated distribution (diagnostic only).

    The acquisition functions use sqrt(mean) as the spread; this exposes the
    true second moment for inspection.
    """
    p = pmf_vector(dist.rate, dist.max_rank)
    ks = np.arange(dist.max_rank + 1, dtype=float)
    mu = float(np.dot(ks, p))
    return float(np.dot(ks * ks, p) - mu * mu)


def untruncated_mean_variance(rate: float) -> tuple[float, float]:
    """Plain Poisson moments (mean, variance), both equal to the rate.

    Used in the large-sample regime where truncation is dropped.

    Args:
        rate: nonnegative rate.
    """
    if not (math.isfinite(rate) and rate >= 0):
        raise DomainError(f"rate must be finite and >= 0, got {rate!r}")
    return float(rate), float(rate)


def correct_ranking_probability(gap: float, noise_sigma: float) -> float:
    """Probability that i.i.d. Gaussian observation noise preserves a pairwise order.

    Two points whose true values differ by ``gap`` are observed with
    independent N(0, sigma^2) noise; their difference carries N(0, 2 sigma^2)
    noise, so the observed order matches the true order with probability
    Phi(gap / (sqrt(2) * sigma)).

    Args:
        gap: true value difference f(x2) - f(x1), any finite real.
        noise_sigma: noise standard deviation, > 0.

    Returns:
        Probability in (0, 1).
    """
    if not (math.isfinite(noise_sigma) and noise_sigma > 0):
        raise DomainError(f"noise_sigma must be finite and > 0, got {noise_sigma!r}")
    if not math.isfinite(gap):
        raise DomainError(f"gap must be finite, got {gap!r}")
    # Phi(t) = (1 + erf(t / sqrt 2)) / 2 with t = gap / (sqrt 2 * sigma).
    return 0.5 * (1.0 + math.erf(gap / (2.0 * noise_sigma)))
