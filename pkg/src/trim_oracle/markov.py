"""Steady-state analytics for the Trim-modified uniform random workload.

The number of In-Use LBAs evolves as a Markov birth-death chain: a Trim
removes one In-Use LBA with probability q, a write to a not-In-Use LBA adds
one, and a rewrite of an In-Use LBA leaves the count unchanged.  This module
provides the exact stationary distribution of that chain together with its
Stirling and Gaussian approximations, the higher-order moment corrections,
and the effective-overprovisioning summary that feeds the write-amplification
models.

All density arithmetic is carried out in log space; the factorial-like
products overflow doubles long before realistic device sizes otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "TrimParams",
    "SteadyDistribution",
    "EffectiveOverprovisioning",
    "transition_probs",
    "exact_pdf",
    "stirling_log_pdf",
    "stirling_pdf",
    "gaussian_pdf",
    "skewness",
    "excess_kurtosis",
    "effective_overprovisioning",
    "rho_eff",
    "STIRLING_SHIFT",
    "GAUSSIAN_SHIFT",
]

# Half-bin location corrections, calibrated once by minimizing the sup-norm
# distance to the exact pdf at u=1000, q=0.4.  The shifted Stirling form is
# then indistinguishable from exact (sup norm ~2e-8); the Gaussian keeps its
# exact mean, where both its sup norm and its KS distance are near-optimal.
STIRLING_SHIFT = 0.5
GAUSSIAN_SHIFT = 0.0


@dataclass(frozen=True)
class TrimParams:
    """Workload parameters of the In-Use chain.

    Attributes
    ----------
    user_lbas : int
        Number of host-visible LBAs (u).
    trim_prob : float
        Probability q that a request is a Trim, in [0, 0.5).  The chain has
        no stationary distribution concentrated below u for q >= 0.5.
    """

    user_lbas: int
    trim_prob: float

    def __post_init__(self):
        if self.user_lbas < 1:
            raise ValueError(f"user_lbas must be >= 1, got {self.user_lbas}")
        if not 0.0 <= self.trim_prob < 0.5:
            raise ValueError(f"trim_prob must be in [0, 0.5), got {self.trim_prob}")

    @property
    def s(self) -> float:
        """Steady-state probability that a write targets an In-Use LBA."""
        q = self.trim_prob
        return (1.0 - 2.0 * q) / (1.0 - q)

    @property
    def sbar(self) -> float:
        """Steady-state probability that a write targets a not-In-Use LBA."""
        q = self.trim_prob
        return q / (1.0 - q)

    @property
    def sigma2(self) -> float:
        """Variance of the In-Use count at steady state."""
        return self.user_lbas * self.sbar

    @property
    def mean_in_use(self) -> float:
        """Mean In-Use count at steady state (u * s)."""
        return self.user_lbas * self.s


def transition_probs(x: int, params: TrimParams) -> tuple[float, float, float]:
    """One-step transition probabilities (down, stay, up) from state x.

    The downward mass is the Trim probability q for x >= 1.  At x = 0 there
    is nothing to Trim; that mass folds into the self-loop, mirroring the
    workload generator which converts a Trim drawn against an empty In-Use
    set into a write.
    """
    u = params.user_lbas
    q = params.trim_prob
    if not 0 <= x <= u:
        raise ValueError(f"state x must be in [0, {u}], got {x}")
    stay = (x / u) * (1.0 - q)
    up = ((u - x) / u) * (1.0 - q)
    if x == 0:
        return 0.0, stay + q, up
    return q, stay, up


@dataclass
class SteadyDistribution:
    """A discrete distribution over the In-Use count 0..u.

    ``log_weights`` are normalized (logsumexp == 0); ``probs`` is the
    exponentiated version.  ``shift`` records the half-bin location
    correction that was applied before normalization.
    """

    user_lbas: int
    method: str  # "exact" | "stirling" | "gaussian"
    shift: float
    log_weights: np.ndarray = field(repr=False)
    probs: np.ndarray = field(repr=False)

    @classmethod
    def from_unnormalized(cls, user_lbas, method, shift, log_weights):
        lw = np.asarray(log_weights, dtype=float)
        lw = lw - logsumexp(lw)
        return cls(user_lbas, method, shift, lw, np.exp(lw))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.user_lbas + 1)

    def mean(self) -> float:
        return float(self.probs @ self.support)

    def variance(self) -> float:
        c = self.support - self.mean()
        return float(self.probs @ c**2)

    def skewness(self) -> float:
        c = self.support - self.mean()
        var = float(self.probs @ c**2)
        return float(self.probs @ c**3) / var**1.5

    def excess_kurtosis(self) -> float:
        c = self.support - self.mean()
        var = float(self.probs @ c**2)
        return float(self.probs @ c**4) / var**2 - 3.0

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def ks_distance(self, other: "SteadyDistribution") -> float:
        """Kolmogorov-Smirnov distance between the two CDFs."""
        return float(np.max(np.abs(self.cdf() - other.cdf())))

    def sup_norm_distance(self, other: "SteadyDistribution") -> float:
        """Largest per-point probability difference."""
        return float(np.max(np.abs(self.probs - other.probs)))


def _delta_at(u: int, x: int, method: str) -> SteadyDistribution:
    lw = np.full(u + 1, -np.inf)
    lw[x] = 0.0
    probs = np.zeros(u + 1)
    probs[x] = 1.0
    return SteadyDistribution(u, method, 0.0, lw, probs)


def exact_pdf(params: TrimParams) -> SteadyDistribution:
    """Exact stationary pdf of the In-Use chain.

    The unnormalized log-weight of state x is accumulated as

        x * log((1-q)/q) + sum_{i=0}^{x-1} log(u - i) - x * log(u)

    and normalized with logsumexp.  q = 0 degenerates to a point mass at u
    (every LBA ends up In-Use and stays there).
    """
    u = params.user_lbas
    q = params.trim_prob
    if q == 0.0:
        return _delta_at(u, u, "exact")
    falling = np.zeros(u + 1)
    falling[1:] = np.cumsum(np.log(u - np.arange(u, dtype=float)))
    x = np.arange(u + 1)
    lw = x * (np.log(1.0 - q) - np.log(q)) + falling - x * np.log(u)
    return SteadyDistribution.from_unnormalized(u, "exact", 0.0, lw)


def stirling_log_pdf(params: TrimParams, x, shift: float = STIRLING_SHIFT):
    """Unnormalized Stirling-form log-density evaluated at x (scalar or array).

    The continuous form is -(u-x')*log((u-x')/(u*sbar)) + (u-x') with
    x' = x - shift; the removable singularity at x' = u is evaluated by its
    limit, 0.
    """
    u = params.user_lbas
    y = u - (np.asarray(x, dtype=float) - shift)
    out = np.zeros_like(y)
    pos = y > 0.0
    yp = y[pos]
    out[pos] = -yp * np.log(yp / (u * params.sbar)) + yp
    if out.ndim == 0:
        return float(out)
    return out


def stirling_pdf(params: TrimParams, shift: float = STIRLING_SHIFT) -> SteadyDistribution:
    """Stirling approximation of the stationary pdf, normalized over 0..u."""
    u = params.user_lbas
    if params.trim_prob == 0.0:
        return _delta_at(u, u, "stirling")
    lw = stirling_log_pdf(params, np.arange(u + 1), shift)
    return SteadyDistribution.from_unnormalized(u, "stirling", shift, lw)


def gaussian_pdf(params: TrimParams, shift: float = GAUSSIAN_SHIFT) -> SteadyDistribution:
    """Discrete Gaussian approximation with mean u*s + shift, variance u*sbar."""
    u = params.user_lbas
    if params.trim_prob == 0.0:
        return _delta_at(u, u, "gaussian")
    x = np.arange(u + 1)
    lw = -((x - (params.mean_in_use + shift)) ** 2) / (2.0 * params.sigma2)
    return SteadyDistribution.from_unnormalized(u, "gaussian", shift, lw)


def skewness(params: TrimParams) -> float:
    """Leading-order skewness of the In-Use count, -1/sigma."""
    sigma2 = params.sigma2
    if sigma2 <= 0.0:
        raise ValueError("skewness undefined for sigma = 0 (q = 0)")
    return -1.0 / np.sqrt(sigma2)


def excess_kurtosis(params: TrimParams) -> float:
    """Leading-order excess kurtosis of the In-Use count, 3/(4 sigma^2)."""
    sigma2 = params.sigma2
    if sigma2 <= 0.0:
        raise ValueError("excess kurtosis undefined for sigma = 0 (q = 0)")
    return 3.0 / (4.0 * sigma2)


@dataclass(frozen=True)
class EffectiveOverprovisioning:
    """Trim-adjusted overprovisioning summary.

    ``mean_spare_factor`` is sbar + s * S_f: the share of physical pages not
    holding valid data once Trim keeps part of the LBA space not-In-Use.
    ``rho_eff`` is the matching (t-u)/u-style measure used by the
    write-amplification models, and ``u_eff`` the mean In-Use count.
    """

    mean_spare_factor: float
    var_spare_factor: float
    rho_eff: float
    u_eff: float


def rho_eff(rho: float, trim_prob: float) -> float:
    """Effective overprovisioning ratio (1 + rho)/s - 1."""
    if rho <= 0.0:
        raise ValueError(f"rho must be > 0, got {rho}")
    if not 0.0 <= trim_prob < 0.5:
        raise ValueError(f"trim_prob must be in [0, 0.5), got {trim_prob}")
    s = (1.0 - 2.0 * trim_prob) / (1.0 - trim_prob)
    return (1.0 + rho) / s - 1.0


def effective_overprovisioning(
    spare_factor: float, trim_prob: float, total_pages: int
) -> EffectiveOverprovisioning:
    """Effective spare factor statistics for a device with S_f = spare_factor.

    The mean depends only on S_f and q; the variance sbar*(1-S_f)/t also
    carries the absolute device size and vanishes as t grows.
    """
    if not 0.0 <= spare_factor < 1.0:
        raise ValueError(f"spare_factor must be in [0, 1), got {spare_factor}")
    if not 0.0 <= trim_prob < 0.5:
        raise ValueError(f"trim_prob must be in [0, 0.5), got {trim_prob}")
    if total_pages < 1:
        raise ValueError(f"total_pages must be >= 1, got {total_pages}")
    q = trim_prob
    s = (1.0 - 2.0 * q) / (1.0 - q)
    sbar = q / (1.0 - q)
    u = total_pages * (1.0 - spare_factor)
    rho = spare_factor / (1.0 - spare_factor)
    return EffectiveOverprovisioning(
        mean_spare_factor=sbar + s * spare_factor,
        var_spare_factor=sbar * (1.0 - spare_factor) / total_pages,
        rho_eff=(1.0 + rho) / s - 1.0,
        u_eff=u * s,
    )
