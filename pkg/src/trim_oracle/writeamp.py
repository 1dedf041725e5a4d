"""Closed-form write-amplification predictors for greedy garbage collection.

Three model families are implemented for the uniform random write workload
(the empirical Hu recurrence, Agarwal's uniform-distribution argument, and
Xiang's Lambert-W solution), each with a Trim-modified variant obtained by
substituting the effective overprovisioning of the Trim-modified workload.
Hot/cold and N-temperature devices with physically separated pools combine
per-temperature predictions with write-ratio weights; the deliberately
naive mixed-pool predictor is kept for divergence studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

__all__ = [
    "WaPrediction",
    "TempSpec",
    "lambert_w0",
    "wa_agarwal",
    "wa_xiang",
    "wa_hu",
    "wa_agarwal_trim",
    "wa_xiang_trim",
    "wa_hu_trim",
    "wa_hot_cold_separated",
    "wa_multi_temp",
    "wa_mixed_naive",
]

_BRANCH_POINT = -1.0 / math.e


def lambert_w0(x: float) -> float:
    """Principal-branch Lambert W on [-1/e, 0].

    Halley iteration seeded with the series around the branch point for
    arguments near -1/e and with w = x elsewhere; converges to a residual
    |w*e^w - x| below 1e-13 in a handful of steps on this interval.
    """
    if x > 0.0 or x < _BRANCH_POINT:
        # allow a hair of rounding slop at the branch point
        if x < 0.0 and x > _BRANCH_POINT - 1e-12:
            x = _BRANCH_POINT
        else:
            raise ValueError(f"lambert_w0 requires x in [-1/e, 0], got {x}")
    if x == 0.0:
        return 0.0
    p2 = 2.0 * (math.e * x + 1.0)
    if p2 <= 0.0:
        return -1.0
    if p2 < 0.5:
        # series at the branch point, Corless et al. style
        p = math.sqrt(p2)
        w = -1.0 + p - p * p / 3.0 + 11.0 * p2 * p / 72.0
    else:
        w = x
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) < 1e-13 * (1.0 + abs(w)):
            break
    if abs(w * math.exp(w) - x) > 1e-12:
        raise ArithmeticError(f"lambert_w0 failed to converge at x={x}")
    return w


@dataclass
class WaPrediction:
    """A write-amplification prediction with its inputs echoed.

    ``below_one`` flags values below 1, which the Agarwal Trim variant can
    produce at high Trim rates; the raw value is reported, never clamped.
    """

    model: str
    value: float
    inputs: dict

    @property
    def below_one(self) -> bool:
        return self.value < 1.0


def _check_rho(rho: float):
    if rho <= 0.0:
        raise ValueError(f"overprovisioning ratio rho must be > 0, got {rho}")


def _check_q(q: float):
    if not 0.0 <= q < 0.5:
        raise ValueError(f"trim probability must be in [0, 0.5), got {q}")


def wa_agarwal(rho: float) -> WaPrediction:
    """Agarwal's closed form (1 + rho) / (2 rho)."""
    _check_rho(rho)
    return WaPrediction("agarwal", (1.0 + rho) / (2.0 * rho), {"rho": rho})


def _xiang_value(y: float) -> float:
    # y = 1 + rho (or its effective counterpart); y > 1
    w = lambert_w0(-y * math.exp(-y))
    return -y / (-y - w)


def wa_xiang(rho: float) -> WaPrediction:
    """Xiang's Lambert-W closed form for uniform random writes."""
    _check_rho(rho)
    return WaPrediction("xiang", _xiang_value(1.0 + rho), {"rho": rho})


def wa_agarwal_trim(rho: float, q: float) -> WaPrediction:
    """Agarwal form at the Trim-effective overprovisioning.

    (1 + rho) / (2 (1 + rho - s)); may legitimately fall below 1 at high q,
    which is reported as-is (see ``WaPrediction.below_one``).
    """
    _check_rho(rho)
    _check_q(q)
    s = (1.0 - 2.0 * q) / (1.0 - q)
    value = (1.0 + rho) / (2.0 * (1.0 + rho - s))
    return WaPrediction("agarwal_trim", value, {"rho": rho, "q": q})


def wa_xiang_trim(rho: float, q: float) -> WaPrediction:
    """Xiang form with (1 + rho)/s in place of 1 + rho."""
    _check_rho(rho)
    _check_q(q)
    s = (1.0 - 2.0 * q) / (1.0 - q)
    return WaPrediction("xiang_trim", _xiang_value((1.0 + rho) / s), {"rho": rho, "q": q})


def _hu_pipeline(t: int, u_model: float, n_p: int, r: int, window: int | None) -> float:
    if n_p < 1 or t < n_p or t % n_p:
        raise ValueError(f"need t a positive multiple of n_p, got t={t}, n_p={n_p}")
    if not 0.0 < u_model < t:
        raise ValueError(f"model LBA count must be in (0, t), got {u_model}")
    if window is None:
        window = t // n_p - r
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")

    p = np.empty(window)
    p[0] = math.exp(-1.9 * (t / u_model - 1.0))
    growth = 1.1 / (1.0 - 1.0 / u_model) ** n_p
    for j in range(1, window):
        p[j] = min(1.0, p[j - 1] * growth)

    # v[j, k] = P(Binomial(n_p, p_j) > k) for k = 0..n_p-1; the sf is
    # evaluated in the log domain internally, stable up to n_p = 256.
    k = np.arange(n_p)
    v = binom.sf(k[None, :], n_p, p[:, None])
    V = np.prod(v, axis=0)

    # Valid-page distribution of the collected block.  The tail term uses
    # V_{n_p-1} itself (not 1 - V_{n_p-1}) so the masses sum to one.
    pstar = np.empty(n_p + 1)
    pstar[0] = 1.0 - V[0]
    pstar[1:n_p] = V[:-1] - V[1:]
    pstar[n_p] = V[n_p - 1]

    mean_valid = float(np.arange(n_p + 1) @ pstar)
    if mean_valid >= n_p:
        raise ValueError(
            f"degenerate Hu pipeline: mean valid count {mean_valid} >= n_p={n_p} "
            "(overprovisioning too close to zero)"
        )
    return n_p / (n_p - mean_valid)


def wa_hu(
    t: int, u_model: float, n_p: int, r: int, window: int | None = None
) -> WaPrediction:
    """Hu's empirical recurrence; window defaults to t/n_p - r (plain greedy)."""
    value = _hu_pipeline(t, u_model, n_p, r, window)
    return WaPrediction(
        "hu", value, {"t": t, "u": u_model, "n_p": n_p, "r": r, "window": window}
    )


def wa_hu_trim(
    t: int, u: float, q: float, n_p: int, r: int, window: int | None = None
) -> WaPrediction:
    """Hu recurrence run at the mean In-Use count u_eff = u * s."""
    _check_q(q)
    s = (1.0 - 2.0 * q) / (1.0 - q)
    value = _hu_pipeline(t, u * s, n_p, r, window)
    return WaPrediction(
        "hu_trim", value, {"t": t, "u": u, "q": q, "n_p": n_p, "r": r, "window": window}
    )


@dataclass(frozen=True)
class TempSpec:
    """Per-temperature device and workload description for separated pools.

    ``user_lbas[j]`` LBAs of temperature j live on ``pages[j]`` dedicated
    physical pages, receive requests with probability ``request_probs[j]``
    and Trims with per-request probability ``trim_probs[j]``.
    """

    user_lbas: tuple[int, ...]
    pages: tuple[int, ...]
    request_probs: tuple[float, ...]
    trim_probs: tuple[float, ...]

    def __post_init__(self):
        n = len(self.user_lbas)
        if not (len(self.pages) == len(self.request_probs) == len(self.trim_probs) == n):
            raise ValueError("per-temperature tuples must have equal lengths")
        if n < 1:
            raise ValueError("need at least one temperature")
        if abs(sum(self.request_probs) - 1.0) > 1e-9:
            raise ValueError(f"request probabilities must sum to 1, got {sum(self.request_probs)}")
        for j, (u_j, k_j, p_j, q_j) in enumerate(
            zip(self.user_lbas, self.pages, self.request_probs, self.trim_probs)
        ):
            if u_j < 1:
                raise ValueError(f"temperature {j}: user_lbas must be >= 1")
            if p_j < 0.0:
                raise ValueError(f"temperature {j}: negative request probability")
            _check_q(q_j)
            if k_j <= u_j:
                raise ValueError(
                    f"temperature {j}: needs more pages than LBAs (k={k_j}, u={u_j})"
                )

    @property
    def n_temps(self) -> int:
        return len(self.user_lbas)

    @property
    def rhos(self) -> tuple[float, ...]:
        return tuple((k - u) / u for k, u in zip(self.pages, self.user_lbas))

    @property
    def write_weights(self) -> tuple[float, ...]:
        """alpha_j: each temperature's share of writes (not of requests)."""
        raw = [p * (1.0 - q) for p, q in zip(self.request_probs, self.trim_probs)]
        total = sum(raw)
        return tuple(w / total for w in raw)


def wa_multi_temp(spec: TempSpec) -> WaPrediction:
    """Write-weighted sum of per-temperature Trim-modified Xiang predictions."""
    value = sum(
        alpha * wa_xiang_trim(rho, q).value
        for alpha, rho, q in zip(spec.write_weights, spec.rhos, spec.trim_probs)
    )
    return WaPrediction("multi_temp", value, {"spec": spec})


def wa_hot_cold_separated(spec: TempSpec) -> WaPrediction:
    """Two-temperature specialization of the separated-pool prediction."""
    if spec.n_temps != 2:
        raise ValueError(f"hot/cold prediction needs exactly 2 temperatures, got {spec.n_temps}")
    value = wa_multi_temp(spec).value
    return WaPrediction("hot_cold_separated", value, {"spec": spec})


def wa_mixed_naive(spec: TempSpec) -> WaPrediction:
    """Plain Xiang at the pooled effective overprovisioning.

    Known-wrong for genuinely mixed temperatures; it exists to chart how far
    the single-pool theory drifts from a mixed-pool simulation.
    """
    t = sum(spec.pages)
    u_eff = sum(
        u * (1.0 - 2.0 * q) / (1.0 - q) for u, q in zip(spec.user_lbas, spec.trim_probs)
    )
    if u_eff <= 0.0 or u_eff >= t:
        raise ValueError(f"pooled effective LBA count {u_eff} out of (0, {t})")
    value = _xiang_value(t / u_eff)
    return WaPrediction("mixed_naive", value, {"spec": spec})
