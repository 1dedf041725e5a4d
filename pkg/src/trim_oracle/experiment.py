"""Monte Carlo orchestration: warmup, measurement windows, sweeps.

A run builds one FTL pool per placement target, streams seeded requests at
it, discards a warmup prefix long enough for both the In-Use chain and the
block-age population to settle, then measures write amplification and the
In-Use trajectory over a fixed window.  Replications are independent
(per-replication seeds derived from the base seed) and may execute in
parallel processes; results are merged in replication order, so reports are
identical regardless of parallelism.

The In-Use birth-death chain is also simulated directly (no FTL) for the
distribution and moment studies, vectorized across replications.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .ftl import DeviceGeometry, FtlState, SimMetrics
from .markov import TrimParams, excess_kurtosis, skewness
from .workload import (
    HotColdWorkload,
    InUseSets,
    MixedPlacement,
    RequestGenerator,
    RequestKind,
    SeparatedPlacement,
    TemperatureView,
    UniformWorkload,
    WorkloadSpec,
    temperatures,
)
from . import writeamp

__all__ = [
    "RunConfig",
    "RunReport",
    "EmpiricalMoments",
    "ChainStats",
    "MomentStudy",
    "run",
    "simulate_chain",
    "moment_study",
    "sweep_trim",
    "sweep_cold_fraction",
    "sweep_spare_split",
    "default_reserve_threshold",
    "theory_predictions",
    "hot_cold_frame",
    "replication_threads",
]

THREADS_ENV = "TRIM_ORACLE_THREADS"


def replication_threads() -> int:
    """Worker cap for parallel replications (TRIM_ORACLE_THREADS, else 1)."""
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def default_reserve_threshold(
    blocks: int, user_lbas: int, pages_per_block: int, base: int = 8
) -> int:
    """Reserve threshold that keeps erased blocks a small slice of the spare.

    Blocks parked in the reserve queue cannot absorb invalid pages, so a
    large threshold silently shrinks the working overprovisioning and biases
    measured write amplification above the analytic models.  A tenth of the
    spare blocks, clamped to [1, base], keeps that bias inside the models'
    own accuracy at desk scale.
    """
    min_blocks = -(-user_lbas // pages_per_block)
    return max(1, min(base, (blocks - min_blocks) // 10))


@dataclass(frozen=True)
class RunConfig:
    """One experiment: geometry + workload + measurement protocol.

    ``warmup_requests=None`` uses max(2u, six relaxation times of the
    slowest temperature's In-Use chain); either way warmup is extended until
    every pool has erased each of its blocks three times over.
    ``sequential`` replaces random write targets with a cycling LBA counter
    (the zero-amplification reference workload).
    """

    geometry: DeviceGeometry
    workload: WorkloadSpec
    seed: int = 17
    warmup_requests: int | None = None
    measure_requests: int = 200_000
    histogram: bool = False
    runs: int = 1
    sequential: bool = False


@dataclass(frozen=True)
class EmpiricalMoments:
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float


@dataclass
class RunReport:
    """Aggregated measurement results with matched theory values."""

    config: RunConfig
    per_run_wa: list[float]
    measured_wa: float
    measured_wa_std: float
    pool_windows: list[list[SimMetrics]]  # [run][pool]
    temp_requests: list[list[tuple[int, int]]]  # [run][temp] = (writes, trims)
    per_run_moments: list[EmpiricalMoments]
    histogram: np.ndarray | None
    samples: int
    warmup_used: list[int]
    theory: dict[str, float]

    @property
    def in_use_mean(self) -> float:
        return float(np.mean([m.mean for m in self.per_run_moments]))


def _pool_geometries(config: RunConfig) -> list[DeviceGeometry]:
    geo = config.geometry
    views = temperatures(config.workload, geo.user_lbas)
    n_pools = max(v.pool for v in views) + 1
    if n_pools == 1:
        return [geo]
    spec = config.workload
    if isinstance(spec, HotColdWorkload):
        hot_pages = spec.placement.hot_pages
        allocations = [hot_pages, geo.total_pages - hot_pages]
    else:
        allocations = list(spec.page_allocations)
    if sum(allocations) != geo.total_pages:
        raise ValueError(
            f"pool allocations {allocations} must sum to total_pages={geo.total_pages}"
        )
    out = []
    for view, pages in zip(views, allocations):
        if pages % geo.pages_per_block:
            raise ValueError(f"pool allocation {pages} not a multiple of pages_per_block")
        blocks = pages // geo.pages_per_block
        r = default_reserve_threshold(
            blocks, view.size, geo.pages_per_block, base=geo.reserve_threshold
        )
        out.append(DeviceGeometry(pages, view.size, geo.pages_per_block, r))
    return out


def _auto_warmup(user_lbas: int, views: list[TemperatureView]) -> int:
    # six relaxation times of the slowest temperature's In-Use chain; at
    # q=0 this also covers the coupon-collector tail of first-time writes,
    # and doubling it moves measured WA on the desk frame by well under 1%
    slowest = max(v.size / (v.request_prob * (1.0 - v.trim_prob)) for v in views)
    return max(2 * user_lbas, int(6.0 * slowest) + 1)


@dataclass
class _SingleRunResult:
    wa: float
    windows: list[SimMetrics]
    temp_requests: list[tuple[int, int]]
    moments: EmpiricalMoments
    histogram: np.ndarray | None
    samples: int
    warmup: int


def _issue(pools, pool_of, offsets, gen, in_use, n, sequential, seq_state,
           sample=None, tallies=None):
    """Feed n requests; optionally sample the In-Use count and tally per temp."""
    u = gen.user_lbas
    if sequential:
        pool = pools[0]
        nxt = seq_state[0]
        for _ in range(n):
            pool.host_write(nxt)
            nxt += 1
            if nxt == u:
                nxt = 0
            if tallies is not None:
                tallies[0][0] += 1
            if sample is not None:
                sample(pool.in_use)
        seq_state[0] = nxt
        return
    total_in_use = sum(len(s) for s in in_use.sets)
    for _ in range(n):
        req = gen.next_request(in_use)
        temp = req.temperature
        pool = pools[pool_of[temp]]
        if req.kind is RequestKind.TRIM:
            in_use[temp].discard(req.lba)
            pool.host_trim(req.lba - offsets[temp])
            total_in_use -= 1
            if tallies is not None:
                tallies[temp][1] += 1
        else:
            s = in_use[temp]
            if req.lba not in s:
                s.add(req.lba)
                total_in_use += 1
            pool.host_write(req.lba - offsets[temp])
            if tallies is not None:
                tallies[temp][0] += 1
        if sample is not None:
            sample(total_in_use)


def _run_single(config: RunConfig, run_index: int) -> _SingleRunResult:
    geo = config.geometry
    u = geo.user_lbas
    views = temperatures(config.workload, u)
    pool_geos = _pool_geometries(config)
    pools = [FtlState(g) for g in pool_geos]
    pool_of = [v.pool for v in views]
    offsets = [v.lba_lo for v in views] if len(pools) > 1 else [0] * len(views)
    if config.sequential and len(pools) > 1:
        raise ValueError("sequential override applies to single-pool workloads only")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, run_index]))
    gen = RequestGenerator(config.workload, u, rng)
    in_use = InUseSets(len(views))
    seq_state = [0]

    warmup = config.warmup_requests
    if warmup is None:
        warmup = _auto_warmup(u, views)
    warmup = max(warmup, 2 * u)
    _issue(pools, pool_of, offsets, gen, in_use, warmup, config.sequential, seq_state)
    # extend until the block population has turned over everywhere
    erase_goals = [3 * g.blocks for g in pool_geos]
    extra = 0
    chunk = max(4096, u // 4)
    while any(p.block_erases < goal for p, goal in zip(pools, erase_goals)):
        _issue(pools, pool_of, offsets, gen, in_use, chunk, config.sequential, seq_state)
        extra += chunk
        if extra > 200 * warmup + 100_000_000:
            raise RuntimeError("warmup failed to reach the erase-turnover goal")

    before = [p.metrics_snapshot() for p in pools]

    hist = np.zeros(u + 1, dtype=np.int64) if config.histogram else None
    # anchored power sums of the sampled In-Use count, for streaming moments
    anchor = round(sum(v.size * (1.0 - 2.0 * v.trim_prob) / (1.0 - v.trim_prob) for v in views))
    sums = [0, 0, 0, 0]
    count = [0]

    if config.histogram:
        def sample(x, _h=hist, _s=sums, _c=count, _a=anchor):
            _h[x] += 1
            d = x - _a
            d2 = d * d
            _s[0] += d
            _s[1] += d2
            _s[2] += d2 * d
            _s[3] += d2 * d2
            _c[0] += 1
    else:
        def sample(x, _s=sums, _c=count, _a=anchor):
            d = x - _a
            d2 = d * d
            _s[0] += d
            _s[1] += d2
            _s[2] += d2 * d
            _s[3] += d2 * d2
            _c[0] += 1

    tallies = [[0, 0] for _ in views]
    _issue(pools, pool_of, offsets, gen, in_use, config.measure_requests,
           config.sequential, seq_state, sample, tallies)

    after = [p.metrics_snapshot() for p in pools]
    windows = [b.delta(a) for a, b in zip(before, after)]
    hosts = sum(w.host_page_writes for w in windows)
    programs = hosts + sum(w.gc_page_copies for w in windows)
    wa = programs / hosts if hosts else 1.0

    n = count[0]
    m1 = sums[0] / n
    c2 = sums[1] / n - m1 * m1
    c3 = sums[2] / n - 3 * m1 * (sums[1] / n) + 2 * m1**3
    c4 = sums[3] / n - 4 * m1 * (sums[2] / n) + 6 * m1 * m1 * (sums[1] / n) - 3 * m1**4
    moments = EmpiricalMoments(
        mean=anchor + m1,
        variance=c2,
        skewness=c3 / c2**1.5 if c2 > 0 else 0.0,
        excess_kurtosis=c4 / (c2 * c2) - 3.0 if c2 > 0 else 0.0,
    )
    temp_req = [(w, t) for w, t in tallies]
    return _SingleRunResult(wa, windows, temp_req, moments, hist, n, warmup + extra)


def theory_predictions(config: RunConfig) -> dict[str, float]:
    """Analytic write-amplification values matched to this configuration."""
    geo = config.geometry
    spec = config.workload
    out: dict[str, float] = {}
    if isinstance(spec, UniformWorkload):
        q = spec.trim_prob
        rho = geo.rho
        out["wa_xiang_trim"] = writeamp.wa_xiang_trim(rho, q).value
        out["wa_agarwal_trim"] = writeamp.wa_agarwal_trim(rho, q).value
        out["wa_hu_trim"] = writeamp.wa_hu_trim(
            geo.total_pages, geo.user_lbas, q, geo.pages_per_block, geo.reserve_threshold
        ).value
        return out
    views = temperatures(spec, geo.user_lbas)
    trim_probs = tuple(v.trim_prob for v in views)
    request_probs = tuple(v.request_prob for v in views)
    user = tuple(v.size for v in views)
    if len({v.pool for v in views}) > 1:
        pages = tuple(g.total_pages for g in _pool_geometries(config))
        spec_t = writeamp.TempSpec(user, pages, request_probs, trim_probs)
        key = "wa_hot_cold_separated" if len(views) == 2 else "wa_multi_temp"
        out[key] = writeamp.wa_multi_temp(spec_t).value
    else:
        # formal proportional split so the pooled-u_eff predictor type-checks
        t = geo.total_pages
        pages = [u_j * t // geo.user_lbas for u_j in user]
        pages[-1] += t - sum(pages)
        spec_t = writeamp.TempSpec(user, tuple(pages), request_probs, trim_probs)
        out["wa_mixed_naive"] = writeamp.wa_mixed_naive(spec_t).value
    return out


def run(config: RunConfig) -> RunReport:
    """Execute the configured replications and aggregate."""
    if config.measure_requests < 1:
        raise ValueError("measure_requests must be >= 1")
    if config.runs < 1:
        raise ValueError("runs must be >= 1")
    workers = min(replication_threads(), config.runs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_single, [config] * config.runs, range(config.runs)))
    else:
        results = [_run_single(config, i) for i in range(config.runs)]

    was = [r.wa for r in results]
    hist = None
    if config.histogram:
        hist = np.zeros(config.geometry.user_lbas + 1, dtype=np.int64)
        for r in results:
            hist += r.histogram
    return RunReport(
        config=config,
        per_run_wa=was,
        measured_wa=float(np.mean(was)),
        measured_wa_std=float(np.std(was, ddof=1)) if len(was) > 1 else 0.0,
        pool_windows=[r.windows for r in results],
        temp_requests=[r.temp_requests for r in results],
        per_run_moments=[r.moments for r in results],
        histogram=hist,
        samples=sum(r.samples for r in results),
        warmup_used=[r.warmup for r in results],
        theory=theory_predictions(config),
    )


# -- direct chain simulation -------------------------------------------------


@dataclass
class ChainStats:
    """Pooled histogram and per-run moments of the In-Use chain."""

    user_lbas: int
    trim_prob: float
    steps_per_run: int
    histogram: np.ndarray
    run_means: np.ndarray
    run_variances: np.ndarray
    run_skews: np.ndarray
    run_excess_kurtoses: np.ndarray

    @property
    def samples(self) -> int:
        return int(self.histogram.sum())

    def density(self) -> np.ndarray:
        return self.histogram / self.histogram.sum()


def simulate_chain(
    user_lbas: int,
    trim_prob: float,
    steps: int,
    runs: int = 1,
    seed: int = 17,
    warmup: int | None = None,
) -> ChainStats:
    """Simulate the In-Use birth-death chain, vectorized across runs.

    Per step and replica: Trim with probability q (a step down, reflecting
    at 0 into a fresh write), rewrite with probability (x/u)(1-q) (no move),
    fresh write otherwise (a step up).  States are recorded after each step;
    the warmup prefix (default 20 relaxation times) is discarded.
    """
    params = TrimParams(user_lbas, trim_prob)
    u, q = user_lbas, trim_prob
    if warmup is None:
        warmup = int(20 * u / (1.0 - q)) + 1
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    x = np.full(runs, round(u * params.s), dtype=np.int64)
    c = (1.0 - q) / u
    hist = np.zeros(u + 1, dtype=np.int64)
    anchor = round(u * params.s)
    s1 = np.zeros(runs)
    s2 = np.zeros(runs)
    s3 = np.zeros(runs)
    s4 = np.zeros(runs)
    chunk_len = max(1, min(65536, 8_000_000 // max(1, runs)))
    buf = np.empty((chunk_len, runs), dtype=np.int64)

    def advance(n, measure):
        nonlocal x, s1, s2, s3, s4
        done = 0
        while done < n:
            m = min(chunk_len, n - done)
            uni = rng.random((m, runs))
            for i in range(m):
                row = uni[i]
                up = row >= q + x * c
                x = x + up
                if q:
                    down = (row < q) & (x > 0)
                    x -= down
                buf[i] = x
            if measure:
                flat = buf[:m].ravel()
                hist_part = np.bincount(flat, minlength=u + 1)
                hist[: len(hist_part)] += hist_part
                d = buf[:m] - float(anchor)
                d2 = d * d
                s1 += d.sum(axis=0)
                s2 += d2.sum(axis=0)
                s3 += (d2 * d).sum(axis=0)
                s4 += (d2 * d2).sum(axis=0)
            done += m

    advance(warmup, False)
    advance(steps, True)

    n = float(steps)
    m1 = s1 / n
    c2 = s2 / n - m1**2
    c3 = s3 / n - 3 * m1 * (s2 / n) + 2 * m1**3
    c4 = s4 / n - 4 * m1 * (s3 / n) + 6 * m1**2 * (s2 / n) - 3 * m1**4
    # a frozen chain (q = 0 saturated at u) has no defined shape moments
    safe_c2 = np.where(c2 > 0, c2, 1.0)
    return ChainStats(
        user_lbas=u,
        trim_prob=q,
        steps_per_run=steps,
        histogram=hist,
        run_means=anchor + m1,
        run_variances=c2,
        run_skews=np.where(c2 > 0, c3 / safe_c2**1.5, 0.0),
        run_excess_kurtoses=np.where(c2 > 0, c4 / safe_c2**2 - 3.0, 0.0),
    )


@dataclass
class MomentStudy:
    """Replicate-level skewness/kurtosis of the chain vs the leading-order theory."""

    stats: ChainStats
    mean_skew: float
    std_skew: float
    mean_excess_kurtosis: float
    std_excess_kurtosis: float
    theory_skew: float
    theory_excess_kurtosis: float


def moment_study(
    user_lbas: int,
    trim_prob: float,
    runs: int,
    steps: int = 1_000_000,
    seed: int = 17,
) -> MomentStudy:
    """Sample skew/kurtosis across replicated chain runs, plus theory values."""
    stats = simulate_chain(user_lbas, trim_prob, steps=steps, runs=runs, seed=seed)
    params = TrimParams(user_lbas, trim_prob)
    ddof = 1 if runs > 1 else 0
    return MomentStudy(
        stats=stats,
        mean_skew=float(stats.run_skews.mean()),
        std_skew=float(stats.run_skews.std(ddof=ddof)),
        mean_excess_kurtosis=float(stats.run_excess_kurtoses.mean()),
        std_excess_kurtosis=float(stats.run_excess_kurtoses.std(ddof=ddof)),
        theory_skew=skewness(params),
        theory_excess_kurtosis=excess_kurtosis(params),
    )


# -- parameter sweeps ----------------------------------------------------------


def sweep_trim(base: RunConfig, q_values) -> list[dict]:
    """Measured vs predicted WA across Trim probabilities (uniform workload)."""
    rows = []
    for q in q_values:
        config = replace(base, workload=UniformWorkload(trim_prob=float(q)))
        report = run(config)
        rows.append(
            {
                "q": float(q),
                "measured_wa": report.measured_wa,
                "measured_wa_std": report.measured_wa_std,
                **report.theory,
            }
        )
    return rows


def hot_cold_frame(
    geometry: DeviceGeometry,
    cold_fraction: float,
    hot_request_prob: float,
    hot_trim_prob: float,
    cold_trim_prob: float,
    split: float = 0.5,
) -> tuple[HotColdWorkload, HotColdWorkload]:
    """Mixed and separated workloads for one hot/cold parameter point.

    The separated allocation gives each temperature the blocks needed to
    hold its full LBA slice, then splits the remaining blocks ``split`` to
    hot (rounded to whole blocks).
    """
    u = geometry.user_lbas
    n_p = geometry.pages_per_block
    f_h = 1.0 - cold_fraction
    u_h = int(u * f_h)
    u_c = u - u_h
    if u_h < 1 or u_c < 1:
        raise ValueError(f"cold_fraction {cold_fraction} leaves an empty temperature")
    min_h = -(-u_h // n_p)
    min_c = -(-u_c // n_p)
    spare = geometry.blocks - min_h - min_c
    if spare < 0:
        raise ValueError("geometry lacks the blocks to hold both temperatures")
    extra_h = round(split * spare)
    hot_pages = (min_h + extra_h) * n_p
    mixed = HotColdWorkload(f_h, hot_request_prob, hot_trim_prob, cold_trim_prob,
                            MixedPlacement())
    separated = HotColdWorkload(f_h, hot_request_prob, hot_trim_prob, cold_trim_prob,
                                SeparatedPlacement(hot_pages))
    return mixed, separated


def sweep_cold_fraction(
    base: RunConfig,
    cold_fractions,
    hot_request_prob: float = 0.9,
    hot_trim_prob: float = 0.2,
    cold_trim_prob: float = 0.1,
    split: float = 0.5,
    placements: tuple[str, ...] = ("mixed", "separated"),
) -> list[dict]:
    """Mixed and separated measurements vs their predictors across f_c."""
    rows = []
    for f_c in cold_fractions:
        mixed, separated = hot_cold_frame(
            base.geometry, float(f_c), hot_request_prob, hot_trim_prob, cold_trim_prob, split
        )
        row: dict = {"f_c": float(f_c)}
        if "mixed" in placements:
            report = run(replace(base, workload=mixed))
            row["wa_mixed_measured"] = report.measured_wa
            row["wa_mixed_measured_std"] = report.measured_wa_std
            row.update(report.theory)
        if "separated" in placements:
            report = run(replace(base, workload=separated))
            row["wa_separated_measured"] = report.measured_wa
            row["wa_separated_measured_std"] = report.measured_wa_std
            row.update(report.theory)
        rows.append(row)
    return rows


def sweep_spare_split(
    base: RunConfig,
    split_fractions,
    cold_fraction: float = 0.9,
    hot_request_prob: float = 0.9,
    hot_trim_prob: float = 0.2,
    cold_trim_prob: float = 0.1,
) -> list[dict]:
    """Separated-pool WA as the spare blocks move between hot and cold."""
    rows = []
    for split in split_fractions:
        _, separated = hot_cold_frame(
            base.geometry, cold_fraction, hot_request_prob, hot_trim_prob,
            cold_trim_prob, float(split)
        )
        report = run(replace(base, workload=separated))
        rows.append(
            {
                "split": float(split),
                "measured_wa": report.measured_wa,
                "measured_wa_std": report.measured_wa_std,
                "predicted_wa": report.theory["wa_hot_cold_separated"],
            }
        )
    return rows
