"""Seeded request generators for the workload families under study.

Every family reduces to N temperatures: temperature j owns a contiguous
slice of the LBA space (fraction f_j), receives each request with
probability p_j, and sees Trims with per-request probability q_j.  Writes
target a uniformly random LBA of the temperature's slice; Trims target a
uniformly random member of the temperature's current In-Use set.  A Trim
drawn while that set is empty degrades to a write, keeping the request
count per step fixed.

Placement decides how temperatures map onto physical pools: mixed shares
one device, separated gives each temperature its own pool of blocks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RequestKind",
    "Request",
    "MixedPlacement",
    "SeparatedPlacement",
    "UniformWorkload",
    "HotColdWorkload",
    "MultiTempWorkload",
    "WorkloadSpec",
    "TemperatureView",
    "temperatures",
    "lba_range",
    "route",
    "SampleSet",
    "InUseSets",
    "RequestGenerator",
]


class RequestKind(enum.Enum):
    WRITE = "write"
    TRIM = "trim"


@dataclass(frozen=True)
class Request:
    kind: RequestKind
    lba: int
    temperature: int = 0


@dataclass(frozen=True)
class MixedPlacement:
    """All temperatures share one physical pool."""


@dataclass(frozen=True)
class SeparatedPlacement:
    """Two-temperature split pools; ``hot_pages`` physical pages go hot."""

    hot_pages: int


def _check_q(q: float, label: str):
    if not 0.0 <= q < 1.0:
        raise ValueError(f"{label} must be in [0, 1), got {q}")


@dataclass(frozen=True)
class UniformWorkload:
    """Single temperature over the whole LBA space."""

    trim_prob: float = 0.0

    def __post_init__(self):
        _check_q(self.trim_prob, "trim_prob")


@dataclass(frozen=True)
class HotColdWorkload:
    """Hot slice [0, u*hot_fraction), cold slice the rest."""

    hot_fraction: float
    hot_request_prob: float
    hot_trim_prob: float
    cold_trim_prob: float
    placement: MixedPlacement | SeparatedPlacement = MixedPlacement()

    def __post_init__(self):
        if not 0.0 < self.hot_fraction < 1.0:
            raise ValueError(f"hot_fraction must be in (0, 1), got {self.hot_fraction}")
        if not 0.0 < self.hot_request_prob < 1.0:
            raise ValueError(f"hot_request_prob must be in (0, 1), got {self.hot_request_prob}")
        _check_q(self.hot_trim_prob, "hot_trim_prob")
        _check_q(self.cold_trim_prob, "cold_trim_prob")


@dataclass(frozen=True)
class MultiTempWorkload:
    """N temperatures; ``page_allocations`` (pages per pool) implies separation."""

    fractions: tuple[float, ...]
    request_probs: tuple[float, ...]
    trim_probs: tuple[float, ...]
    page_allocations: tuple[int, ...] | None = None

    def __post_init__(self):
        n = len(self.fractions)
        if n < 1 or len(self.request_probs) != n or len(self.trim_probs) != n:
            raise ValueError("fractions, request_probs and trim_probs must have equal lengths")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got {sum(self.fractions)}")
        if abs(sum(self.request_probs) - 1.0) > 1e-9:
            raise ValueError(f"request_probs must sum to 1, got {sum(self.request_probs)}")
        for q in self.trim_probs:
            _check_q(q, "trim_probs entries")
        if self.page_allocations is not None and len(self.page_allocations) != n:
            raise ValueError("page_allocations length must match the temperature count")


WorkloadSpec = UniformWorkload | HotColdWorkload | MultiTempWorkload


@dataclass(frozen=True)
class TemperatureView:
    """Flattened per-temperature parameters: LBA slice, rates, pool id."""

    lba_lo: int
    lba_hi: int
    request_prob: float
    trim_prob: float
    pool: int

    @property
    def size(self) -> int:
        return self.lba_hi - self.lba_lo


def _fractions_of(spec: WorkloadSpec) -> tuple[float, ...]:
    if isinstance(spec, UniformWorkload):
        return (1.0,)
    if isinstance(spec, HotColdWorkload):
        return (spec.hot_fraction, 1.0 - spec.hot_fraction)
    return spec.fractions


def _separated(spec: WorkloadSpec) -> bool:
    if isinstance(spec, HotColdWorkload):
        return isinstance(spec.placement, SeparatedPlacement)
    if isinstance(spec, MultiTempWorkload):
        return spec.page_allocations is not None
    return False


def lba_range(spec: WorkloadSpec, temperature: int, user_lbas: int) -> range:
    """Contiguous LBA slice of one temperature.

    Slices are floor(u * f_j) long, packed from LBA 0 in temperature order;
    the rounding remainder goes to the last temperature.
    """
    fractions = _fractions_of(spec)
    if not 0 <= temperature < len(fractions):
        raise ValueError(f"temperature {temperature} out of range (N={len(fractions)})")
    sizes = [int(user_lbas * f) for f in fractions]
    sizes[-1] = user_lbas - sum(sizes[:-1])
    lo = sum(sizes[:temperature])
    return range(lo, lo + sizes[temperature])


def route(spec: WorkloadSpec, request: Request) -> int:
    """Physical pool that serves a request: its temperature if separated, else 0."""
    return request.temperature if _separated(spec) else 0


def temperatures(spec: WorkloadSpec, user_lbas: int) -> list[TemperatureView]:
    """Per-temperature views with slices, rates and pool routing resolved."""
    if isinstance(spec, UniformWorkload):
        probs = (1.0,)
        trims = (spec.trim_prob,)
    elif isinstance(spec, HotColdWorkload):
        probs = (spec.hot_request_prob, 1.0 - spec.hot_request_prob)
        trims = (spec.hot_trim_prob, spec.cold_trim_prob)
    else:
        probs = spec.request_probs
        trims = spec.trim_probs
    separated = _separated(spec)
    views = []
    for j, (p_j, q_j) in enumerate(zip(probs, trims)):
        r = lba_range(spec, j, user_lbas)
        views.append(TemperatureView(r.start, r.stop, p_j, q_j, j if separated else 0))
    return views


class SampleSet:
    """Integer set with O(1) add/discard and O(1) uniform sampling."""

    __slots__ = ("items", "pos")

    def __init__(self):
        self.items: list[int] = []
        self.pos: dict[int, int] = {}

    def __len__(self):
        return len(self.items)

    def __contains__(self, x: int) -> bool:
        return x in self.pos

    def add(self, x: int):
        if x not in self.pos:
            self.pos[x] = len(self.items)
            self.items.append(x)

    def discard(self, x: int):
        j = self.pos.pop(x, None)
        if j is None:
            return
        items = self.items
        last = items.pop()
        if last != x:
            items[j] = last
            self.pos[last] = j

    def pick(self, u01: float) -> int:
        """Member at the uniform draw u01 in [0, 1); set must be non-empty."""
        return self.items[int(u01 * len(self.items))]


class InUseSets:
    """Per-temperature In-Use LBA sets, the generator's view of device state.

    The experiment loop keeps these in step with the simulator: a write adds
    the LBA to its temperature's set, a Trim removes it.
    """

    def __init__(self, n_temps: int):
        self.sets = [SampleSet() for _ in range(n_temps)]

    def __getitem__(self, temperature: int) -> SampleSet:
        return self.sets[temperature]

    def note(self, request: Request):
        """Fold a served request into the view."""
        if request.kind is RequestKind.WRITE:
            self.sets[request.temperature].add(request.lba)
        else:
            self.sets[request.temperature].discard(request.lba)

    def total(self) -> int:
        return sum(len(s) for s in self.sets)


class RequestGenerator:
    """Draws the request stream for a workload spec from a seeded generator.

    Uniform variates are drawn from the numpy Generator in blocks and
    consumed three per request (temperature, kind, target), so a given seed
    yields one fixed request sequence regardless of caller pacing.
    """

    _BLOCK = 16384

    def __init__(self, spec: WorkloadSpec, user_lbas: int, rng: np.random.Generator):
        self.spec = spec
        self.user_lbas = user_lbas
        self.rng = rng
        self.views = temperatures(spec, user_lbas)
        self._cuts = np.cumsum([v.request_prob for v in self.views])[:-1].tolist()
        self._buf: list[float] = []
        self._at = 0

    def _uniform(self) -> float:
        if self._at == len(self._buf):
            self._buf = self.rng.random(self._BLOCK).tolist()
            self._at = 0
        v = self._buf[self._at]
        self._at += 1
        return v

    def next_request(self, in_use: InUseSets) -> Request:
        u_temp = self._uniform()
        u_kind = self._uniform()
        u_target = self._uniform()
        temp = 0
        for cut in self._cuts:
            if u_temp >= cut:
                temp += 1
            else:
                break
        view = self.views[temp]
        in_use_set = in_use[temp]
        if u_kind < view.trim_prob and len(in_use_set):
            return Request(RequestKind.TRIM, in_use_set.pick(u_target), temp)
        return Request(RequestKind.WRITE, view.lba_lo + int(u_target * view.size), temp)
