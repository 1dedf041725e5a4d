"""Page-granular log-structured FTL with greedy garbage collection.

The device is a flat array of ``t`` pages grouped into blocks of ``n_p``.
Host writes land on the next free page of the single current block; full
blocks join a FIFO occupied queue and the current block is replenished from
a queue of erased reserve blocks.  When the reserve queue drops below the
threshold ``r`` right after a block fills, greedy garbage collection
reclaims occupied blocks--fewest valid pages first, oldest first on ties--
until the reserve is restored.  Trim invalidates a page without writing.

State is kept in plain Python lists indexed by page/block id; the write and
invalidate paths are hot (tens of millions of calls per experiment), so the
structures favor O(1) integer ops over abstraction.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

__all__ = [
    "FREE",
    "INVALID",
    "PageState",
    "DeviceGeometry",
    "SimMetrics",
    "FtlState",
    "OutOfSpaceError",
    "new_device",
]

# page_lba encoding: an LBA >= 0 means Valid(lba)
FREE = -2
INVALID = -1


class PageState(enum.Enum):
    FREE = "free"
    VALID = "valid"
    INVALID = "invalid"


class OutOfSpaceError(RuntimeError):
    """Garbage collection cannot free net space for this geometry/workload."""


@dataclass(frozen=True)
class DeviceGeometry:
    """Dimensional contract of a device (or of one separated pool).

    total_pages t, user_lbas u, pages_per_block n_p and the reserve-queue
    threshold r.  Validation reports the first violated constraint.
    """

    total_pages: int
    user_lbas: int
    pages_per_block: int
    reserve_threshold: int

    def __post_init__(self):
        t, u, n_p, r = (
            self.total_pages,
            self.user_lbas,
            self.pages_per_block,
            self.reserve_threshold,
        )
        if n_p < 1:
            raise ValueError(f"pages_per_block must be >= 1, got {n_p}")
        if t < 1 or t % n_p:
            raise ValueError(f"total_pages must be a positive multiple of pages_per_block, got t={t}, n_p={n_p}")
        if not 0 < u < t:
            raise ValueError(f"user_lbas must satisfy 0 < u < t, got u={u}, t={t}")
        blocks = t // n_p
        if not 1 <= r < blocks:
            raise ValueError(f"reserve_threshold must satisfy 1 <= r < blocks, got r={r}, blocks={blocks}")

    @property
    def blocks(self) -> int:
        return self.total_pages // self.pages_per_block

    @property
    def spare_factor(self) -> float:
        """(t - u) / t"""
        return (self.total_pages - self.user_lbas) / self.total_pages

    @property
    def rho(self) -> float:
        """(t - u) / u"""
        return (self.total_pages - self.user_lbas) / self.user_lbas


@dataclass(frozen=True)
class SimMetrics:
    """Counter snapshot plus the derived write amplification.

    ``measured_wa`` is (host_page_writes + gc_page_copies) / host_page_writes,
    reported as 1.0 before any host write.  ``delta`` subtracts an earlier
    snapshot's monotone counters to evaluate a measurement window;
    ``in_use_count`` stays the later snapshot's current value.
    """

    host_page_writes: int
    gc_page_copies: int
    block_erases: int
    trim_requests: int
    noop_trims: int
    in_use_count: int

    @property
    def measured_wa(self) -> float:
        if self.host_page_writes == 0:
            return 1.0
        return (self.host_page_writes + self.gc_page_copies) / self.host_page_writes

    def delta(self, earlier: "SimMetrics") -> "SimMetrics":
        return SimMetrics(
            host_page_writes=self.host_page_writes - earlier.host_page_writes,
            gc_page_copies=self.gc_page_copies - earlier.gc_page_copies,
            block_erases=self.block_erases - earlier.block_erases,
            trim_requests=self.trim_requests - earlier.trim_requests,
            noop_trims=self.noop_trims - earlier.noop_trims,
            in_use_count=self.in_use_count,
        )


class FtlState:
    """Mutable device state; single-threaded, deterministic.

    Use one instance per simulation thread; nothing here is shared-safe.
    """

    __slots__ = (
        "geometry",
        "page_lba",
        "forward",
        "valid_count",
        "reserve",
        "occupied",
        "current",
        "free_ptr",
        "host_page_writes",
        "gc_page_copies",
        "block_erases",
        "trim_requests",
        "noop_trims",
        "in_use",
    )

    def __init__(self, geometry: DeviceGeometry):
        self.geometry = geometry
        t = geometry.total_pages
        self.page_lba = [FREE] * t
        self.forward = [-1] * geometry.user_lbas
        self.valid_count = [0] * geometry.blocks
        self.reserve = deque(range(1, geometry.blocks))
        self.occupied: list[int] = []
        self.current = 0
        self.free_ptr = 0
        self.host_page_writes = 0
        self.gc_page_copies = 0
        self.block_erases = 0
        self.trim_requests = 0
        self.noop_trims = 0
        self.in_use = 0

    # -- queries ---------------------------------------------------------

    def page_state(self, page: int) -> tuple[PageState, int | None]:
        v = self.page_lba[page]
        if v == FREE:
            return PageState.FREE, None
        if v == INVALID:
            return PageState.INVALID, None
        return PageState.VALID, v

    def metrics_snapshot(self) -> SimMetrics:
        return SimMetrics(
            host_page_writes=self.host_page_writes,
            gc_page_copies=self.gc_page_copies,
            block_erases=self.block_erases,
            trim_requests=self.trim_requests,
            noop_trims=self.noop_trims,
            in_use_count=self.in_use,
        )

    # -- host request path -------------------------------------------------

    def _place(self, lba: int):
        # program the next free page of the current block; on fill, retire
        # the block to the occupied queue and pull a fresh one from reserve
        cur = self.current
        n_p = self.geometry.pages_per_block
        page = cur * n_p + self.free_ptr
        self.page_lba[page] = lba
        self.forward[lba] = page
        self.valid_count[cur] += 1
        self.free_ptr += 1
        if self.free_ptr == n_p:
            self.occupied.append(cur)
            if not self.reserve:
                raise OutOfSpaceError(
                    "reserve queue exhausted; user_lbas too close to total_pages"
                )
            self.current = self.reserve.popleft()
            self.free_ptr = 0

    def host_write(self, lba: int):
        if not 0 <= lba < self.geometry.user_lbas:
            raise ValueError(f"lba {lba} out of range [0, {self.geometry.user_lbas})")
        old = self.forward[lba]
        if old >= 0:
            self.page_lba[old] = INVALID
            self.valid_count[old // self.geometry.pages_per_block] -= 1
        else:
            self.in_use += 1
        self._place(lba)
        self.host_page_writes += 1
        r = self.geometry.reserve_threshold
        while len(self.reserve) < r:
            self.garbage_collect()

    def host_trim(self, lba: int):
        if not 0 <= lba < self.geometry.user_lbas:
            raise ValueError(f"lba {lba} out of range [0, {self.geometry.user_lbas})")
        old = self.forward[lba]
        if old < 0:
            self.noop_trims += 1
            return
        self.page_lba[old] = INVALID
        self.valid_count[old // self.geometry.pages_per_block] -= 1
        self.forward[lba] = -1
        self.in_use -= 1
        self.trim_requests += 1

    # -- garbage collection -------------------------------------------------

    def _victim_index(self) -> int:
        # oldest occupied block among those with the fewest valid pages
        occ = self.occupied
        if not occ:
            raise OutOfSpaceError("garbage collection invoked with no occupied blocks")
        vc = self.valid_count
        best_i = 0
        best = vc[occ[0]]
        if best:
            for i in range(1, len(occ)):
                c = vc[occ[i]]
                if c < best:
                    best = c
                    best_i = i
                    if not c:
                        break
        return best_i

    def select_victim(self) -> int:
        """Block id greedy GC would reclaim next (queue not modified)."""
        return self.occupied[self._victim_index()]

    def garbage_collect(self) -> int:
        """Reclaim one victim block; returns the number of pages copied.

        Valid pages are rewritten through the normal placement path, so the
        copies can themselves fill the current block and pull from reserve;
        callers needing |reserve| >= r loop until satisfied.
        """
        victim = self.occupied.pop(self._victim_index())
        n_p = self.geometry.pages_per_block
        copied = self.valid_count[victim]
        if copied == n_p:
            raise OutOfSpaceError(
                "every occupied block is fully valid; no net space can be freed"
            )
        base = victim * n_p
        page_lba = self.page_lba
        if copied:
            for lba in page_lba[base : base + n_p]:
                if lba >= 0:
                    self._place(lba)
            self.gc_page_copies += copied
        page_lba[base : base + n_p] = [FREE] * n_p
        self.valid_count[victim] = 0
        self.block_erases += 1
        self.reserve.append(victim)
        return copied

    # -- consistency audit ----------------------------------------------------

    def audit(self):
        """Validate the structural invariants; raises AssertionError on breakage.

        Intended for tests and debugging, not for the hot path.
        """
        geo = self.geometry
        n_p = geo.pages_per_block
        free = sum(1 for v in self.page_lba if v == FREE)
        invalid = sum(1 for v in self.page_lba if v == INVALID)
        valid = geo.total_pages - free - invalid
        programs = self.host_page_writes + self.gc_page_copies
        # erased victims are always full, so each erase retired n_p programs
        assert programs == valid + invalid + n_p * self.block_erases, (
            f"program conservation broken: {programs} programs vs "
            f"{valid} valid + {invalid} invalid + {n_p}*{self.block_erases} erased"
        )
        mapped = [(lba, p) for lba, p in enumerate(self.forward) if p >= 0]
        assert valid == len(mapped), f"valid pages {valid} != mapped LBAs {len(mapped)}"
        assert self.in_use == len(mapped), f"in_use counter {self.in_use} != mapped {len(mapped)}"
        for lba, page in mapped:
            assert self.page_lba[page] == lba, f"forward map of lba {lba} points at page {page} holding {self.page_lba[page]}"
        for b in range(geo.blocks):
            count = sum(1 for v in self.page_lba[b * n_p : (b + 1) * n_p] if v >= 0)
            assert count == self.valid_count[b], f"block {b} valid cache {self.valid_count[b]} != {count}"
        for b in self.reserve:
            assert all(v == FREE for v in self.page_lba[b * n_p : (b + 1) * n_p]), f"reserve block {b} not fully erased"
        for b in self.occupied:
            assert FREE not in self.page_lba[b * n_p : (b + 1) * n_p], f"occupied block {b} has free pages"
        ids = sorted([self.current, *self.reserve, *self.occupied])
        assert ids == list(range(geo.blocks)), "block queues do not partition the device"
        assert len(self.reserve) >= geo.reserve_threshold, (
            f"reserve below threshold between requests: {len(self.reserve)}"
        )


def new_device(geometry: DeviceGeometry) -> FtlState:
    """Fresh all-free device: one designated current block, the rest reserved."""
    return FtlState(geometry)
