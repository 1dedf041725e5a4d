"""Tests for the page-level FTL state machine."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.stateful import RuleBasedStateMachine, initialize, invariant, rule

from trim_oracle.ftl import (
    FREE,
    INVALID,
    DeviceGeometry,
    OutOfSpaceError,
    PageState,
    new_device,
)

SMALL = DeviceGeometry(total_pages=1024, user_lbas=640, pages_per_block=32,
                       reserve_threshold=2)


class TestGeometry:
    def test_tiny_two_block_device(self):
        geo = DeviceGeometry(128, 100, 64, 1)
        dev = new_device(geo)
        assert geo.blocks == 2
        assert len(dev.reserve) == 1
        assert dev.current == 0
        assert dev.in_use == 0

    def test_rejects_unaligned_total(self):
        with pytest.raises(ValueError, match="multiple"):
            DeviceGeometry(127, 64, 64, 1)

    def test_desk_scale_spare_factor(self):
        geo = DeviceGeometry(65536, 58982, 64, 16)
        assert geo.blocks == 1024
        assert geo.spare_factor == (65536 - 58982) / 65536
        assert geo.spare_factor == pytest.approx(0.1, abs=1e-3)

    @pytest.mark.parametrize(
        "t,u,n_p,r",
        [
            (128, 0, 64, 1),      # u too small
            (128, 128, 64, 1),    # u == t
            (128, 100, 64, 0),    # r too small
            (128, 100, 64, 2),    # r == blocks
            (0, 0, 64, 1),
        ],
    )
    def test_rejects_bad_geometry(self, t, u, n_p, r):
        with pytest.raises(ValueError):
            DeviceGeometry(t, u, n_p, r)

    def test_rho(self):
        geo = DeviceGeometry(65536, 58982, 64, 16)
        assert geo.rho == pytest.approx(6554 / 58982)


class TestHostWrite:
    def test_fresh_write_adds_in_use(self):
        dev = new_device(SMALL)
        dev.host_write(3)
        assert dev.in_use == 1
        assert dev.page_lba.count(INVALID) == 0
        assert dev.page_state(0) == (PageState.VALID, 3)
        dev.audit()

    def test_overwrite_invalidates_exactly_one_page(self):
        dev = new_device(SMALL)
        dev.host_write(3)
        dev.host_write(3)
        assert dev.in_use == 1
        assert dev.page_lba.count(INVALID) == 1
        assert dev.forward[3] == 1
        dev.audit()

    def test_lba_out_of_range(self):
        dev = new_device(SMALL)
        with pytest.raises(ValueError):
            dev.host_write(SMALL.user_lbas)
        with pytest.raises(ValueError):
            dev.host_write(-1)

    def test_counters_monotone(self):
        dev = new_device(SMALL)
        rng = np.random.default_rng(0)
        last = dev.metrics_snapshot()
        for lba in rng.integers(0, SMALL.user_lbas, 3000):
            dev.host_write(int(lba))
            snap = dev.metrics_snapshot()
            assert snap.host_page_writes >= last.host_page_writes
            assert snap.gc_page_copies >= last.gc_page_copies
            assert snap.block_erases >= last.block_erases
            last = snap


class TestSequentialWorkload:
    @pytest.mark.parametrize("u,t", [(512, 1024), (896, 1024)])
    def test_wa_exactly_one_when_u_multiple_of_block(self, u, t):
        # cycling writes invalidate whole blocks; GC never copies a page
        geo = DeviceGeometry(t, u, 32, 2)
        dev = new_device(geo)
        for cycle in range(6):
            for lba in range(u):
                dev.host_write(lba)
        m = dev.metrics_snapshot()
        assert m.gc_page_copies == 0
        assert m.measured_wa == 1.0
        assert m.block_erases > 0
        dev.audit()


class TestHostTrim:
    def test_trim_in_use(self):
        dev = new_device(SMALL)
        dev.host_write(7)
        dev.host_trim(7)
        assert dev.in_use == 0
        assert dev.page_lba.count(INVALID) == 1
        assert dev.metrics_snapshot().trim_requests == 1
        dev.audit()

    def test_trim_never_written_is_counted_noop(self):
        dev = new_device(SMALL)
        dev.host_trim(9)
        m = dev.metrics_snapshot()
        assert m.noop_trims == 1
        assert m.trim_requests == 0
        assert dev.in_use == 0
        dev.audit()

    def test_write_trim_write_consumes_two_pages(self):
        dev = new_device(SMALL)
        dev.host_write(4)
        dev.host_trim(4)
        dev.host_write(4)
        assert dev.in_use == 1
        valid_pages = [i for i, v in enumerate(dev.page_lba) if v == 4]
        assert len(valid_pages) == 1
        assert dev.page_lba.count(INVALID) == 1
        consumed = sum(1 for v in dev.page_lba if v != FREE)
        assert consumed == 2
        dev.audit()

    def test_trim_out_of_range(self):
        dev = new_device(SMALL)
        with pytest.raises(ValueError):
            dev.host_trim(SMALL.user_lbas + 5)


class TestVictimSelection:
    def fill_blocks(self, dev, lbas_per_block):
        # deterministic helper: write each listed lba once, in order
        for lba in lbas_per_block:
            dev.host_write(lba)

    def test_min_valid_selected(self):
        geo = DeviceGeometry(256, 200, 16, 2)
        dev = new_device(geo)
        # fill three blocks with distinct lbas, then invalidate different counts
        self.fill_blocks(dev, range(48))
        assert dev.occupied == [0, 1, 2]
        for lba in range(0, 11):      # block 0 loses 11 -> 5 valid
            dev.host_write(lba)
        for lba in range(16, 30):     # block 1 loses 14 -> 2 valid
            dev.host_write(lba)
        for lba in range(32, 41):     # block 2 loses 9 -> 7 valid
            dev.host_write(lba)
        counts = {b: dev.valid_count[b] for b in (0, 1, 2)}
        assert counts == {0: 5, 1: 2, 2: 7}
        assert dev.select_victim() == 1

    def test_tie_breaks_oldest_first(self):
        geo = DeviceGeometry(256, 200, 16, 2)
        dev = new_device(geo)
        self.fill_blocks(dev, range(32))
        assert dev.occupied == [0, 1]
        for lba in range(0, 3):
            dev.host_write(lba)
        for lba in range(16, 19):
            dev.host_write(lba)
        assert dev.valid_count[0] == dev.valid_count[1] == 13
        assert dev.select_victim() == 0

    def test_fully_invalid_block_costs_nothing(self):
        geo = DeviceGeometry(256, 200, 16, 2)
        dev = new_device(geo)
        self.fill_blocks(dev, range(16))
        self.fill_blocks(dev, range(16))  # rewrite: block 0 now fully invalid
        assert dev.valid_count[0] == 0
        assert dev.select_victim() == 0
        copies = dev.garbage_collect()
        assert copies == 0
        assert dev.gc_page_copies == 0
        assert dev.block_erases == 1

    def test_no_occupied_blocks_error(self):
        dev = new_device(SMALL)
        with pytest.raises(OutOfSpaceError):
            dev.select_victim()

    def test_gc_conservation(self):
        geo = DeviceGeometry(256, 200, 16, 2)
        dev = new_device(geo)
        self.fill_blocks(dev, range(48))
        for lba in range(16, 30):
            dev.host_write(lba)
        victim = dev.select_victim()
        expected = dev.valid_count[victim]
        before = dev.gc_page_copies
        copied = dev.garbage_collect()
        assert copied == expected
        assert dev.gc_page_copies - before == expected

    def test_unreclaimable_device_raises(self):
        # 2 blocks, every occupied page valid: GC cannot make progress
        geo = DeviceGeometry(128, 100, 64, 1)
        dev = new_device(geo)
        with pytest.raises(OutOfSpaceError):
            for lba in range(100):
                dev.host_write(lba)


class TestMetrics:
    def test_fresh_device_reports_wa_one(self):
        m = new_device(SMALL).metrics_snapshot()
        assert m.host_page_writes == 0
        assert m.measured_wa == 1.0
        assert m.in_use_count == 0

    def test_wa_one_before_any_gc(self):
        dev = new_device(SMALL)
        for lba in range(20):
            dev.host_write(lba)
        assert dev.metrics_snapshot().measured_wa == 1.0

    def test_window_delta_non_negative(self):
        dev = new_device(SMALL)
        rng = np.random.default_rng(5)
        for lba in rng.integers(0, SMALL.user_lbas, 2000):
            dev.host_write(int(lba))
        a = dev.metrics_snapshot()
        for lba in rng.integers(0, SMALL.user_lbas, 2000):
            dev.host_write(int(lba))
        b = dev.metrics_snapshot()
        w = b.delta(a)
        assert w.host_page_writes == 2000
        assert w.gc_page_copies >= 0
        assert w.block_erases >= 0
        assert w.trim_requests == 0
        assert w.measured_wa >= 1.0


class TestDeterminism:
    def test_identical_request_sequences_identical_counters(self):
        def trajectory(seed):
            dev = new_device(SMALL)
            rng = np.random.default_rng(seed)
            out = []
            for _ in range(4000):
                lba = int(rng.integers(0, SMALL.user_lbas))
                if rng.random() < 0.2:
                    dev.host_trim(lba)
                else:
                    dev.host_write(lba)
                m = dev.metrics_snapshot()
                out.append((m.host_page_writes, m.gc_page_copies, m.block_erases,
                            m.trim_requests, m.noop_trims, m.in_use_count))
            return out

        assert trajectory(123) == trajectory(123)
        assert trajectory(123) != trajectory(124)


class TestInvariantFuzz:
    def test_partition_and_bijection_under_random_requests(self):
        dev = new_device(DeviceGeometry(2048, 1500, 32, 3))
        rng = np.random.default_rng(42)
        kinds = rng.random(20_000)
        lbas = rng.integers(0, 1500, 20_000)
        for i in range(20_000):
            if kinds[i] < 0.25:
                dev.host_trim(int(lbas[i]))
            else:
                dev.host_write(int(lbas[i]))
            if i % 1000 == 999:
                dev.audit()
        dev.audit()
        # partition by explicit count
        states = [dev.page_state(p)[0] for p in range(2048)]
        assert (
            states.count(PageState.FREE)
            + states.count(PageState.VALID)
            + states.count(PageState.INVALID)
            == 2048
        )

    def test_greedy_optimality_observed(self):
        dev = new_device(DeviceGeometry(1024, 800, 32, 2))
        rng = np.random.default_rng(9)
        for lba in rng.integers(0, 800, 5000):
            dev.host_write(int(lba))
        victim = dev.select_victim()
        vmin = dev.valid_count[victim]
        assert all(dev.valid_count[b] >= vmin for b in dev.occupied)


class FtlMachine(RuleBasedStateMachine):
    """Random host requests against a model of the In-Use set."""

    @initialize()
    def setup(self):
        self.dev = new_device(DeviceGeometry(512, 320, 16, 2))
        self.model = set()

    @rule(lba=st.integers(0, 319))
    def write(self, lba):
        self.dev.host_write(lba)
        self.model.add(lba)

    @rule(lba=st.integers(0, 319))
    def trim(self, lba):
        self.dev.host_trim(lba)
        self.model.discard(lba)

    @invariant()
    def in_use_matches_model(self):
        if hasattr(self, "dev"):
            assert self.dev.in_use == len(self.model)

    @invariant()
    def structural_invariants_hold(self):
        if hasattr(self, "dev"):
            self.dev.audit()


TestFtlStateMachine = FtlMachine.TestCase
TestFtlStateMachine.settings = settings(
    max_examples=25,
    stateful_step_count=60,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
