import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dralbsim import metrics
from dralbsim.core_model import PhysicalHost, PowerState, ResourceVector
from dralbsim.metrics import (HostPowerMode, TimingRecord, dc_utilization, energy, makespan,
                              total_energy, traffic_overflow, traffic_percentages, utilization)

from . import oracles

RV = ResourceVector


class TestUtilization:
    def test_cpu_fraction(self):
        h = PhysicalHost(0, RV(2000, 1000, 100, 100))
        h.attach(0, RV(500, 0, 0, 0))
        h.attach(1, RV(500, 0, 0, 0))
        assert h.utilization()[0] == 0.5

    def test_dc_average(self):
        assert dc_utilization([(0.4, 0.6, 0.5, 0.5)], [1]) == pytest.approx(0.5, abs=1e-12)

    def test_unassigned_hosts_excluded(self):
        assert dc_utilization([(1, 1, 1, 1), (0.2, 0.2, 0.2, 0.2)], [0, 1]) == pytest.approx(0.2)

    def test_nothing_assigned_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert dc_utilization([(0.5,) * 4], [0]) == 0.0
        assert "no assigned" in caplog.text

    def test_recompute_from_placements(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            hosts = [PhysicalHost(i, RV(*rng.uniform(1000, 3000, 4))) for i in range(4)]
            raw = {}
            for v in range(10):
                h = hosts[int(rng.integers(0, 4))]
                d = RV(*rng.uniform(0, 150, 4))
                h.attach(v, d)
                raw.setdefault(h.id, []).append(d.as_tuple())
            active = [h.id in raw for h in hosts]
            want_sum, n = 0.0, 0
            for h in hosts:
                if h.id in raw:
                    n += 1
                    for k in range(4):
                        want_sum += sum(d[k] for d in raw[h.id]) / h.capacity.as_tuple()[k]
            snap = utilization(hosts)
            assert snap.dc_average == pytest.approx(want_sum / (4 * n), abs=1e-12)
            assert [int(a) for a in active] == [1 if h.vm_demands else 0 for h in hosts]


class TestEnergy:
    def test_blend(self):
        assert metrics.host_energy(3600, 0.5, 200, 100) == pytest.approx(540_000, abs=1e-9)

    def test_off_host_standby(self):
        h = PhysicalHost(0, RV(1, 1, 1, 1), power_standby=10.0, state=PowerState.OFF)
        rec = energy([h], 3600)[0]
        assert rec.state is HostPowerMode.OFF and rec.energy == 36_000

    def test_idle_on_host(self):
        h = PhysicalHost(0, RV(1, 1, 1, 1), power_idle=150.0)
        rec = energy([h], 10)[0]
        assert rec.state is HostPowerMode.IDLE and rec.energy == 1500

    def test_empty_as_standby(self):
        h = PhysicalHost(0, RV(1, 1, 1, 1), power_standby=7.0)
        assert energy([h], 2, empty_as_standby=True)[0].energy == 14.0

    def test_mean_of_four_dimensions_drives_power(self):
        h = PhysicalHost(0, RV(100, 100, 100, 100), power_work=200, power_idle=100)
        h.attach(0, RV(100, 0, 100, 0))
        assert energy([h], 1)[0].energy == pytest.approx(150.0)

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            energy([], 0)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=6), st.floats(0.1, 1e4))
    def test_additive_and_linear(self, utils, dt):
        hosts = []
        for i, u in enumerate(utils):
            h = PhysicalHost(i, RV(100, 100, 100, 100))
            h.attach(0, RV(100 * u, 100 * u, 100 * u, 100 * u))
            hosts.append(h)
        whole = total_energy(energy(hosts, dt))
        split = total_energy(energy(hosts[:1], dt)) + total_energy(energy(hosts[1:], dt))
        assert whole == pytest.approx(split, rel=1e-12)
        assert total_energy(energy(hosts, 2 * dt)) == pytest.approx(2 * whole, rel=1e-12)


class TestMakespan:
    def test_single(self):
        assert makespan([TimingRecord(0, 0.0, 3.0, 1.0, 2.0)]) == 6.0

    def test_two_hosts(self):
        recs = [TimingRecord(0, 0.0, 6.0, 0, 0), TimingRecord(1, 0.0, 4.0, 3.0, 2.0)]
        assert makespan(recs) == 9.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            makespan([])

    @given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100), st.floats(0, 100)),
                    min_size=1, max_size=20))
    def test_at_least_longest_task(self, parts):
        recs = [TimingRecord(i, 0.0, p, r, w) for i, (p, r, w) in enumerate(parts)]
        assert makespan(recs) >= max(r.total for r in recs)


class TestTraffic:
    def test_percentage(self):
        assert traffic_percentages([25, 75])[0] == 25.0

    def test_even_is_zero(self):
        assert traffic_overflow([10, 10, 10, 10], [1, 1, 1, 1]) == 0.0

    def test_all_on_one_server(self):
        assert traffic_overflow([40, 0, 0, 0], [1, 1, 1, 1]) == pytest.approx(0.75, abs=1e-12)

    def test_zero_total_rejected(self):
        with pytest.raises(ValueError):
            traffic_percentages([0, 0])

    @given(st.lists(st.tuples(st.floats(0, 1e3), st.floats(1, 1e3)), min_size=1, max_size=8))
    def test_matches_exact_recompute(self, pairs):
        a = [p[0] for p in pairs]
        c = [p[1] for p in pairs]
        if sum(a) <= 0:
            return
        got = traffic_overflow(a, c)
        assert 0.0 <= got < 1.0
        assert got == pytest.approx(oracles.overflow(a, c), abs=1e-9)


def test_report_row_and_wastage():
    snap = metrics.UtilizationSnapshot(((0.2, 0.2, 0.2, 0.2),), 0.2)
    rep = metrics.MetricsReport(1.0, 1.0, snap, 0.37, 63.0, 0, 0.0, 0.0, 0.0, [0.1, 0.3])
    assert rep.mean_overflow == pytest.approx(0.2)
    assert rep.wastage_pct + 100 * rep.mean_utilization == pytest.approx(100, abs=1e-6)
    assert set(rep.row()) >= {"makespan", "wastage_pct", "mean_traffic_overflow"}
    assert not math.isnan(rep.row()["pf"])
