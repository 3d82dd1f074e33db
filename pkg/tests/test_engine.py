import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dralbsim.engine import (Event, EventKind, SimConfig, Simulation, generate_workload,
                             replicate, run, summarize, thread_cap)
from dralbsim.schedulers import PolicyKind
from dralbsim.sla import SlaContract

SMALL = SimConfig(host_count=4, task_count=60, arrival_rate=20.0)


class CheckedSimulation(Simulation):
    """Asserts the capacity invariant and utilization bound at every event."""

    def _advance(self, t):
        assert self.dc.check_capacity()
        for h in self.dc.hosts:
            assert max(self._host_phi(h)) <= 1.0 + 1e-9
            assert max(h.utilization()) <= 1.0 + 1e-9
        super()._advance(t)


def test_event_priority():
    evs = sorted([Event(1.0, EventKind.SAMPLE, 1), Event(1.0, EventKind.ARRIVAL, 2),
                  Event(1.0, EventKind.COMPLETION, 3), Event(1.0, EventKind.REBALANCE, 4),
                  Event(0.5, EventKind.SAMPLE, 5)])
    assert [e.seq for e in evs] == [5, 3, 2, 4, 1]


def test_single_task_fits():
    cfg = SimConfig(host_count=1, task_count=1,
                    contract=SlaContract(rt_threshold=1e6, ruc_threshold=1.0))
    rep = run(cfg)
    assert rep.failures == 0 and rep.sla_vrate == 0.0 and rep.tasks_placed == 1


def test_zero_hosts_all_fail():
    rep = run(SimConfig(host_count=0, task_count=7))
    assert rep.failures == 7 and rep.tasks_placed == 0


def test_zero_tasks():
    rep = run(SimConfig(task_count=0))
    assert rep.makespan == 0.0 and rep.failures == 0


def test_identical_reports():
    assert run(SMALL).row() == run(SMALL).row()
    assert run(SMALL).traffic_overflow == run(SMALL).traffic_overflow


def test_workload_is_policy_independent():
    a = generate_workload(SMALL)
    b = generate_workload(replace(SMALL, policy=PolicyKind.RANDOM))
    assert [t.demand for t in a] == [t.demand for t in b]


@pytest.mark.parametrize("policy", list(PolicyKind))
@pytest.mark.parametrize("batch", [False, True])
def test_invariants_every_event(policy, batch):
    sim = CheckedSimulation(replace(SMALL, policy=policy, batch_arrivals=batch, task_count=120))
    rep = sim.run()
    assert rep.tasks_placed + rep.failures == rep.tasks_total
    assert sim.event_times == sorted(sim.event_times)
    assert rep.wastage_pct + 100 * rep.mean_utilization == pytest.approx(100, abs=1e-6)
    assert 0.0 <= rep.mean_utilization <= 1.0
    for t in sim.timings:
        assert t.waiting_time >= 0 and t.processing_time > 0 and t.receiving_time > 0


def test_no_wait_when_slots_free():
    sim = Simulation(SimConfig(host_count=10, task_count=30, batch_arrivals=True))
    sim.run()
    assert all(t.waiting_time == 0.0 for t in sim.timings)


def test_queueing_when_slots_are_full():
    # generous per-VM capacity so only the slot count binds
    sim = Simulation(SimConfig(host_count=1, vms_per_host=2, task_count=6, batch_arrivals=True,
                               policy=PolicyKind.SEQUENTIAL, vm_ram=1e5, vm_bw=1e4,
                               vm_energy=1e4, service_time=10.0))
    rep = sim.run()
    waits = sorted(t.waiting_time for t in sim.timings)
    assert rep.failures == 0 and waits[:2] == [0.0, 0.0] and waits[-1] > 0


def test_makespan_covers_longest_task_in_batch():
    sim = Simulation(replace(SMALL, batch_arrivals=True))
    rep = sim.run()
    assert rep.makespan >= max(t.total for t in sim.timings) - 1e-12


def test_migrations_only_for_dralb():
    for pol in (PolicyKind.RANDOM, PolicyKind.SEQUENTIAL, PolicyKind.DHLB):
        assert run(replace(SMALL, policy=pol, task_count=200)).migrations == 0


def test_auto_rt_threshold():
    sim = Simulation(SMALL)
    assert sim.contract.rt_threshold == pytest.approx(2 * sim.mean_service_time())
    assert math.isfinite(sim.contract.rt_threshold)


@pytest.mark.parametrize("field,value", [("host_count", -1), ("task_count", -1),
                                         ("arrival_rate", 0.0), ("vms_per_host", 0),
                                         ("service_time", 0.0), ("seed", -1)])
def test_invalid_config(field, value):
    with pytest.raises(ValueError):
        replace(SimConfig(), **{field: value}).validate()


def test_host_capacity_is_vm_multiple():
    cfg = SimConfig(vms_per_host=10)
    assert cfg.host_capacity(0).as_tuple() == (18600.0, 40960.0, 500.0, 1000.0)
    assert cfg.host_capacity(1).cpu == 26600.0


class TestReplicate:
    def test_single_seed_summary(self):
        rep = replicate(SMALL, 1)
        for k, v in rep.reports[0].row().items():
            assert rep.summary[k] == (float(v), float(v), float(v))

    def test_mean_matches_recomputation(self):
        rep = replicate(SMALL, 4)
        vals = [r.makespan for r in rep.reports]
        assert rep.summary["makespan"][0] == pytest.approx(sum(vals) / 4, rel=1e-12)
        assert rep.summary["makespan"][1:] == (min(vals), max(vals))

    def test_ordered_by_seed_any_thread_count(self):
        a = replicate(replace(SMALL, seed=10), 3, threads=1)
        b = replicate(replace(SMALL, seed=10), 3, threads=3)
        assert [c.seed for c in a.configs] == [10, 11, 12]
        assert [r.row() for r in a.reports] == [r.row() for r in b.reports]

    def test_bad_n(self):
        with pytest.raises(ValueError):
            replicate(SMALL, 0)

    def test_summarize_empty(self):
        with pytest.raises(ValueError):
            summarize([])


def test_thread_cap_env(monkeypatch):
    monkeypatch.setenv("DRALB_SIM_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("DRALB_SIM_THREADS", "zero")
    with pytest.raises(ValueError):
        thread_cap()
    monkeypatch.delenv("DRALB_SIM_THREADS")
    assert thread_cap(5) == 5


@settings(max_examples=25)
@given(st.integers(0, 2**63), st.sampled_from(list(PolicyKind)), st.integers(0, 5),
       st.integers(0, 40), st.booleans())
def test_conservation_property(seed, policy, hosts, tasks, batch):
    cfg = SimConfig(host_count=hosts, task_count=tasks, seed=seed, policy=policy,
                    batch_arrivals=batch, vms_per_host=3)
    rep = CheckedSimulation(cfg).run()
    assert rep.tasks_placed + rep.failures == tasks


def test_response_time_ordering_at_400_tasks():
    """DRALB beats random placement on mean response time with tasks < VMs."""
    cfg = SimConfig(task_count=400, host_count=100, arrival_rate=40.0)
    d = replicate(replace(cfg, policy=PolicyKind.DRALB), 20, threads=1).reports
    r = replicate(replace(cfg, policy=PolicyKind.RANDOM), 20, threads=1).reports
    wins = sum(a.avg_response_time < b.avg_response_time for a, b in zip(d, r))
    assert wins >= 16
