"""Discrete-event simulation of task deployment on a datacenter."""

from __future__ import annotations

import heapq
import math
import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Deque, Dict, List, Optional, Set, Tuple

import numpy as np

from . import metrics
from .classifier import classify, classify_into_queues
from .core_model import Datacenter, PhysicalHost, ResourceVector, Task, VirtualMachine
from .metrics import MetricsReport, TimingRecord
from .schedulers import (PolicyKind, place_dhlb, place_dralb, place_random,
                         place_sequential)
from .sla import (SlaContract, SlaLedger, check_violation, penalty_function,
                  rebalance_trigger, sla_violation_rate)
from .workload import WorkloadRanges, generate_tasks


THREADS_ENV = "DRALB_SIM_THREADS"


@dataclass
class SimConfig:
    """One simulation cell.

    Host capacity is ``vms_per_host`` times the per-VM setup (MIPS, RAM,
    bandwidth and energy budget); MIPS alternates between the listed values
    host by host.
    """
    host_count: int = 20
    vms_per_host: int = 10
    task_count: int = 400
    policy: PolicyKind = PolicyKind.DRALB
    seed: int = 0
    arrival_rate: float = 10.0
    sample_interval: float = 1.0
    cluster_size: int = 10
    # an infinite rt_threshold means "twice the mean lone-task service time"
    contract: SlaContract = field(default_factory=lambda: SlaContract(rt_threshold=math.inf))
    workload: WorkloadRanges = field(default_factory=WorkloadRanges)
    vm_mips: Tuple[float, ...] = (1860.0, 2660.0)
    vm_ram: float = 4096.0        # MB
    vm_bw: float = 100.0          # M/s
    vm_energy: float = 50.0       # W budget
    vm_storage: float = 10240.0   # MB; recorded, not a placement dimension
    power_work: float = 250.0
    power_idle: float = 150.0
    power_standby: float = 10.0
    service_time: float = 0.45    # s; sets cpu demand = length / service_time
    batch_arrivals: bool = False
    rebalance: bool = True

    def validate(self) -> None:
        if self.host_count < 0:
            raise ValueError("host_count must be >= 0")
        if self.task_count < 0:
            raise ValueError("task_count must be >= 0")
        if self.vms_per_host < 1:
            raise ValueError("vms_per_host must be >= 1")
        if not self.arrival_rate > 0:
            raise ValueError("arrival_rate must be > 0")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be > 0")
        if self.cluster_size < 1:
            raise ValueError("cluster_size must be >= 1")
        if not self.service_time > 0:
            raise ValueError("service_time must be > 0")
        if not self.vm_mips or any(not c > 0 for c in self.vm_mips):
            raise ValueError("vm_mips values must be > 0")
        for name in ("vm_ram", "vm_bw", "vm_energy", "vm_storage"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("power_work", "power_idle", "power_standby"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.workload.validate()

    def host_capacity(self, i: int) -> ResourceVector:
        n = self.vms_per_host
        return ResourceVector(n * self.vm_mips[i % len(self.vm_mips)], n * self.vm_ram,
                              n * self.vm_energy, n * self.vm_bw)

    def build_hosts(self) -> List[PhysicalHost]:
        return [PhysicalHost(id=i, capacity=self.host_capacity(i),
                             power_work=self.power_work, power_idle=self.power_idle,
                             power_standby=self.power_standby)
                for i in range(self.host_count)]

    def reference_capacity(self) -> ResourceVector:
        """Mean host capacity; the scale against which tasks are classified."""
        n = self.vms_per_host
        return ResourceVector(n * float(np.mean(self.vm_mips)), n * self.vm_ram,
                              n * self.vm_energy, n * self.vm_bw)


class EventKind(IntEnum):
    # value is the tie-break priority at equal times
    COMPLETION = 0
    ARRIVAL = 1
    REBALANCE = 2
    SAMPLE = 3


@dataclass(order=True)
class Event:
    time: float
    kind: EventKind
    seq: int
    payload: int = field(default=-1, compare=False)


def generate_workload(config: SimConfig) -> List[Task]:
    rng = np.random.default_rng([config.seed, 0])
    return generate_tasks(config.task_count, rng, config.workload, config.arrival_rate,
                          config.service_time, batch=config.batch_arrivals)


class Simulation:
    def __init__(self, config: SimConfig):
        config.validate()
        self.config = config
        self.dc = Datacenter(config.build_hosts())
        self.tasks = generate_workload(config)
        self.ref_capacity = config.reference_capacity()
        self.policy_rng = np.random.default_rng([config.seed, 1])
        self.contract = config.contract
        if not math.isfinite(self.contract.rt_threshold):
            self.contract = replace(self.contract, rt_threshold=2.0 * self.mean_service_time())
        self.ledger = SlaLedger()
        self._heap: List[Event] = []
        self._seq = 0
        self._pending = 0  # arrivals + completions still in the heap
        self.now = 0.0
        self.running: Dict[int, Set[int]] = {h.id: set() for h in self.dc.hosts}
        self.waiting: Dict[int, Deque[int]] = {h.id: deque() for h in self.dc.hosts}
        self.start_info: Dict[int, Tuple[float, float, float, float]] = {}
        self.timings: List[TimingRecord] = []
        self.event_times: List[float] = []
        self.failed_ids: List[int] = []
        self.migrations = 0
        self.overflow_series: List[float] = []
        self.cum_traffic = [0.0] * len(self.dc.hosts)
        # time integrals
        self._last_t: Optional[float] = None
        self._util_integral = 0.0
        self._phi_integral = [[0.0] * 4 for _ in self.dc.hosts]
        self._phi_cache: Dict[int, Tuple[float, float, float, float]] = {}
        self._energy = 0.0
        self._sold: Dict[int, float] = {h.id: 0.0 for h in self.dc.hosts}

    def mean_service_time(self) -> float:
        """Expected processing + receiving time of a lone task on a mean host."""
        w = self.config.workload
        ref = self.ref_capacity
        return (sum(w.length) / 2) / ref.cpu + (sum(w.file_size) / 2) / ref.bw

    # event queue -----------------------------------------------------------
    def _push(self, time: float, kind: EventKind, payload: int = -1) -> None:
        self._seq += 1
        if kind in (EventKind.ARRIVAL, EventKind.COMPLETION):
            self._pending += 1
        heapq.heappush(self._heap, Event(time, kind, self._seq, payload))

    def _pop(self) -> Event:
        ev = heapq.heappop(self._heap)
        if ev.kind in (EventKind.ARRIVAL, EventKind.COMPLETION):
            self._pending -= 1
        return ev

    # accounting ------------------------------------------------------------
    def _host_phi(self, host: PhysicalHost) -> Tuple[float, float, float, float]:
        # reserved-but-queued VMs hold capacity but do no work
        phi = self._phi_cache.get(host.id)
        if phi is None:
            phi = ResourceVector.total(self.dc.vms[v].demand for v in self.running[host.id]) \
                .fractions_of(host.capacity)
            self._phi_cache[host.id] = phi
        return phi

    def _touch(self, *host_ids: int) -> None:
        for h in host_ids:
            self._phi_cache.pop(h, None)

    def _advance(self, t: float) -> None:
        """Integrate utilization, sold resources and energy up to ``t``."""
        if self._last_t is None:
            self._last_t = t
            return
        dt = t - self._last_t
        if dt <= 0:
            return
        hosts = self.dc.hosts
        if hosts:
            per_host = [self._host_phi(h) for h in hosts]
            self._util_integral += dt * metrics.dc_utilization(per_host, [1] * len(hosts))
            for h, phi, acc in zip(hosts, per_host, self._phi_integral):
                self._sold[h.id] += dt * sum(phi)
                for d in range(4):
                    acc[d] += dt * phi[d]
                if h.vm_demands:
                    u = min(sum(phi) / 4.0, 1.0)
                    self._energy += metrics.host_energy(dt, u, h.power_work, h.power_idle)
                else:
                    self._energy += dt * h.power_standby
        self._last_t = t

    # task lifecycle --------------------------------------------------------
    def _decide(self, batch: List[Task]):
        hosts = self.dc.hosts
        kind = self.config.policy
        if kind is PolicyKind.DRALB:
            return place_dralb(classify_into_queues(batch, self.ref_capacity), hosts).decisions
        if kind is PolicyKind.RANDOM:
            return place_random(batch, hosts, self.policy_rng).decisions
        if kind is PolicyKind.SEQUENTIAL:
            return place_sequential(batch, hosts).decisions
        return place_dhlb(batch, hosts, self.config.cluster_size).decisions

    def _handle_arrivals(self, batch: List[Task]) -> None:
        for task in batch:
            if task.weights is None:
                task.weights, _ = classify(task.demand, self.ref_capacity)
        for d in self._decide(batch):
            task = self.tasks[d.task_id]
            if d.failed:
                self.dc.failures += 1
                self.failed_ids.append(task.id)
                continue
            vm = VirtualMachine(task.id, task.demand)
            if not self.dc.try_place(vm, d.host_id, task.client_id):
                self.failed_ids.append(task.id)
                continue
            self.cum_traffic[d.host_id] += task.demand.bw
            if len(self.running[d.host_id]) < self.config.vms_per_host:
                self._start(task, d.host_id)
            else:
                self.waiting[d.host_id].append(task.id)

    @staticmethod
    def _rates(task: Task, host: PhysicalHost) -> Tuple[float, float]:
        """MIPS and bandwidth share: whatever the other resident VMs leave free."""
        free = host.capacity - (host.load - task.demand)
        return max(free.cpu, task.demand.cpu, 1e-9), max(free.bw, task.demand.bw, 1e-9)

    def _start(self, task: Task, host_id: int) -> None:
        host = self.dc.host(host_id)
        self.running[host_id].add(task.id)
        self._touch(host_id)
        mips, bw = self._rates(task, host)
        p = task.length / mips
        r = task.file_size / bw
        w = self.now - task.arrival_time
        util = max(host.utilization())
        self.start_info[task.id] = (p, r, w, util)
        self._push(self.now + r + p, EventKind.COMPLETION, task.id)

    def _complete(self, task_id: int) -> None:
        task = self.tasks[task_id]
        vm = self.dc.vms[task_id]
        host_id = vm.host_id
        self.dc.remove(task_id)
        self.running[host_id].discard(task_id)
        self._touch(host_id)
        p, r, w, util = self.start_info.pop(task_id)
        rec = TimingRecord(task_id, task.arrival_time, p, r, w)
        self.timings.append(rec)
        self.ledger.record(check_violation(rec.total, util, self.contract), host_id)
        self._drain(host_id)

    def _drain(self, host_id: int) -> None:
        q = self.waiting[host_id]
        while q and len(self.running[host_id]) < self.config.vms_per_host:
            self._start(self.tasks[q.popleft()], host_id)

    def _rebalance(self) -> None:
        def can_move(vm_id: int, to_host: int) -> bool:
            return len(self.running[to_host]) < self.config.vms_per_host

        for mv in rebalance_trigger(self.dc.hosts, self.contract, can_move):
            if not can_move(mv.vm_id, mv.to_host):
                continue
            self.dc.move(mv.vm_id, mv.to_host)
            self.migrations += 1
            if mv.vm_id in self.running[mv.from_host]:
                self.running[mv.from_host].discard(mv.vm_id)
                self.running[mv.to_host].add(mv.vm_id)
                self._touch(mv.from_host, mv.to_host)
            else:
                self.waiting[mv.from_host].remove(mv.vm_id)
                self._start(self.tasks[mv.vm_id], mv.to_host)
            self._drain(mv.from_host)

    def _sample(self) -> None:
        load = self.cum_traffic
        if sum(load) > 0:
            self.overflow_series.append(
                metrics.traffic_overflow(load, [h.capacity.bw for h in self.dc.hosts]))

    # main loop -------------------------------------------------------------
    def run(self) -> MetricsReport:
        cfg = self.config
        for task in self.tasks:
            self._push(task.arrival_time, EventKind.ARRIVAL, task.id)
        t0 = self.tasks[0].arrival_time if self.tasks else 0.0
        self._push(t0 + cfg.sample_interval, EventKind.SAMPLE)
        do_rebalance = cfg.rebalance and cfg.policy is PolicyKind.DRALB
        if do_rebalance:
            self._push(t0 + cfg.sample_interval, EventKind.REBALANCE)
        self._advance(t0)
        while self._heap:
            ev = self._pop()
            if ev.kind in (EventKind.SAMPLE, EventKind.REBALANCE) and self._pending == 0:
                continue
            self._advance(ev.time)
            self.now = ev.time
            self.event_times.append(ev.time)
            if ev.kind is EventKind.ARRIVAL:
                batch = [self.tasks[ev.payload]]
                while (self._heap and self._heap[0].kind is EventKind.ARRIVAL
                       and self._heap[0].time == ev.time):
                    batch.append(self.tasks[self._pop().payload])
                self._handle_arrivals(batch)
            elif ev.kind is EventKind.COMPLETION:
                self._complete(ev.payload)
            elif ev.kind is EventKind.REBALANCE:
                self._rebalance()
                self._push(ev.time + cfg.sample_interval, EventKind.REBALANCE)
            else:
                self._sample()
                self._push(ev.time + cfg.sample_interval, EventKind.SAMPLE)
        return self._report(t0)

    def _report(self, t0: float) -> MetricsReport:
        span = metrics.makespan(self.timings) if self.timings else 0.0
        horizon = (self._last_t - t0) if self._last_t is not None else 0.0
        mean_util = self._util_integral / horizon if horizon > 0 else 0.0
        per_host = tuple(tuple(v / horizon if horizon > 0 else 0.0 for v in acc)
                         for acc in self._phi_integral)
        avg_rt = (math.fsum(t.total for t in self.timings) / len(self.timings)
                  if self.timings else 0.0)
        return MetricsReport(
            makespan=span,
            avg_response_time=avg_rt,
            utilization=metrics.UtilizationSnapshot(per_host, mean_util),
            mean_utilization=mean_util,
            wastage_pct=100.0 * (1.0 - mean_util),
            failures=self.dc.failures,
            sla_vrate=sla_violation_rate(self.ledger) if self.ledger.total_requests else 0.0,
            pf=penalty_function(self._sold, self.ledger, self.contract),
            energy_total=self._energy,
            traffic_overflow=list(self.overflow_series),
            tasks_total=len(self.tasks),
            tasks_placed=len(self.timings),
            migrations=self.migrations,
        )


def run(config: SimConfig) -> MetricsReport:
    """Simulate one cell to quiescence."""
    return Simulation(config).run()


@dataclass
class Replication:
    configs: List[SimConfig]
    reports: List[MetricsReport]
    # metric -> (mean, min, max) over seeds
    summary: Dict[str, Tuple[float, float, float]]


def thread_cap(default: Optional[int] = None) -> int:
    """Worker count from ``DRALB_SIM_THREADS``, else ``default`` or the CPU count."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1")
        return n
    return default or os.cpu_count() or 1


def summarize(reports: List[MetricsReport]) -> Dict[str, Tuple[float, float, float]]:
    if not reports:
        raise ValueError("nothing to summarize")
    rows = [r.row() for r in reports]
    out = {}
    for key in rows[0]:
        vals = [float(row[key]) for row in rows]
        out[key] = (math.fsum(vals) / len(vals), min(vals), max(vals))
    return out


def run_many(configs: List[SimConfig], threads: Optional[int] = None) -> List[MetricsReport]:
    """Run independent cells, returning reports in input order."""
    for c in configs:
        c.validate()
    workers = min(threads or thread_cap(), len(configs)) if configs else 1
    if workers <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs, chunksize=max(1, len(configs) // (4 * workers))))


def replicate(config: SimConfig, n_seeds: int, threads: Optional[int] = None) -> Replication:
    """Run seeds ``config.seed + 0 .. n_seeds - 1``; results are ordered by seed."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    configs = [replace(config, seed=config.seed + k) for k in range(n_seeds)]
    reports = run_many(configs, threads)
    return Replication(configs, reports, summarize(reports))
