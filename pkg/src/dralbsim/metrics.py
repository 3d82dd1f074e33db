"""Measured quantities: utilization, energy, makespan, traffic overflow and
the per-run report that aggregates them."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

from .core_model import PhysicalHost, PowerState

log = logging.getLogger(__name__)

N_RESOURCES = 4

Fractions = Tuple[float, float, float, float]


@dataclass(frozen=True)
class UtilizationSnapshot:
    per_host: Tuple[Fractions, ...]
    dc_average: float
    n_resources: int = N_RESOURCES


def dc_utilization(per_host: Sequence[Fractions], theta: Sequence[int]) -> float:
    """Datacenter average: summed per-resource utilization of the assigned
    entries over ``|N| * sum(theta)``. Zero when nothing is assigned."""
    assigned = sum(theta)
    if assigned == 0:
        log.warning("no assigned hosts; datacenter utilization defined as 0")
        return 0.0
    sums = [math.fsum(phi[d] for phi, t in zip(per_host, theta) if t) for d in range(N_RESOURCES)]
    return math.fsum(sums) / (N_RESOURCES * assigned)


def utilization(hosts: Sequence[PhysicalHost],
                active: Optional[Sequence[int]] = None) -> UtilizationSnapshot:
    """Per-host utilization of the four resources plus the datacenter average.

    ``active`` holds the 0/1 assignment flag of each host; by default a host
    counts when it carries at least one VM.
    """
    per_host = tuple(h.utilization() for h in hosts)
    if active is None:
        active = [1 if h.vm_demands else 0 for h in hosts]
    return UtilizationSnapshot(per_host, dc_utilization(per_host, active))


@dataclass(frozen=True)
class TimingRecord:
    task_id: int
    arrival_time: float
    processing_time: float
    receiving_time: float
    waiting_time: float

    @property
    def total(self) -> float:
        return self.processing_time + self.receiving_time + self.waiting_time

    @property
    def completion_time(self) -> float:
        return self.arrival_time + self.total


def makespan(timings: Sequence[TimingRecord]) -> float:
    """Last completion minus first arrival."""
    if not timings:
        raise ValueError("makespan of an empty set of tasks is undefined")
    return max(t.completion_time for t in timings) - min(t.arrival_time for t in timings)


class HostPowerMode(Enum):
    WORKING = "on-working"
    IDLE = "on-idle"
    OFF = "off"


@dataclass(frozen=True)
class EnergyRecord:
    host_id: int
    interval: float
    utilization: float
    state: HostPowerMode
    energy: float  # joules


def host_energy(interval: float, util: float, power_work: float, power_idle: float) -> float:
    return interval * (util * power_work + (1.0 - util) * power_idle)


def energy(hosts: Iterable[PhysicalHost], interval: float,
           empty_as_standby: bool = False) -> List[EnergyRecord]:
    """Energy drawn by each host over ``interval`` seconds.

    A powered-on host blends working and idle power by its mean utilization
    across the four resources; an off host draws standby power. With
    ``empty_as_standby`` hosts carrying no VM are billed as off.
    """
    if interval <= 0:
        raise ValueError("interval must be > 0")
    records = []
    for h in hosts:
        off = h.state is PowerState.OFF or (empty_as_standby and not h.vm_demands)
        if off:
            records.append(EnergyRecord(h.id, interval, 0.0, HostPowerMode.OFF,
                                        interval * h.power_standby))
            continue
        u = min(sum(h.utilization()) / N_RESOURCES, 1.0)
        mode = HostPowerMode.WORKING if h.vm_demands else HostPowerMode.IDLE
        records.append(EnergyRecord(h.id, interval, u, mode,
                                    host_energy(interval, u, h.power_work, h.power_idle)))
    return records


def total_energy(records: Iterable[EnergyRecord]) -> float:
    return math.fsum(r.energy for r in records)


def traffic_percentages(assigned: Sequence[float]) -> List[float]:
    total = math.fsum(assigned)
    if total <= 0:
        raise ValueError("total assigned weight must be > 0")
    return [100.0 * a / total for a in assigned]


def traffic_overflow(assigned: Sequence[float], capacity: Sequence[float]) -> float:
    """Share of traffic sitting on servers above their fair share.

    A server's fair share is its fraction of total capacity; the result is
    the summed excess of traffic fraction over fair share, in [0, 1).
    """
    if len(assigned) != len(capacity):
        raise ValueError("assigned and capacity must have the same length")
    pct = traffic_percentages(assigned)
    cap_total = math.fsum(capacity)
    if cap_total <= 0:
        raise ValueError("total capacity weight must be > 0")
    excess = math.fsum(max(p - 100.0 * c / cap_total, 0.0) for p, c in zip(pct, capacity))
    return excess / 100.0


@dataclass
class MetricsReport:
    makespan: float
    avg_response_time: float
    utilization: UtilizationSnapshot
    mean_utilization: float  # time average of the datacenter utilization
    wastage_pct: float
    failures: int
    sla_vrate: float
    pf: float
    energy_total: float
    traffic_overflow: List[float] = field(default_factory=list)
    tasks_total: int = 0
    tasks_placed: int = 0
    migrations: int = 0

    @property
    def mean_overflow(self) -> float:
        return math.fsum(self.traffic_overflow) / len(self.traffic_overflow) \
            if self.traffic_overflow else 0.0

    def row(self) -> dict:
        """Flat scalar view used by the CSV/JSON writers."""
        return {
            "makespan": self.makespan,
            "avg_response_time": self.avg_response_time,
            "dc_utilization": self.utilization.dc_average,
            "mean_utilization": self.mean_utilization,
            "wastage_pct": self.wastage_pct,
            "failures": self.failures,
            "sla_vrate": self.sla_vrate,
            "pf": self.pf,
            "energy_total": self.energy_total,
            "mean_traffic_overflow": self.mean_overflow,
            "tasks_total": self.tasks_total,
            "tasks_placed": self.tasks_placed,
            "migrations": self.migrations,
        }
