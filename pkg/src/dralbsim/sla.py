"""SLA bookkeeping: thresholds, violation accounting, the penalty-adjusted
profit and the local/global rebalancing pass."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence

from .classifier import classify
from .core_model import PhysicalHost, PowerState, ResourceVector
from .schedulers import headroom_score

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SlaContract:
    rt_threshold: float = 10.0
    ruc_threshold: float = 0.9
    price_per_unit: float = 1.0
    penalty_per_unit: float = 0.5
    cost_per_unit: float = 0.1

    def __post_init__(self):
        if self.rt_threshold <= 0:
            raise ValueError("rt_threshold must be > 0")
        if not 0 < self.ruc_threshold <= 1:
            raise ValueError("ruc_threshold must be in (0, 1]")


class ViolationReport(NamedTuple):
    violated: bool
    excess: float


@dataclass
class SlaLedger:
    total_requests: int = 0
    violated_requests: int = 0
    violation_units: float = 0.0
    units_by_host: Dict[int, float] = field(default_factory=dict)

    def record(self, report: ViolationReport, host_id: Optional[int] = None) -> None:
        self.total_requests += 1
        if report.violated:
            self.violated_requests += 1
            self.violation_units += report.excess
            if host_id is not None:
                self.units_by_host[host_id] = self.units_by_host.get(host_id, 0.0) + report.excess


def check_violation(observed_rt: float, observed_util: float,
                    contract: SlaContract) -> ViolationReport:
    """Strictly above either threshold is a violation; the excess is the
    larger of the two relative overshoots."""
    rt_excess = (observed_rt - contract.rt_threshold) / contract.rt_threshold
    util_excess = (observed_util - contract.ruc_threshold) / contract.ruc_threshold
    violated = rt_excess > 0 or util_excess > 0
    return ViolationReport(violated, max(rt_excess, util_excess, 0.0) if violated else 0.0)


def host_profit(price: float, sold: float, penalty: float, units: float, cost: float) -> float:
    return price * sold - (penalty * units + cost * sold)


def penalty_function(resources_sold: Mapping[int, float], ledger: SlaLedger,
                     contract: SlaContract) -> float:
    """Profit net of penalties and cost, summed over hosts."""
    return math.fsum(
        host_profit(contract.price_per_unit, sold, contract.penalty_per_unit,
                    ledger.units_by_host.get(host_id, 0.0), contract.cost_per_unit)
        for host_id, sold in resources_sold.items())


def sla_violation_rate(ledger: SlaLedger) -> float:
    if ledger.total_requests == 0:
        log.warning("no requests recorded; SLA violation rate defined as 0")
        return 0.0
    return ledger.violated_requests / ledger.total_requests


class Move(NamedTuple):
    vm_id: int
    from_host: int
    to_host: int


def _overloaded(load: ResourceVector, capacity: ResourceVector, threshold: float) -> bool:
    return any(f > threshold for f in load.fractions_of(capacity))


def rebalance_trigger(hosts: Sequence[PhysicalHost], contract: SlaContract,
                      can_move: Optional[Callable[[int, int], bool]] = None) -> List[Move]:
    """Propose VM moves off hosts above the utilization threshold.

    Local pass: a host is overloaded when any resource exceeds the RUC
    threshold. Global pass: for each overloaded host, its smallest VMs are
    moved, one at a time, to the non-overloaded host with the best headroom
    score that stays at or below the threshold after the move. Stops per host
    once it is no longer overloaded or nothing can move.

    ``can_move(vm_id, to_host)`` lets the caller veto destinations. Hosts
    are not mutated.
    """
    thr = contract.ruc_threshold
    on = sorted((h for h in hosts if h.state is PowerState.ON), key=lambda h: h.id)
    loads = {h.id: h.load for h in on}
    resident = {h.id: dict(h.vm_demands) for h in on}
    moves: List[Move] = []
    for src in on:
        if not _overloaded(loads[src.id], src.capacity, thr):
            continue
        by_size = sorted(resident[src.id].items(),
                         key=lambda kv: (sum(kv[1].fractions_of(src.capacity)), kv[0]))
        for vm_id, demand in by_size:
            if not _overloaded(loads[src.id], src.capacity, thr):
                break
            weights, _ = classify(demand, src.capacity)
            best, best_score = None, -math.inf
            for dst in on:
                if dst.id == src.id or _overloaded(loads[dst.id], dst.capacity, thr):
                    continue
                after = loads[dst.id] + demand
                if not after.fits_within(dst.capacity) or _overloaded(after, dst.capacity, thr):
                    continue
                if can_move is not None and not can_move(vm_id, dst.id):
                    continue
                s = headroom_score(dst.capacity, dst.capacity - loads[dst.id], weights, demand)
                if s > best_score:
                    best, best_score = dst, s
            if best is None:
                continue
            moves.append(Move(vm_id, src.id, best.id))
            loads[src.id] = loads[src.id] - demand
            loads[best.id] = loads[best.id] + demand
            del resident[src.id][vm_id]
            resident[best.id][vm_id] = demand
    return moves
