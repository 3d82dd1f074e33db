"""Placement policies: DRALB and the random, sequential and DHLB baselines.

Every policy maps a batch of tasks onto a list of hosts and returns one
:class:`PlacementDecision` per task. Policies never mutate the hosts they
are given; decisions inside a batch see the demand committed by earlier
decisions of the same batch through a scratch overlay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .classifier import IntensityClass, IntensityWeights, UNIFORM
from .core_model import PhysicalHost, PowerState, ResourceVector, Task


class PolicyKind(Enum):
    RANDOM = "rnd"
    SEQUENTIAL = "seq"
    DHLB = "dhlb"
    DRALB = "dralb"

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown policy {name!r}; expected one of "
                             f"{[p.value for p in cls]}") from None


@dataclass(frozen=True)
class PlacementDecision:
    task_id: int
    host_id: Optional[int]
    score: float = math.nan

    @property
    def failed(self) -> bool:
        return self.host_id is None


class _Overlay:
    """Host loads plus demand tentatively committed during one batch."""

    def __init__(self, hosts: Sequence[PhysicalHost]):
        self.hosts = [h for h in hosts if h.state is PowerState.ON]
        self._extra: Dict[int, ResourceVector] = {}

    def load(self, host: PhysicalHost) -> ResourceVector:
        extra = self._extra.get(host.id)
        return host.load if extra is None else host.load + extra

    def residual(self, host: PhysicalHost) -> ResourceVector:
        return host.capacity - self.load(host)

    def feasible(self, host: PhysicalHost, demand: ResourceVector) -> bool:
        return (self.load(host) + demand).fits_within(host.capacity)

    def commit(self, host: PhysicalHost, demand: ResourceVector) -> None:
        extra = self._extra.get(host.id)
        self._extra[host.id] = demand if extra is None else extra + demand


def headroom_score(capacity: ResourceVector, free: ResourceVector,
                   weights: IntensityWeights, demand: ResourceVector) -> float:
    """Weight-blended fraction of capacity left after adding ``demand``."""
    total = 0.0
    for w, c, r, d in zip(weights.as_tuple(), capacity, free, demand):
        if w == 0.0:
            continue
        total += w * ((r - d) / c if c > 0 else 0.0)
    return min(max(total, 0.0), 1.0)


def score_host(host: PhysicalHost, weights: IntensityWeights,
               demand: ResourceVector) -> float:
    """Per-host factor used by DRALB; in [0, 1], higher is better.

    Raises ``ValueError`` if the host cannot take the demand, since the
    score is only defined over feasible candidates.
    """
    if host.state is not PowerState.ON:
        raise ValueError(f"host {host.id} is off")
    if not (host.load + demand).fits_within(host.capacity):
        raise ValueError(f"host {host.id} cannot fit demand {demand.as_tuple()}")
    return headroom_score(host.capacity, host.capacity - host.load, weights, demand)


def _best_dralb_host(view: _Overlay, task: Task) -> tuple:
    weights = task.weights or UNIFORM
    best_host, best_score = None, -math.inf
    for host in view.hosts:
        if not view.feasible(host, task.demand):
            continue
        s = headroom_score(host.capacity, view.residual(host), weights, task.demand)
        # strict > keeps the lowest id on ties (hosts are scanned in id order)
        if s > best_score + 1e-12 or (abs(s - best_score) <= 1e-12 and host.id < best_host.id):
            best_host, best_score = host, s
    return best_host, best_score


def round_robin(queues: Mapping[IntensityClass, Sequence[Task]]) -> List[Task]:
    """Interleave the four class queues, one task per turn, CPU first."""
    iters = [list(queues.get(cls, ())) for cls in IntensityClass]
    order: List[Task] = []
    depth = max((len(q) for q in iters), default=0)
    for i in range(depth):
        for q in iters:
            if i < len(q):
                order.append(q[i])
    return order


@dataclass
class BatchResult:
    decisions: List[PlacementDecision]
    # product of the per-host factors chosen in this batch
    joint_score: float = math.nan

    @property
    def failures(self) -> int:
        return sum(d.failed for d in self.decisions)


def place_dralb(queues: Mapping[IntensityClass, Sequence[Task]],
                hosts: Sequence[PhysicalHost]) -> BatchResult:
    view = _Overlay(sorted(hosts, key=lambda h: h.id))
    decisions = []
    log_joint, any_placed = 0.0, False
    for task in round_robin(queues):
        host, s = _best_dralb_host(view, task)
        if host is None:
            decisions.append(PlacementDecision(task.id, None))
            continue
        view.commit(host, task.demand)
        decisions.append(PlacementDecision(task.id, host.id, s))
        any_placed = True
        log_joint = log_joint + math.log(s) if s > 0 else -math.inf
    joint = math.exp(log_joint) if any_placed else math.nan
    return BatchResult(decisions, joint)


def place_random(tasks: Iterable[Task], hosts: Sequence[PhysicalHost],
                 rng: np.random.Generator | int | None) -> BatchResult:
    """Sample hosts uniformly; up to one draw per host before giving up."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    view = _Overlay(sorted(hosts, key=lambda h: h.id))
    n = len(view.hosts)
    decisions = []
    for task in tasks:
        chosen = None
        if n:
            for idx in rng.integers(0, n, size=n):
                host = view.hosts[idx]
                if view.feasible(host, task.demand):
                    chosen = host
                    break
        if chosen is not None:
            view.commit(chosen, task.demand)
        decisions.append(PlacementDecision(task.id, None if chosen is None else chosen.id))
    return BatchResult(decisions)


def place_sequential(tasks: Iterable[Task], hosts: Sequence[PhysicalHost]) -> BatchResult:
    """First fit over hosts in id order."""
    view = _Overlay(sorted(hosts, key=lambda h: h.id))
    decisions = []
    for task in tasks:
        chosen = next((h for h in view.hosts if view.feasible(h, task.demand)), None)
        if chosen is not None:
            view.commit(chosen, task.demand)
        decisions.append(PlacementDecision(task.id, None if chosen is None else chosen.id))
    return BatchResult(decisions)


def _mean_utilization(view: _Overlay, host: PhysicalHost) -> float:
    return sum(view.load(host).fractions_of(host.capacity)) / 4.0


def _mean_residual_fraction(view: _Overlay, host: PhysicalHost) -> float:
    return sum(view.residual(host).fractions_of(host.capacity)) / 4.0


def place_dhlb(tasks: Iterable[Task], hosts: Sequence[PhysicalHost],
               cluster_size: int = 10) -> BatchResult:
    """Hierarchical best fit.

    Hosts are grouped into fixed-size clusters by id. Clusters are visited
    from least to most loaded (mean utilization over their hosts); the
    first cluster holding a feasible host wins and, inside it, the host
    with the largest unweighted mean residual fraction is chosen.
    """
    if cluster_size < 1:
        raise ValueError("cluster_size must be >= 1")
    view = _Overlay(sorted(hosts, key=lambda h: h.id))
    clusters = [view.hosts[i:i + cluster_size]
                for i in range(0, len(view.hosts), cluster_size)]
    decisions = []
    for task in tasks:
        ranked = sorted(
            range(len(clusters)),
            key=lambda c: (sum(_mean_utilization(view, h) for h in clusters[c]) / len(clusters[c]), c))
        chosen = None
        for c in ranked:
            candidates = [h for h in clusters[c] if view.feasible(h, task.demand)]
            if candidates:
                chosen = max(candidates,
                             key=lambda h: (_mean_residual_fraction(view, h), -h.id))
                break
        if chosen is not None:
            view.commit(chosen, task.demand)
        decisions.append(PlacementDecision(task.id, None if chosen is None else chosen.id))
    return BatchResult(decisions)
