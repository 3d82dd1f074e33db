"""Datacenter entity model: resource vectors, tasks, VMs, hosts and the
task -> host assignment map.

All capacity checks go through :func:`feasible`, which enforces the
component-wise capacity constraint on every host.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, Optional, Set, Tuple

# Absolute tolerance for component comparisons (sums of generated reals).
TOL = 1e-9

DIMENSIONS = ("cpu", "mem", "energy", "bw")


class PlacementError(Exception):
    """Base class for rejected placements."""


class HostOffError(PlacementError):
    """Raised when a placement targets a host that is powered off."""


class InfeasiblePlacement(PlacementError):
    """Raised when a demand does not fit in a host's residual capacity."""


@dataclass(frozen=True)
class ResourceVector:
    """CPU (MIPS), memory (MB), energy budget (W) and bandwidth (M/s)."""

    cpu: float = 0.0
    mem: float = 0.0
    energy: float = 0.0
    bw: float = 0.0

    def __post_init__(self):
        for name in DIMENSIONS:
            value = getattr(self, name)
            if math.isnan(value) or value < -TOL:
                raise ValueError(f"ResourceVector.{name} must be >= 0, got {value}")

    def __iter__(self) -> Iterator[float]:
        return iter((self.cpu, self.mem, self.energy, self.bw))

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(self.cpu + other.cpu, self.mem + other.mem,
                              self.energy + other.energy, self.bw + other.bw)

    def __sub__(self, other: "ResourceVector") -> "ResourceVector":
        # clamp tolerance-level negatives produced by float cancellation
        return ResourceVector(*(max(a - b, 0.0) for a, b in zip(self, other)))

    def __le__(self, other: "ResourceVector") -> bool:
        return self.fits_within(other)

    def fits_within(self, other: "ResourceVector", tol: float = TOL) -> bool:
        return all(a <= b + tol for a, b in zip(self, other))

    def scaled(self, factor: float) -> "ResourceVector":
        return ResourceVector(*(a * factor for a in self))

    def fractions_of(self, capacity: "ResourceVector") -> Tuple[float, float, float, float]:
        """Component-wise ratio to ``capacity``; a zero capacity gives 0."""
        return tuple(a / c if c > 0 else 0.0 for a, c in zip(self, capacity))

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.cpu, self.mem, self.energy, self.bw)

    @classmethod
    def zero(cls) -> "ResourceVector":
        return cls()

    @classmethod
    def total(cls, vectors: Iterable["ResourceVector"]) -> "ResourceVector":
        cols = list(zip(*(v.as_tuple() for v in vectors)))
        if not cols:
            return cls()
        return cls(*(math.fsum(col) for col in cols))


@dataclass
class Task:
    id: int
    client_id: int
    arrival_time: float
    length: float
    demand: ResourceVector
    file_size: float = 0.0
    output_size: float = 0.0
    weights: Optional["IntensityWeights"] = None  # set by the classifier
    deadline_rt: float = math.inf

    def __post_init__(self):
        if self.arrival_time < 0:
            raise ValueError("arrival_time must be >= 0")
        if self.length <= 0:
            raise ValueError("length must be > 0")


@dataclass
class VirtualMachine:
    id: int
    demand: ResourceVector
    host_id: Optional[int] = None

    @property
    def placed_flag(self) -> int:
        return 0 if self.host_id is None else 1


class PowerState(Enum):
    ON = "on"
    OFF = "off"


@dataclass
class PhysicalHost:
    id: int
    capacity: ResourceVector
    power_work: float = 250.0
    power_idle: float = 150.0
    power_standby: float = 10.0
    state: PowerState = PowerState.ON
    vm_demands: Dict[int, ResourceVector] = field(default_factory=dict)
    _load: Optional[ResourceVector] = field(default=None, repr=False, compare=False)

    @property
    def vm_ids(self) -> Set[int]:
        return set(self.vm_demands)

    @property
    def load(self) -> ResourceVector:
        """Sum of hosted VM demands (recomputed exactly after each change)."""
        if self._load is None:
            self._load = ResourceVector.total(self.vm_demands.values())
        return self._load

    def attach(self, vm_id: int, demand: ResourceVector) -> None:
        if vm_id in self.vm_demands:
            raise PlacementError(f"VM {vm_id} already on host {self.id}")
        self.vm_demands[vm_id] = demand
        self._load = None

    def detach(self, vm_id: int) -> ResourceVector:
        demand = self.vm_demands.pop(vm_id)
        self._load = None
        return demand

    def utilization(self) -> Tuple[float, float, float, float]:
        return self.load.fractions_of(self.capacity)


def feasible(host: PhysicalHost, demand: ResourceVector) -> bool:
    """True iff ``demand`` fits on ``host`` next to what it already carries."""
    if host.state is not PowerState.ON:
        raise HostOffError(f"host {host.id} is off")
    return (host.load + demand).fits_within(host.capacity)


def residual(host: PhysicalHost) -> ResourceVector:
    if host.state is not PowerState.ON:
        raise HostOffError(f"host {host.id} is off")
    return host.capacity - host.load


@dataclass
class PlacementMap:
    """Binary assignment indicator over (task, host, client) triples."""

    assignments: Dict[Tuple[int, int, int], int] = field(default_factory=dict)
    _by_task: Dict[int, Tuple[int, int]] = field(default_factory=dict, repr=False)

    def assign(self, task_id: int, host_id: int, client_id: int = 0) -> None:
        if task_id in self._by_task:
            raise PlacementError(f"task {task_id} is already assigned")
        self.assignments[(task_id, host_id, client_id)] = 1
        self._by_task[task_id] = (host_id, client_id)

    def release(self, task_id: int) -> None:
        host_id, client_id = self._by_task.pop(task_id)
        self.assignments[(task_id, host_id, client_id)] = 0

    def host_of(self, task_id: int) -> Optional[int]:
        entry = self._by_task.get(task_id)
        return None if entry is None else entry[0]

    def theta(self, task_id: int, host_id: int, client_id: int = 0) -> int:
        return self.assignments.get((task_id, host_id, client_id), 0)

    def active_count(self) -> int:
        return len(self._by_task)


def place(vm: VirtualMachine, host: PhysicalHost, pmap: PlacementMap,
          task_id: Optional[int] = None, client_id: int = 0) -> None:
    """Bind ``vm`` to ``host`` and mark the assignment.

    Raises :class:`InfeasiblePlacement` when the demand does not fit; the
    host, VM and map are left untouched in that case.
    """
    if vm.host_id is not None:
        raise PlacementError(f"VM {vm.id} is already placed on host {vm.host_id}")
    if not feasible(host, vm.demand):
        raise InfeasiblePlacement(
            f"VM {vm.id} demand {vm.demand.as_tuple()} exceeds residual of host {host.id}")
    pmap.assign(vm.id if task_id is None else task_id, host.id, client_id)
    host.attach(vm.id, vm.demand)
    vm.host_id = host.id


def remove(vm: VirtualMachine, host: PhysicalHost, pmap: PlacementMap,
           task_id: Optional[int] = None) -> None:
    if vm.host_id != host.id:
        raise PlacementError(f"VM {vm.id} is not on host {host.id}")
    host.detach(vm.id)
    pmap.release(vm.id if task_id is None else task_id)
    vm.host_id = None


class Datacenter:
    """Hosts, VMs and the assignment map, with a deployment-failure counter."""

    def __init__(self, hosts: Iterable[PhysicalHost]):
        self.hosts = list(hosts)
        self._hosts_by_id = {h.id: h for h in self.hosts}
        self.vms: Dict[int, VirtualMachine] = {}
        self.pmap = PlacementMap()
        self.failures = 0

    def host(self, host_id: int) -> PhysicalHost:
        return self._hosts_by_id[host_id]

    def try_place(self, vm: VirtualMachine, host_id: int, client_id: int = 0) -> bool:
        host = self._hosts_by_id[host_id]
        try:
            place(vm, host, self.pmap, client_id=client_id)
        except PlacementError:
            self.failures += 1
            return False
        self.vms[vm.id] = vm
        return True

    def remove(self, vm_id: int) -> VirtualMachine:
        vm = self.vms.pop(vm_id)
        remove(vm, self._hosts_by_id[vm.host_id], self.pmap)
        return vm

    def move(self, vm_id: int, to_host: int) -> None:
        """Re-place a VM; the map entry keeps its client id."""
        vm = self.vms[vm_id]
        src = self._hosts_by_id[vm.host_id]
        dst = self._hosts_by_id[to_host]
        if not feasible(dst, vm.demand):
            raise InfeasiblePlacement(f"VM {vm_id} does not fit on host {to_host}")
        client = self.pmap._by_task[vm_id][1]
        remove(vm, src, self.pmap)
        place(vm, dst, self.pmap, client_id=client)

    def check_capacity(self) -> bool:
        return all(h.load.fits_within(h.capacity) for h in self.hosts)
