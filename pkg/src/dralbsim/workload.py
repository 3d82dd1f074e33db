"""Synthetic task workload drawn from the simulation parameter table."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .core_model import ResourceVector, Task


@dataclass(frozen=True)
class WorkloadRanges:
    length: Tuple[float, float] = (250.0, 1000.0)       # MIPS-work
    file_size: Tuple[float, float] = (100.0, 2000.0)    # MB
    output_size: Tuple[float, float] = (20.0, 40.0)     # MB
    bandwidth: Tuple[float, float] = (0.0, 100.0)       # M/s, lower bound open
    # watts reserved per MIPS of CPU demand
    energy_per_mips: Tuple[float, float] = (0.01, 0.035)

    def validate(self) -> None:
        for name in ("length", "file_size", "output_size", "bandwidth", "energy_per_mips"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"bad range for {name}: {(lo, hi)}")
        if self.length[0] <= 0:
            raise ValueError("task length must be > 0")


def _open_low_uniform(rng: np.random.Generator, lo: float, hi: float, n: int) -> np.ndarray:
    # uniform on (lo, hi]
    return hi - (hi - lo) * rng.random(n)


def generate_tasks(n: int, rng: np.random.Generator, ranges: WorkloadRanges,
                   arrival_rate: float, service_time: float, batch: bool = False,
                   n_clients: int = 10) -> List[Task]:
    """Draw ``n`` tasks.

    Arrivals are a Poisson process of the given rate, or all at t=0 when
    ``batch``. CPU demand is the rate that finishes the task in
    ``service_time`` seconds, memory demand is the file size, and the energy
    budget is the CPU demand times a per-task watts-per-MIPS draw.
    """
    if n == 0:
        return []
    if arrival_rate <= 0:
        raise ValueError("arrival_rate must be > 0")
    length = rng.uniform(*ranges.length, n)
    file_size = rng.uniform(*ranges.file_size, n)
    output_size = rng.uniform(*ranges.output_size, n)
    bw = _open_low_uniform(rng, *ranges.bandwidth, n)
    watts_per_mips = rng.uniform(*ranges.energy_per_mips, n)
    clients = rng.integers(0, n_clients, n)
    if batch:
        arrivals = np.zeros(n)
    else:
        gaps = rng.exponential(1.0 / arrival_rate, n)
        arrivals = np.cumsum(gaps) - gaps[0]
    cpu = length / service_time
    tasks = []
    for i in range(n):
        demand = ResourceVector(float(cpu[i]), float(file_size[i]),
                                float(cpu[i] * watts_per_mips[i]), float(bw[i]))
        tasks.append(Task(id=i, client_id=int(clients[i]), arrival_time=float(arrivals[i]),
                          length=float(length[i]), demand=demand,
                          file_size=float(file_size[i]), output_size=float(output_size[i])))
    return tasks
