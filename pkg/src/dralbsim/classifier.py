"""Intensity classification of tasks and the four per-class queues.

Weights are capacity-normalized demand ratios scaled to sum to one; the
dominant weight decides the class. A simple stand-in for a learned application
classifier.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Iterable, List, Tuple

from .core_model import ResourceVector, Task


class IntensityClass(IntEnum):
    # value order is the tie-break order
    CPU = 0
    MEM = 1
    ENERGY = 2
    BW = 3


@dataclass(frozen=True)
class IntensityWeights:
    w_cpu: float
    w_mem: float
    w_energy: float
    w_bw: float

    def __post_init__(self):
        for w in self.as_tuple():
            if not 0.0 <= w <= 1.0 + 1e-12:
                raise ValueError(f"weight {w} outside [0, 1]")

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.w_cpu, self.w_mem, self.w_energy, self.w_bw)

    @property
    def dominant(self) -> float:
        return max(self.as_tuple())

    @property
    def intensity_class(self) -> IntensityClass:
        ws = self.as_tuple()
        return IntensityClass(ws.index(max(ws)))


UNIFORM = IntensityWeights(0.25, 0.25, 0.25, 0.25)


def classify(demand: ResourceVector,
             reference_capacity: ResourceVector) -> Tuple[IntensityWeights, IntensityClass]:
    if any(c <= 0 for c in reference_capacity):
        raise ValueError("reference capacity components must be > 0")
    ratios = demand.fractions_of(reference_capacity)
    total = sum(ratios)
    if total <= 0:
        return UNIFORM, IntensityClass.CPU
    weights = IntensityWeights(*(r / total for r in ratios))
    return weights, weights.intensity_class


def _queue_key(task: Task) -> Tuple[float, float, int]:
    return (-task.weights.dominant, task.arrival_time, task.id)


def new_queues() -> Dict[IntensityClass, List[Task]]:
    return {cls: [] for cls in IntensityClass}


def enqueue(task: Task, queues: Dict[IntensityClass, List[Task]]) -> None:
    """Insert a classified task into its class queue.

    Queues stay sorted by descending dominant weight, then arrival time,
    then id.
    """
    if task.weights is None:
        raise ValueError(f"task {task.id} has not been classified")
    queue = queues[task.weights.intensity_class]
    bisect.insort(queue, task, key=_queue_key)


def classify_into_queues(tasks: Iterable[Task], reference_capacity: ResourceVector
                         ) -> Dict[IntensityClass, List[Task]]:
    queues = new_queues()
    for task in tasks:
        if task.weights is None:
            task.weights, _ = classify(task.demand, reference_capacity)
        enqueue(task, queues)
    return queues
