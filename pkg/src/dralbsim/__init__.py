"""Discrete-event simulator for SLA-aware multi-resource task placement."""

__version__ = "0.1.0"

from .classifier import IntensityClass, IntensityWeights, classify
from .core_model import (Datacenter, PhysicalHost, PlacementMap, ResourceVector, Task,
                         VirtualMachine, feasible, place, remove, residual)
from .engine import SimConfig, replicate, run
from .metrics import MetricsReport
from .schedulers import PolicyKind
from .sla import SlaContract

__all__ = [
    "Datacenter", "IntensityClass", "IntensityWeights", "MetricsReport", "PhysicalHost",
    "PlacementMap", "PolicyKind", "ResourceVector", "SimConfig", "SlaContract", "Task",
    "VirtualMachine", "classify", "feasible", "place", "remove", "replicate", "residual", "run",
]
