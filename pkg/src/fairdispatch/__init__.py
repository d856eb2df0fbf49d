"""Fairness-aware food delivery dispatch simulator."""

from .allocator import (
    AllocatorConfig,
    allocate_fairfoody,
    allocate_greedy_edt,
    allocate_weighted,
)
from .dispatch import Order, PaymentParams, RoutePlan, Vehicle
from .roadnet import RoadNetwork, load_network
from .simulator import EventLog, SimConfig, Simulator, perturb_travel_times, run
from .workload import CityParams, generate_city, read_workload, write_workload

__version__ = "0.1.0"

__all__ = [
    "AllocatorConfig",
    "CityParams",
    "EventLog",
    "Order",
    "PaymentParams",
    "RoadNetwork",
    "RoutePlan",
    "SimConfig",
    "Simulator",
    "Vehicle",
    "allocate_fairfoody",
    "allocate_greedy_edt",
    "allocate_weighted",
    "generate_city",
    "load_network",
    "perturb_travel_times",
    "read_workload",
    "run",
    "write_workload",
]
