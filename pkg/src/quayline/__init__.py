"""Deterministic discrete-event simulator of a container terminal."""

from .allocation import POLICIES, assign_block, fcfs_berth, get_policy, policy_compare
from .des import Engine, SimulationLog, SplitMix64, format_time, parse_time
from .metrics import build_report, calibrate, emit_report, reduction_pct, ship_handling_minutes
from .model import ContainerClass, EquipmentPool, Manifest, ServiceTimes, Vessel, YardBlock, YardCategory, assign_qcs, teu
from .scenario import load_bundled, load_scenario, validate
from .terminal import simulate

__version__ = "0.1.0"

__all__ = [
    "POLICIES", "ContainerClass", "Engine", "EquipmentPool", "Manifest", "ServiceTimes", "SimulationLog",
    "SplitMix64", "Vessel", "YardBlock", "YardCategory", "assign_block", "assign_qcs", "build_report",
    "calibrate", "emit_report", "fcfs_berth", "format_time", "get_policy", "load_bundled", "load_scenario",
    "parse_time", "policy_compare", "reduction_pct", "ship_handling_minutes", "simulate", "teu", "validate",
]
