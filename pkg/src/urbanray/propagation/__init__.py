"""Path solver, link budget and RSSI matrices."""

from .config import SolverConfig
from .physics import Interaction, fspl_db, path_gain_db, reflection_power
from .rssi import REAL, SIM, RssiMatrix, incoherent_sum_dbm, simulate_rssi, simulate_station
from .solver import PathKind, PathRecord, solve_paths, sphere_directions, trace_source

__all__ = [
    "Interaction",
    "PathKind",
    "PathRecord",
    "REAL",
    "RssiMatrix",
    "SIM",
    "SolverConfig",
    "fspl_db",
    "incoherent_sum_dbm",
    "path_gain_db",
    "reflection_power",
    "simulate_rssi",
    "simulate_station",
    "solve_paths",
    "sphere_directions",
    "trace_source",
]
