"""Sequential netlist ingestion, scheduling and cycle evaluation."""

from .backends import PlainBackend, TfheBackend, make_backend
from .builder import CircuitBuilder
from .dag import Dag, split_sequential
from .engine import CycleStats, Engine, EngineState, EvaluationError, run
from .schedule import Plan, schedule
from .schema import Cell, Netlist, NetlistError, Port, parse_netlist, to_json
from .snapshot import SnapshotError, snapshot_load, snapshot_save
from .stats import netlist_stats

__all__ = [name for name in dir() if not name.startswith("_")]
