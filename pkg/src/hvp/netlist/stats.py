"""Static netlist statistics (no evaluation)."""

from __future__ import annotations

from collections import Counter

from .dag import split_sequential
from .schema import GATE_KINDS, Netlist


def netlist_stats(nl: Netlist) -> dict:
    dag, dffs, mems = split_sequential(nl)
    counts = Counter(c.kind for c in nl.cells if c.kind in GATE_KINDS)
    return {
        "gates": {k: counts.get(k, 0) for k in GATE_KINDS},
        "gate_total": sum(counts.values()),
        "dff": len(dffs),
        "memory_ports": len(mems),
        "g_max": dag.g_max,
        "depth": dag.depth,
    }
