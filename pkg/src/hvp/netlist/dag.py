"""Split a sequential netlist into a combinational DAG plus flip-flops."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .schema import GATE_KINDS, MEMORY_KINDS, Cell, Netlist

COMB_KINDS = GATE_KINDS + MEMORY_KINDS


@dataclass(frozen=True)
class Dag:
    """Combinational nodes in topological order.

    ``height[i]`` counts nodes on the longest path from node i to a sink
    (itself included) and is the list-scheduling priority.  ``level[i]`` is
    the earliest step at which node i can run.
    """

    cells: tuple[Cell, ...]
    preds: tuple[tuple[int, ...], ...]
    succs: tuple[tuple[int, ...], ...]
    height: np.ndarray
    level: np.ndarray

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def depth(self) -> int:
        return int(self.height.max(initial=0))

    @property
    def g_max(self) -> int:
        """Widest ready set of the unbounded as-soon-as-possible schedule."""
        if not len(self.cells):
            return 0
        return int(np.bincount(self.level).max())


def _comb_graph(nl: Netlist):
    cells = [c for c in nl.cells if c.kind in COMB_KINDS]
    driver = {}
    for i, c in enumerate(cells):
        for net in c.outputs():
            driver[net] = i
    preds = []
    for c in cells:
        ps = sorted({driver[n] for n in c.inputs() if n in driver})
        preds.append(ps)
    return cells, preds


def _kahn(n: int, preds):
    succs = [[] for _ in range(n)]
    indeg = [len(p) for p in preds]
    for i, ps in enumerate(preds):
        for p in ps:
            succs[p].append(i)
    q = deque(i for i in range(n) if indeg[i] == 0)
    order = []
    while q:
        i = q.popleft()
        order.append(i)
        for s in succs[i]:
            indeg[s] -= 1
            if indeg[s] == 0:
                q.append(s)
    return order, succs


def find_cycle(nl: Netlist) -> list[int]:
    """Cell ids on one combinational cycle, or [] if the logic is acyclic."""
    cells, preds = _comb_graph(nl)
    order, succs = _kahn(len(cells), preds)
    if len(order) == len(cells):
        return []
    left = set(range(len(cells))) - set(order)
    # walk predecessors inside the residual graph until a node repeats
    start = min(left)
    seen = {}
    path = []
    node = start
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = next(p for p in preds[node] if p in left)
    return [cells[i].id for i in path[seen[node] :]]


def split_sequential(nl: Netlist) -> tuple[Dag, list[Cell], list[Cell]]:
    """Returns (DAG of gates and memory ports, DFF cells, memory-port cells)."""
    cells, preds = _comb_graph(nl)
    order, succs = _kahn(len(cells), preds)
    if len(order) != len(cells):
        raise ValueError(f"combinational cycle through cells {find_cycle(nl)}")
    # renumber nodes in a deterministic topological order: level, then cell id
    level = np.zeros(len(cells), dtype=np.int64)
    for i in order:
        if preds[i]:
            level[i] = max(level[p] for p in preds[i]) + 1
    perm = sorted(range(len(cells)), key=lambda i: (level[i], cells[i].id))
    new = {old: k for k, old in enumerate(perm)}
    cells_t = tuple(cells[i] for i in perm)
    preds_t = tuple(tuple(sorted(new[p] for p in preds[i])) for i in perm)
    succs_t = tuple(tuple(sorted(new[s] for s in succs[i])) for i in perm)
    level_t = level[perm]
    height = np.ones(len(cells), dtype=np.int64)
    for k in range(len(cells) - 1, -1, -1):
        if succs_t[k]:
            height[k] = 1 + max(height[s] for s in succs_t[k])
    dffs = [c for c in nl.cells if c.kind == "DFF"]
    mems = [c for c in nl.cells if c.kind in MEMORY_KINDS]
    return Dag(cells_t, preds_t, succs_t, height, level_t), dffs, mems
