"""Cycle-by-cycle evaluation of a sequential netlist.

Per cycle: load sources (input ports, DFF outputs, constants) into a value
table, run the static plan step by step (tasks of a step run concurrently and
only read the table; the coordinator writes their results after the
barrier), then latch every DFF input and memory update at once.
"""

from __future__ import annotations

import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dag import split_sequential
from .schedule import Plan, schedule
from .schema import PINS_IN, Netlist


class EvaluationError(RuntimeError):
    pass


@dataclass
class CycleStats:
    cycle: int
    gate_counts: dict
    evaluated: int
    g_max: int
    depth: int
    wall_time: float


@dataclass(frozen=True)
class EngineState:
    """Everything needed to continue evaluation; treated as a value."""

    cycle: int
    dff: np.ndarray  # (num_dff, *row_shape)
    memories: dict  # cell id -> backend memory state
    backend: str
    params_name: str = ""
    outputs: dict = field(default_factory=dict)  # port name -> rows of the last cycle


@dataclass(frozen=True)
class _Task:
    groups: tuple  # (kind, in_idx (pins, k), out_idx (k,))
    mems: tuple  # node indices of memory cells


class Engine:
    def __init__(self, netlist: Netlist, backend, workers: int = 1, max_step: int | None = None, seed: int | None = None) -> None:
        self.netlist = netlist
        self.backend = backend
        self.workers = workers
        self.dag, self.dffs, self.mems = split_sequential(netlist)
        self.plan: Plan = schedule(self.dag, workers, max_step, seed)
        self.g_max = self.dag.g_max
        self.num_nets = max(netlist.num_nets, 1)
        self._dff_d = np.array([c.pins["D"] for c in self.dffs], dtype=np.int64)
        self._dff_q = np.array([c.pins["Q"] for c in self.dffs], dtype=np.int64)
        self._dff_index = {c.id: i for i, c in enumerate(self.dffs)}
        self._consts = [(c.pins["Y"], 1 if c.kind == "CONST1" else 0) for c in netlist.cells if c.kind in ("CONST0", "CONST1")]
        self._steps = [tuple(self._compile(task) for task in step) for step in self.plan.steps]
        self._kind_counts = Counter(c.kind for c in self.dag.cells)
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()

    def _compile(self, task) -> _Task:
        by_kind: dict[str, list] = {}
        mems = []
        for node in task:
            c = self.dag.cells[node]
            if c.kind in ("ROM", "RAM"):
                mems.append(node)
            else:
                by_kind.setdefault(c.kind, []).append(c)
        groups = []
        for kind in sorted(by_kind):
            cells = by_kind[kind]
            ins = np.array([[c.pins[p] for c in cells] for p in PINS_IN[kind]], dtype=np.int64)
            outs = np.array([c.pins["Y"] for c in cells], dtype=np.int64)
            groups.append((kind, ins, outs))
        return _Task(tuple(groups), tuple(mems))

    # -- state ---------------------------------------------------------------

    def init_state(self, memories: dict | None = None, dff_init: dict | None = None) -> EngineState:
        """DFFs start at their ``init`` attribute (0 by default).

        ``memories`` maps a memory cell id or name to its backend state;
        ``dff_init`` maps DFF cell ids or names to plain bits or rows.
        """
        be = self.backend
        dff = np.zeros((len(self.dffs),) + be.row_shape, dtype=be.dtype)
        for i, c in enumerate(self.dffs):
            dff[i] = be.constant(int(c.attrs.get("init", 0)))
        by_name = {c.name: c.id for c in self.dffs if c.name}
        for key, val in (dff_init or {}).items():
            cid = by_name.get(key, key)
            if cid not in self._dff_index:
                raise KeyError(f"no DFF {key!r}")
            if isinstance(val, np.ndarray) and val.shape == be.row_shape and val.dtype == be.dtype:
                dff[self._dff_index[cid]] = val
            else:
                dff[self._dff_index[cid]] = be.encode(np.atleast_1d(val))[0]
        mem_names = {c.name: c.id for c in self.mems if c.name}
        mems = {}
        for key, val in (memories or {}).items():
            cid = mem_names.get(key, key)
            mems[cid] = val
        missing = [c.id for c in self.mems if c.id not in mems]
        if missing:
            raise ValueError(f"memory cells {missing} have no initial state")
        return EngineState(0, dff, mems, be.name, be.params_name)

    def dff_rows(self, state: EngineState, names) -> np.ndarray:
        idx = {c.name: i for i, c in enumerate(self.dffs)}
        return state.dff[[idx[n] for n in names]]

    # -- evaluation ------------------------------------------------------------

    def _run_task(self, task: _Task, table: np.ndarray, memories: dict):
        groups = [(kind, [table[row] for row in ins]) for kind, ins, _ in task.groups]
        try:
            vals = self.backend.eval_gates(groups) if groups else []
        except Exception as exc:
            ids = [int(self._cell_at_net(outs[0])) for _, _, outs in task.groups]
            raise EvaluationError(f"backend failed while evaluating cells starting at {ids}: {exc}") from exc
        writes = [(outs, v, len(outs)) for (_, _, outs), v in zip(task.groups, vals)]
        mem_updates = {}
        for node in task.mems:
            c = self.dag.cells[node]
            try:
                addr = table[list(c.pins["addr"])]
                if c.kind == "ROM":
                    rdata = self.backend.eval_rom(memories[c.id], addr)
                else:
                    rdata, new = self.backend.eval_ram(memories[c.id], addr, table[list(c.pins["wdata"])], table[c.pins["wflag"]])
                    mem_updates[c.id] = new
            except Exception as exc:
                raise EvaluationError(f"backend failed at memory cell {c.id}: {exc}") from exc
            writes.append((np.array(c.pins["rdata"], dtype=np.int64), rdata, 1))
        return writes, mem_updates

    def _cell_at_net(self, net: int) -> int:
        for c in self.dag.cells:
            if net in c.outputs():
                return c.id
        return -1

    def _inputs_for(self, inputs, cycle: int) -> dict:
        if inputs is None:
            return {}
        return inputs(cycle) if callable(inputs) else inputs

    def run_cycle(self, state: EngineState, inputs=None) -> tuple[EngineState, CycleStats]:
        if state.backend != self.backend.name:
            raise ValueError(f"state belongs to backend {state.backend!r}, engine uses {self.backend.name!r}")
        t0 = time.perf_counter()
        be = self.backend
        table = np.zeros((self.num_nets,) + be.row_shape, dtype=be.dtype)
        given = self._inputs_for(inputs, state.cycle)
        for port in self.netlist.inputs:
            val = given.get(port.name, 0)
            if isinstance(val, (int, np.integer)):
                val = [(int(val) >> i) & 1 for i in range(port.width)]
            table[list(port.bits)] = be.encode(val)
        for net, bit in self._consts:
            table[net] = be.constant(bit)
        if len(self.dffs):
            table[self._dff_q] = state.dff
        mem_updates = {}
        evaluated = 0
        for step in self._steps:
            if self._pool is None or len(step) == 1:
                results = [self._run_task(t, table, state.memories) for t in step]
            else:
                futures = [self._pool.submit(self._run_task, t, table, state.memories) for t in step]
                results = [f.result() for f in futures]
            for writes, mu in results:
                for outs, vals, count in writes:
                    table[outs] = vals
                    evaluated += count
                mem_updates.update(mu)
        new_dff = table[self._dff_d].copy() if len(self.dffs) else state.dff
        memories = dict(state.memories)
        memories.update(mem_updates)
        outputs = {p.name: table[list(p.bits)].copy() for p in self.netlist.outputs}
        stats = CycleStats(state.cycle, dict(self._kind_counts), evaluated, self.g_max, self.dag.depth, time.perf_counter() - t0)
        return replace(state, cycle=state.cycle + 1, dff=new_dff, memories=memories, outputs=outputs), stats

    def run(self, state: EngineState, cycles: int, inputs=None, on_cycle=None) -> tuple[EngineState, list[CycleStats]]:
        """Evaluate exactly ``cycles`` clock cycles."""
        if cycles < 0:
            raise ValueError("cycles must be non-negative")
        stats = []
        for _ in range(cycles):
            state, st = self.run_cycle(state, inputs)
            stats.append(st)
            if on_cycle is not None:
                on_cycle(state, st)
        return state, stats


def run(netlist: Netlist, state: EngineState, cycles: int, backend, workers: int = 1, inputs=None):
    eng = Engine(netlist, backend, workers)
    try:
        return eng.run(state, cycles, inputs)
    finally:
        eng.close()
