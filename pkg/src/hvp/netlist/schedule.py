"""Static list scheduling of a DAG onto a worker pool.

Each step takes nodes from the ready list in priority order (greatest height
first, then lowest cell id) and deals them round-robin to the workers; a
barrier separates steps.  ``max_step`` caps how many nodes a step may take;
``seed`` replaces the priority order with a random permutation of the ready
list, which exercises the determinism guarantee.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .dag import Dag


@dataclass(frozen=True)
class Plan:
    steps: tuple[tuple[tuple[int, ...], ...], ...]  # step -> worker task -> node indices
    workers: int

    @property
    def max_ready(self) -> int:
        return max((sum(len(t) for t in s) for s in self.steps), default=0)

    def __len__(self) -> int:
        return len(self.steps)


def schedule(dag: Dag, workers: int = 1, max_step: int | None = None, seed: int | None = None) -> Plan:
    if workers < 1:
        raise ValueError("need at least one worker")
    n = len(dag)
    remaining = [len(p) for p in dag.preds]
    ready = [i for i in range(n) if remaining[i] == 0]
    rng = random.Random(seed) if seed is not None else None

    def key(i):
        return (-int(dag.height[i]), dag.cells[i].id)

    steps = []
    done = 0
    while ready:
        if rng is None:
            ready.sort(key=key)
        else:
            rng.shuffle(ready)
        take = ready if max_step is None else ready[:max_step]
        ready = [] if max_step is None else ready[max_step:]
        tasks = [[] for _ in range(workers)]
        for k, node in enumerate(take):
            tasks[k % workers].append(node)
        steps.append(tuple(tuple(t) for t in tasks if t))
        for node in take:
            done += 1
            for s in dag.succs[node]:
                remaining[s] -= 1
                if remaining[s] == 0:
                    ready.append(s)
    if done != n:
        raise RuntimeError("schedule did not cover every node")
    return Plan(tuple(steps), workers)
