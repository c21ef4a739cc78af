"""Thread-safe operation counters used for instrumentation.

Every homomorphic primitive bumps a named counter by the number of
ciphertexts it processed, so batched calls count each sample.
"""

from __future__ import annotations

import threading
from collections import Counter
from contextlib import contextmanager


class OpCounter:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts: Counter[str] = Counter()

    def add(self, name: str, count: int = 1) -> None:
        if count:
            with self._lock:
                self._counts[name] += int(count)

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()

    def __getitem__(self, name: str) -> int:
        with self._lock:
            return self._counts.get(name, 0)


OPS = OpCounter()


class _Delta(dict):
    def __missing__(self, key):
        return 0


@contextmanager
def measure():
    """Yield a dict that is filled with the counter deltas on exit."""
    before = OPS.snapshot()
    delta = _Delta()
    try:
        yield delta
    finally:
        after = OPS.snapshot()
        for k, v in after.items():
            d = v - before.get(k, 0)
            if d:
                delta[k] = d
