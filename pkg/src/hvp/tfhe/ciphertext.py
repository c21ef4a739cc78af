"""Ciphertext and key containers.

Every container wraps a read-only numpy array.  Ciphertexts may carry leading
batch axes: a ``TlweCiphertext`` with ``data.shape == (B, n + 1)`` is B
independent samples, and all operations broadcast over those axes.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .params import ParameterSet, get_params, torus_dtype


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    view = np.ascontiguousarray(arr, dtype=dtype).view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True, eq=False)
class TlweCiphertext:
    """(a, b) with phase b - <a, s>; last axis holds a followed by b."""

    data: np.ndarray
    level: int
    params_name: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _frozen(self.data, torus_dtype(self.level)))

    @property
    def params(self) -> ParameterSet:
        return get_params(self.params_name)

    @property
    def a(self) -> np.ndarray:
        return self.data[..., :-1]

    @property
    def b(self) -> np.ndarray:
        return self.data[..., -1]

    @property
    def dim(self) -> int:
        return self.data.shape[-1] - 1

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.data.shape[:-1]

    def __getitem__(self, idx) -> TlweCiphertext:
        if not self.batch_shape:
            raise TypeError("unbatched ciphertext cannot be indexed")
        return TlweCiphertext(self.data[idx], self.level, self.params_name)

    def __len__(self) -> int:
        return self.batch_shape[0] if self.batch_shape else 1


@dataclass(frozen=True, eq=False)
class TrlweCiphertext:
    """Two torus polynomials; ``data[..., 0, :]`` is a[X], ``data[..., 1, :]`` is b[X]."""

    data: np.ndarray
    level: int
    params_name: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _frozen(self.data, torus_dtype(self.level)))
        if self.data.shape[-2] != 2:
            raise ValueError("TRLWE data must have a length-2 component axis")

    @property
    def params(self) -> ParameterSet:
        return get_params(self.params_name)

    @property
    def a(self) -> np.ndarray:
        return self.data[..., 0, :]

    @property
    def b(self) -> np.ndarray:
        return self.data[..., 1, :]

    @property
    def N(self) -> int:
        return self.data.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.data.shape[:-2]

    def __getitem__(self, idx) -> TrlweCiphertext:
        if not self.batch_shape:
            raise TypeError("unbatched ciphertext cannot be indexed")
        return TrlweCiphertext(self.data[idx], self.level, self.params_name)

    def __len__(self) -> int:
        return self.batch_shape[0] if self.batch_shape else 1


@dataclass(frozen=True, eq=False)
class TrgswCiphertext:
    """2l TRLWE rows; rows < l carry the gadget on a[X], rows >= l on b[X].

    ``basebit`` records the gadget of this ciphertext, which differs between
    bootstrapping-key entries and circuit-bootstrapping outputs.
    """

    data: np.ndarray
    level: int
    params_name: str
    basebit: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _frozen(self.data, torus_dtype(self.level)))
        if self.data.ndim != 3 or self.data.shape[1] != 2 or self.data.shape[0] % 2:
            raise ValueError("TRGSW data must have shape (2l, 2, N)")

    @property
    def params(self) -> ParameterSet:
        return get_params(self.params_name)

    @property
    def l(self) -> int:
        return self.data.shape[0] // 2

    @property
    def N(self) -> int:
        return self.data.shape[-1]

    def prepared(self, engine):
        """Engine-specific precomputation, built once per ciphertext."""
        key = engine.name
        got = self._cache.get(key)
        if got is None:
            with self._lock:
                got = self._cache.get(key)
                if got is None:
                    got = engine.prepare(self.data)
                    self._cache[key] = got
        return got


@dataclass(frozen=True, eq=False)
class SecretKey:
    params: ParameterSet
    lv0: np.ndarray
    lv1: np.ndarray
    lv2: np.ndarray

    def __post_init__(self) -> None:
        for name, size in (("lv0", self.params.n), ("lv1", self.params.N1), ("lv2", self.params.N2)):
            arr = _frozen(getattr(self, name), np.uint8)
            if arr.shape != (size,):
                raise ValueError(f"{name} must have length {size}")
            if arr.max(initial=0) > 1:
                raise ValueError(f"{name} must be binary")
            object.__setattr__(self, name, arr)

    def level_key(self, level: int) -> np.ndarray:
        return (self.lv0, self.lv1, self.lv2)[level]


@dataclass(frozen=True, eq=False)
class BootstrappingKey:
    """Public evaluation material.

    bk       (n, 2*l1, 2, N1) uint32   TRGSW_1 of lv0 bits under lv1
    ksk      (N1, ks_len, n+1) uint32  TLWE_0 of lv1_i / ks_base^(t+1)
    bk2      (n, 2*l2, 2, N2) uint64   TRGSW_2 of lv0 bits under lv2
    privksk  (2, N2+1, pks_len, 2, N1) uint32
             TRLWE_1 of P * k_j / pks_base^(t+1) with k = (lv2, -1) and
             P = -lv1[X] (index 0) or P = 1 (index 1)
    """

    params: ParameterSet
    bk: np.ndarray
    ksk: np.ndarray
    bk2: np.ndarray
    privksk: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)

    def __post_init__(self) -> None:
        p = self.params
        shapes = {
            "bk": ((p.n, 2 * p.l1, 2, p.N1), np.uint32),
            "ksk": ((p.N1, p.ks_len, p.n + 1), np.uint32),
            "bk2": ((p.n, 2 * p.l2, 2, p.N2), np.uint64),
            "privksk": ((2, p.N2 + 1, p.pks_len, 2, p.N1), np.uint32),
        }
        for name, (shape, dt) in shapes.items():
            arr = _frozen(getattr(self, name), dt)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)

    def cached(self, key, build):
        got = self._cache.get(key)
        if got is None:
            with self._lock:
                got = self._cache.get(key)
                if got is None:
                    got = build()
                    self._cache[key] = got
        return got

    def bk_trgsw(self, i: int) -> TrgswCiphertext:
        return self.cached(("bk", i), lambda: TrgswCiphertext(self.bk[i], 1, self.params.name, self.params.Bgbit1))

    def bk2_trgsw(self, i: int) -> TrgswCiphertext:
        return self.cached(("bk2", i), lambda: TrgswCiphertext(self.bk2[i], 2, self.params.name, self.params.Bgbit2))
