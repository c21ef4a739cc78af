"""Seedable CSPRNG-backed sampling of keys, masks and torus noise."""

from __future__ import annotations

import hashlib
import os
import threading

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from .params import ParameterSet


class DeterministicModeRefused(RuntimeError):
    pass


class NoiseSampler:
    """ChaCha20 keystream turned into uniform words, bits and Gaussian noise.

    ``seed=None`` keys the stream from ``os.urandom``.  A fixed seed gives a
    reproducible stream and is refused for secure parameter sets unless
    ``unsafe=True`` is passed explicitly.  ``sigma`` overrides the per-level
    noise of the parameter set when encrypting (``None`` keeps the default).
    """

    def __init__(
        self,
        seed: int | bytes | str | None = None,
        params: ParameterSet | None = None,
        *,
        unsafe: bool = False,
        sigma: float | None = None,
    ) -> None:
        self.sigma = sigma
        if seed is None:
            key = os.urandom(32)
        else:
            if params is not None and params.secure and not unsafe:
                raise DeterministicModeRefused(
                    f"fixed-seed sampling is refused for {params.name!r}; pass unsafe=True"
                )
            if isinstance(seed, int):
                seed = seed.to_bytes(16, "little", signed=True)
            elif isinstance(seed, str):
                seed = seed.encode()
            key = hashlib.sha256(b"hvp-sampler" + seed).digest()
        self.deterministic = seed is not None
        self._stream = Cipher(algorithms.ChaCha20(key, bytes(16)), mode=None).encryptor()
        self._lock = threading.Lock()

    def _bytes(self, count: int) -> bytes:
        with self._lock:
            return self._stream.update(bytes(count))

    def uniform(self, shape, dtype=np.uint32) -> np.ndarray:
        dtype = np.dtype(dtype)
        count = int(np.prod(shape, dtype=np.int64))
        return np.frombuffer(self._bytes(count * dtype.itemsize), dtype=dtype).reshape(shape).copy()

    def sigma_for(self, params: ParameterSet, level: int) -> float:
        return params.alpha(level) if self.sigma is None else self.sigma

    def bits(self, shape) -> np.ndarray:
        return (self.uniform(shape, np.uint8) & 1).astype(np.uint8)

    def gaussian_torus(self, shape, sigma: float, dtype=np.uint32) -> np.ndarray:
        """Samples of a Gaussian of std ``sigma`` reduced onto the torus word."""
        dtype = np.dtype(dtype)
        if sigma == 0:
            return np.zeros(shape, dtype=dtype)
        count = int(np.prod(shape, dtype=np.int64))
        u = self.uniform((2, count), np.uint64)
        u1 = (u[0] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u2 = (u[1] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
        return real_to_torus(z * sigma, dtype).reshape(shape)


def real_to_torus(x, dtype=np.uint32) -> np.ndarray:
    """Round real numbers mod 1 to the nearest ``dtype`` torus word."""
    dtype = np.dtype(dtype)
    bits = 8 * dtype.itemsize
    x = np.asarray(x, dtype=np.float64)
    frac = x - np.rint(x)  # in [-0.5, 0.5]
    scaled = np.rint(frac * 2.0**bits)
    if bits == 64:
        scaled = np.clip(scaled, -(2.0**63), 2.0**63 - 1024)
    return scaled.astype(np.int64).astype(dtype)


def torus_to_real(t) -> np.ndarray:
    """Map torus words to representatives in [-0.5, 0.5)."""
    t = np.asarray(t)
    bits = 8 * t.dtype.itemsize
    signed = t.view(np.int64) if bits == 64 else t.astype(np.int32)
    return signed.astype(np.float64) * 2.0**-bits
