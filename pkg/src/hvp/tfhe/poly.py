"""Negacyclic polynomial arithmetic over Z[X]/(X^N + 1) with torus coefficients.

Torus polynomials are unsigned integer arrays (uint32 or uint64) whose last
axis holds the N coefficients; wraparound gives arithmetic mod 1.  Three
multipliers live here:

* :func:`negacyclic_schoolbook` – exact O(N^2) reference, used as an oracle.
* :class:`NegacyclicFFT` – folded complex FFT of size N/2 (approximate).
* :func:`mul_small_exact` – exact product of a small-integer polynomial and a
  torus polynomial, done by limb-splitting so every FFT stays below the double
  mantissa.  Used for encryption and decryption.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def negacyclic_matrix(p: np.ndarray) -> np.ndarray:
    """Matrix ``M`` with ``x @ M == x * p`` (negacyclic), rows indexed by x's degree."""
    p = np.asarray(p)
    N = p.shape[-1]
    i = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    src = (j - i) % N
    m = p[..., src]
    neg = j < i
    return np.where(neg, (0 - m).astype(p.dtype), m)


def negacyclic_schoolbook(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Exact negacyclic product of integer poly ``x`` and torus poly ``p``.

    Computed with uint64 wraparound, which is exact modulo 2^64 and therefore
    modulo the narrower torus word too.
    """
    p = np.asarray(p)
    x = np.asarray(x).astype(np.int64).astype(np.uint64)
    m = negacyclic_matrix(p.astype(np.uint64))
    out = np.matmul(x[..., None, :], m)[..., 0, :]
    return out.astype(p.dtype)


def rotate(p: np.ndarray, k) -> np.ndarray:
    """Multiply torus polynomials by X^k (negacyclic); ``k`` may be per-sample.

    ``p`` has shape (B, ..., N) and ``k`` shape (B,) or is a scalar.
    """
    p = np.asarray(p)
    N = p.shape[-1]
    k = np.asarray(k, dtype=np.int64) % (2 * N)
    if k.ndim == 0:
        k = int(k)
        sign_flip = k >= N
        k %= N
        out = np.roll(p, k, axis=-1)
        if k:
            out[..., :k] = 0 - out[..., :k]
        if sign_flip:
            out = 0 - out
        return out
    B = p.shape[0]
    ext = np.concatenate([p, 0 - p], axis=-1).reshape(-1)
    rows = int(np.prod(p.shape[1:-1], dtype=np.int64))
    idx = (np.arange(N)[None, :] - k[:, None]) % (2 * N)  # (B, N)
    base = (np.arange(B * rows) * (2 * N)).reshape((B, rows, 1))
    return ext[base + idx[:, None, :]].reshape(p.shape)


def to_signed_float(p: np.ndarray) -> np.ndarray:
    """Torus words as centred integers in float64."""
    p = np.asarray(p)
    if p.dtype == np.uint64:
        return p.view(np.int64).astype(np.float64)
    return p.astype(np.int32).astype(np.float64)


def float_to_torus(x: np.ndarray, dtype) -> np.ndarray:
    """Round float integers (possibly huge) to torus words mod 2^bits."""
    dtype = np.dtype(dtype)
    if dtype.itemsize == 4:
        # |x| stays far below 2^63 for every 32-bit product we form
        return np.rint(x).astype(np.int64).astype(np.uint32)
    t = x * 2.0**-64
    t -= np.rint(t)
    y = np.clip(np.rint(t * 2.0**64), -(2.0**63), 2.0**63 - 1024)
    return y.astype(np.int64).view(np.uint64)


class NegacyclicFFT:
    """Negacyclic transform of length N using a twisted complex FFT of length N/2."""

    def __init__(self, N: int) -> None:
        self.N = N
        self.h = N // 2
        j = np.arange(self.h)
        self.twist = np.exp(1j * np.pi * j / N)
        self.untwist = np.conj(self.twist)

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self.h
        z = np.empty(x.shape[:-1] + (h,), dtype=np.complex128)
        z.real = x[..., :h]
        z.imag = x[..., h:]
        z *= self.twist
        return np.fft.fft(z, axis=-1)

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        z = np.fft.ifft(Z, axis=-1) * self.untwist
        return np.concatenate([z.real, z.imag], axis=-1)


@lru_cache(maxsize=None)
def fft_for(N: int) -> NegacyclicFFT:
    return NegacyclicFFT(N)


def mul_small_exact(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Exact negacyclic product of integer poly(s) ``x`` and torus poly(s) ``p``.

    Shapes broadcast on the leading axes.  The torus operand is split into
    limbs small enough that each partial FFT product is an exact integer once
    rounded.
    """
    p = np.asarray(p)
    dtype = p.dtype
    bits = 8 * dtype.itemsize
    x = np.asarray(x, dtype=np.int64)
    N = p.shape[-1]
    xmax = max(int(np.abs(x).max(initial=0)), 1)
    limb = 46 - int(np.ceil(np.log2(N))) - int(xmax).bit_length()
    limb = max(8, min(limb, 32))
    fft = fft_for(N)
    X = fft.forward(x.astype(np.float64))
    acc = None
    pw = p.astype(np.uint64)
    shift = 0
    while shift < bits:
        part = ((pw >> np.uint64(shift)) & np.uint64((1 << limb) - 1)).astype(np.float64)
        prod = np.rint(fft.inverse(X * fft.forward(part))).astype(np.int64).astype(np.uint64)
        prod = prod << np.uint64(shift)
        acc = prod if acc is None else acc + prod
        shift += limb
    return acc.astype(dtype)


def poly_mul_torus_binary(a: np.ndarray, s: np.ndarray) -> np.ndarray:
    """a[X] * s[X] with a torus and s binary (key), exact."""
    return mul_small_exact(s, a)
