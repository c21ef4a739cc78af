"""Signed gadget decomposition of torus words."""

from __future__ import annotations

import numpy as np


def decompose(p: np.ndarray, l: int, basebit: int, dtype=np.int64) -> np.ndarray:
    """Split torus words into ``l`` signed digits in ``[-Bg/2, Bg/2)``.

    Returns digits (int64 unless ``dtype`` says otherwise) with a new axis of length ``l`` inserted before the
    last axis, most significant digit first, so that
    ``sum_i d_i * Bg^-(i+1)`` approximates ``p`` to within ``Bg^-l / 2``.
    """
    p = np.asarray(p)
    bits = 8 * p.dtype.itemsize
    u = np.uint64 if bits == 64 else np.uint32
    total = l * basebit
    half = 1 << (basebit - 1)
    offset = 0
    for i in range(1, l + 1):
        offset += half << (bits - i * basebit)
    if bits > total:
        offset += 1 << (bits - total - 1)
    offset %= 1 << bits
    t = p + p.dtype.type(offset)
    mask = u((1 << basebit) - 1)
    digits = np.empty(p.shape[:-1] + (l,) + p.shape[-1:], dtype=dtype)
    for i in range(l):
        shift = u(bits - (i + 1) * basebit)
        # bits 63:32 of a uint64 digit never exceed basebit, so int64 is safe
        digits[..., i, :] = (t >> shift) & mask
    digits -= half
    return digits


def recompose(digits: np.ndarray, basebit: int, dtype) -> np.ndarray:
    """Inverse of :func:`decompose` up to the dropped low bits."""
    dtype = np.dtype(dtype)
    bits = 8 * dtype.itemsize
    l = digits.shape[-2]
    out = np.zeros(digits.shape[:-2] + digits.shape[-1:], dtype=np.uint64)
    for i in range(l):
        shift = np.uint64(bits - (i + 1) * basebit)
        out += digits[..., i, :].astype(np.int64).astype(np.uint64) << shift
    return out.astype(dtype)


def gadget_values(l: int, basebit: int, bits: int) -> list[int]:
    """Torus words of ``Bg^-(i+1)`` for ``i < l``."""
    return [1 << (bits - (i + 1) * basebit) for i in range(l)]
