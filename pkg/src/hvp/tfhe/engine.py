"""External-product engines behind one interface.

``exact``
    Each TRGSW is expanded into its negacyclic matrix and the product becomes
    one float64 matrix multiply.  Every partial sum stays below 2^53, so the
    result is bit-exact.  64-bit rows are split into two 32-bit limbs for that.
    Memory grows as N^2, which limits it to small rings (``test-det``).
``fft``
    Twisted half-length complex FFT.  At level 1 rounding error is a few units
    of 2^-32.  At level 2 the float64 mantissa bounds accuracy to roughly
    2^-39 per coefficient, far below the circuit-bootstrapping gadget step of
    2^-18; the low 25 bits of a level-2 product are therefore noise.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .gadget import decompose
from .poly import fft_for, float_to_torus, to_signed_float


@lru_cache(maxsize=None)
def _negacyclic_index(N: int) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    return (j - i) % N, np.where(j < i, -1.0, 1.0)


def _expand(vals: np.ndarray) -> np.ndarray:
    """(R, 2, N) float rows -> (R*N, 2*N) negacyclic product matrix."""
    R, C, N = vals.shape
    src, sign = _negacyclic_index(N)
    m = vals[:, :, src] * sign  # (R, C, N_i, N_j)
    return np.ascontiguousarray(m.transpose(0, 2, 1, 3).reshape(R * N, C * N))


class ExactEngine:
    name = "exact"

    def prepare(self, C: np.ndarray):
        if C.dtype == np.uint64:
            lo = (C & np.uint64(0xFFFFFFFF)).astype(np.float64)
            hi = (C >> np.uint64(32)).astype(np.uint32).astype(np.int32).astype(np.float64)
            return (_expand(lo), _expand(hi))
        return (_expand(to_signed_float(C)),)

    def apply(self, prep, digits: np.ndarray, dtype) -> np.ndarray:
        B, R, N = digits.shape
        flat = digits.reshape(B, R * N)
        if len(prep) == 1:
            out = np.rint(flat @ prep[0]).astype(np.int64).astype(dtype)
        else:
            lo = np.rint(flat @ prep[0]).astype(np.int64).astype(np.uint64)
            hi = np.rint(flat @ prep[1]).astype(np.int64).astype(np.uint64)
            out = lo + (hi << np.uint64(32))
        return out.reshape(B, 2, N)


class FFTEngine:
    name = "fft"

    def prepare(self, C: np.ndarray):
        fft = fft_for(C.shape[-1])
        return fft.forward(to_signed_float(C))  # (2l, 2, N/2)

    def apply(self, prep, digits: np.ndarray, dtype) -> np.ndarray:
        N = digits.shape[-1]
        fft = fft_for(N)
        Df = fft.forward(digits)  # (B, 2l, h)
        prod = np.einsum("brh,rch->bch", Df, prep)
        return float_to_torus(fft.inverse(prod), dtype)


_ENGINES = {"exact": ExactEngine(), "fft": FFTEngine()}


def get_engine(name: str):
    return _ENGINES[name]


def external_product(trgsw, d: np.ndarray, engine) -> np.ndarray:
    """TRGSW (x) TRLWE on raw arrays; ``d`` has shape (..., 2, N)."""
    lead = d.shape[:-2]
    N = d.shape[-1]
    flat = d.reshape(-1, 2, N)
    digits = decompose(flat, trgsw.l, trgsw.basebit, np.float64).reshape(flat.shape[0], 2 * trgsw.l, N)
    out = engine.apply(trgsw.prepared(engine), digits, d.dtype)
    return out.reshape(lead + (2, N))
