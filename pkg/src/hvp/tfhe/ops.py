"""Homomorphic operations: CMUX, sample extraction, key switching,
bootstrapping, the gate set, HomMUX without SE/IKS and circuit bootstrapping.

Functions suffixed ``_raw`` work on bare arrays with a leading batch axis and
are what the memory and netlist layers call for batching.  The unsuffixed
functions take and return the ciphertext containers.
"""

from __future__ import annotations

import numpy as np

from .ciphertext import BootstrappingKey, TlweCiphertext, TrgswCiphertext, TrlweCiphertext
from .counters import OPS
from .crypto import trgsw_trivial
from .engine import external_product, get_engine
from .gadget import decompose
from .params import ParameterSet, torus_bits
from .poly import rotate, to_signed_float

MU32 = 1 << 29
QUARTER32 = 1 << 30
_M32 = (1 << 32) - 1

GATE_ARITY = {
    "AND": 2,
    "ANDNOT": 2,
    "NAND": 2,
    "NOR": 2,
    "OR": 2,
    "ORNOT": 2,
    "XNOR": 2,
    "XOR": 2,
    "MUX": 3,
    "NOT": 1,
}

# Row chunk for the key-switch matmuls; bounds the float64 digit matrix.
_KS_ROWS = 256
# Batch chunk for blind rotation; keeps FFT temporaries around 100 MB.
_BOOT_ROWS = 1024


def engine_for(params: ParameterSet):
    return get_engine(params.poly_mult)


# -- CMUX ---------------------------------------------------------------------


def cmux_raw(sel: TrgswCiphertext, d1: np.ndarray, d0: np.ndarray) -> np.ndarray:
    """d0 + sel (x) (d1 - d0) for TRLWE arrays of shape (..., 2, N)."""
    engine = engine_for(sel.params)
    out = d0 + external_product(sel, d1 - d0, engine)
    OPS.add("cmux", int(np.prod(d0.shape[:-2], dtype=np.int64)))
    return out


def cmux(sel: TrgswCiphertext, c1: TrlweCiphertext, c0: TrlweCiphertext) -> TrlweCiphertext:
    """Decrypts to c1 when ``sel`` encrypts 1 and to c0 when it encrypts 0."""
    if not (sel.level == c1.level == c0.level):
        raise ValueError("CMUX operands must share a level")
    return TrlweCiphertext(cmux_raw(sel, c1.data, c0.data), c0.level, c0.params_name)


def trgsw_complement(sel: TrgswCiphertext) -> TrgswCiphertext:
    """H - C: a selector encrypting 1 - m, with H the trivial TRGSW of 1."""
    h = trgsw_trivial(1, sel.params, sel.level, sel.basebit, sel.l)
    return TrgswCiphertext((h.data - sel.data).astype(sel.data.dtype), sel.level, sel.params_name, sel.basebit)


# -- sample extraction and key switching ----------------------------------------


def sample_extract_raw(d: np.ndarray, k: int = 0) -> np.ndarray:
    """(..., 2, N) TRLWE -> (..., N+1) TLWE of coefficient k."""
    N = d.shape[-1]
    if not 0 <= k < N:
        raise IndexError(f"coefficient index {k} out of range for N={N}")
    j = np.arange(N)
    a = d[..., 0, :][..., (k - j) % N]
    a = np.where(j > k, 0 - a, a)
    return np.concatenate([a, d[..., 1, k : k + 1]], axis=-1)


def sample_extract(ct: TrlweCiphertext, k: int = 0) -> TlweCiphertext:
    return TlweCiphertext(sample_extract_raw(ct.data, k), ct.level, ct.params_name)


def _ksk_float(bkey: BootstrappingKey) -> np.ndarray:
    p = bkey.params
    return bkey.cached("ksk_f", lambda: to_signed_float(bkey.ksk).reshape(p.N1 * p.ks_len, p.n + 1))


def identity_key_switch_raw(d: np.ndarray, bkey: BootstrappingKey) -> np.ndarray:
    """(B, N1+1) level-1 TLWE -> (B, n+1) level-0 TLWE.

    With signed digits d_{i,t} of a_i, the result is
    (0, b) - sum_{i,t} d_{i,t} * KSK[i][t], one exact float64 matmul.
    """
    p = bkey.params
    lead = d.shape[:-1]
    flat = d.reshape(-1, d.shape[-1])
    K = _ksk_float(bkey)
    out = np.zeros((flat.shape[0], p.n + 1), dtype=np.uint32)
    for lo in range(0, flat.shape[0], _KS_ROWS):
        part = flat[lo : lo + _KS_ROWS]
        digits = decompose(part[:, :-1, None], p.ks_len, p.ks_basebit, np.float64)
        D = digits.reshape(part.shape[0], p.N1 * p.ks_len)
        acc = np.rint(D @ K).astype(np.int64).astype(np.uint32)
        out[lo : lo + _KS_ROWS] = 0 - acc
        out[lo : lo + _KS_ROWS, -1] += part[:, -1]
    OPS.add("iks", flat.shape[0])
    return out.reshape(lead + (p.n + 1,))


def identity_key_switch(ct: TlweCiphertext, bkey: BootstrappingKey) -> TlweCiphertext:
    if ct.level != 1 or ct.dim != bkey.params.N1:
        raise ValueError("identity key switching expects a level-1 TLWE of dimension N1")
    return TlweCiphertext(identity_key_switch_raw(ct.data, bkey), 0, ct.params_name)


def private_key_switch_raw(d: np.ndarray, bkey: BootstrappingKey, which: int) -> np.ndarray:
    """(B, N2+1) level-2 TLWE -> (B, 2, N1) level-1 TRLWE of P * phase.

    ``which`` = 0 selects P = -s1[X], 1 selects P = 1.
    """
    p = bkey.params
    rows = (p.N2 + 1) * p.pks_len
    table = bkey.privksk[which].reshape(rows, 2 * p.N1)
    small = rows * 2 * p.N1 * 8 <= 64 << 20
    if small:
        K = bkey.cached(("pks_f", which), lambda: to_signed_float(table))
    digits = decompose(d[:, :, None], p.pks_len, p.pks_basebit, np.float64)
    D = digits.reshape(d.shape[0], rows)
    if small:
        acc = np.rint(D @ K)
    else:
        acc = np.zeros((d.shape[0], 2 * p.N1))
        step = 2048
        for lo in range(0, rows, step):
            acc += D[:, lo : lo + step] @ to_signed_float(table[lo : lo + step])
        acc = np.rint(acc)
    out = 0 - acc.astype(np.int64).astype(np.uint32)
    return out.reshape(d.shape[0], 2, p.N1)


# -- bootstrapping ----------------------------------------------------------


def _modswitch(words: np.ndarray, twoN: int) -> np.ndarray:
    shift = 32 - (twoN.bit_length() - 1)
    return (((words.astype(np.uint64) + (1 << (shift - 1))) >> np.uint64(shift)) % twoN).astype(np.int64)


def blind_rotate_raw(d: np.ndarray, tv: np.ndarray, level: int, bkey: BootstrappingKey) -> np.ndarray:
    """X^{-phase} * (0, tv) for level-0 TLWEs ``d`` of shape (B, n+1).

    ``tv`` is one test vector (N,) or one per sample (B, N), in level words.
    """
    p = bkey.params
    N = p.dim(level)
    engine = engine_for(p)
    B = d.shape[0]
    abar = _modswitch(d[:, :-1], 2 * N)
    bbar = _modswitch(d[:, -1], 2 * N)
    acc = np.zeros((B, 2, N), dtype=tv.dtype)
    acc[:, 1, :] = tv
    acc = rotate(acc, -bbar)
    keyrow = bkey.bk_trgsw if level == 1 else bkey.bk2_trgsw
    for i in range(p.n):
        k = abar[:, i]
        if not k.any():
            continue
        acc = acc + external_product(keyrow(i), rotate(acc, k) - acc, engine)
    OPS.add(f"blind_rotate_lv{level}", B)
    return acc


def _mu_tv(p: ParameterSet) -> np.ndarray:
    return np.full(p.N1, MU32, dtype=np.uint32)


def bootstrap_to_trlwe_raw(d: np.ndarray, bkey: BootstrappingKey) -> np.ndarray:
    """Level-0 TLWE (B, n+1) -> level-1 TRLWE whose coefficient 0 is +-mu."""
    OPS.add("bootstrap", d.shape[0])
    tv = _mu_tv(bkey.params)
    if d.shape[0] <= _BOOT_ROWS:
        return blind_rotate_raw(d, tv, 1, bkey)
    parts = [blind_rotate_raw(d[lo : lo + _BOOT_ROWS], tv, 1, bkey) for lo in range(0, d.shape[0], _BOOT_ROWS)]
    return np.concatenate(parts)


def gate_bootstrap_raw(d: np.ndarray, bkey: BootstrappingKey) -> np.ndarray:
    """Bootstrap, extract coefficient 0 and key switch back to level 0."""
    lead = d.shape[:-1]
    flat = d.reshape(-1, d.shape[-1])
    if flat.shape[0] == 0:
        return d.copy()
    acc = bootstrap_to_trlwe_raw(flat, bkey)
    return identity_key_switch_raw(sample_extract_raw(acc, 0), bkey).reshape(lead + (-1,))


def gate_bootstrap(ct: TlweCiphertext, bkey: BootstrappingKey) -> TlweCiphertext:
    """Refresh the noise of a level-0 TLWE.

    Decryption fails silently when the input noise already exceeds mu.
    """
    if ct.level != 0:
        raise ValueError("gate bootstrapping expects a level-0 TLWE")
    return TlweCiphertext(gate_bootstrap_raw(ct.data, bkey), 0, ct.params_name)


# -- gates ------------------------------------------------------------------


def gate_linear_raw(kind: str, ins: list[np.ndarray]) -> np.ndarray:
    """Pre-bootstrap linear combination of a two-input gate."""
    a, b = ins
    s = a + b
    d = a - b
    out = {
        "NAND": lambda: 0 - s,
        "AND": lambda: s,
        "OR": lambda: s,
        "XOR": lambda: s + s,
        "XNOR": lambda: 0 - (s + s),
        "NOR": lambda: 0 - s,
        "ANDNOT": lambda: d,
        "ORNOT": lambda: d,
    }[kind]()
    out = out.astype(np.uint32)
    const = {
        "NAND": MU32,
        "AND": -MU32,
        "OR": MU32,
        "XOR": QUARTER32,
        "XNOR": -QUARTER32,
        "NOR": -MU32,
        "ANDNOT": -MU32,
        "ORNOT": MU32,
    }[kind]
    out[..., -1] += np.uint32(const & _M32)
    return out


def hom_not_raw(a: np.ndarray) -> np.ndarray:
    return (0 - a).astype(np.uint32)


def mux_halves_raw(s: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stacked [AND(s, a), ANDNOT(b, s)] inputs, shape (2, ..., n+1)."""
    return np.stack([gate_linear_raw("AND", [s, a]), gate_linear_raw("ANDNOT", [b, s])])


def hom_mux_raw(s: np.ndarray, a: np.ndarray, b: np.ndarray, bkey: BootstrappingKey) -> np.ndarray:
    """s ? a : b as a level-0 TLWE (two bootstraps, one key switch)."""
    halves = mux_halves_raw(s, a, b)
    lead = halves.shape[1:-1]
    flat = halves.reshape(-1, halves.shape[-1])
    ext = sample_extract_raw(bootstrap_to_trlwe_raw(flat, bkey), 0)
    ext = ext.reshape((2,) + lead + (-1,))
    summed = ext[0] + ext[1]
    summed[..., -1] += np.uint32(MU32)
    return identity_key_switch_raw(summed, bkey)


def hom_mux_no_seiks_raw(s: np.ndarray, a: np.ndarray, b: np.ndarray, bkey: BootstrappingKey) -> np.ndarray:
    """s ? a : b as a level-1 TRLWE carrying the bit at coefficient 0."""
    halves = mux_halves_raw(s, a, b)
    lead = halves.shape[1:-1]
    flat = halves.reshape(-1, halves.shape[-1])
    acc = bootstrap_to_trlwe_raw(flat, bkey).reshape((2,) + lead + (2, bkey.params.N1))
    out = acc[0] + acc[1]
    out[..., 1, 0] += np.uint32(MU32)
    return out


def _check_inputs(kind: str, inputs) -> None:
    if kind not in GATE_ARITY:
        raise ValueError(f"unknown gate kind {kind!r}")
    if len(inputs) != GATE_ARITY[kind]:
        raise ValueError(f"{kind} takes {GATE_ARITY[kind]} inputs, got {len(inputs)}")
    for ct in inputs:
        if ct.level != 0:
            raise ValueError("gates operate on level-0 TLWE ciphertexts")


def hom_gate(kind: str, inputs, bkey: BootstrappingKey | None = None) -> TlweCiphertext:
    """Evaluate one of the ten gate kinds; inputs broadcast over batch axes."""
    kind = kind.upper()
    _check_inputs(kind, inputs)
    name = inputs[0].params_name
    data = [np.asarray(ct.data) for ct in inputs]
    if kind == "NOT":
        return TlweCiphertext(hom_not_raw(data[0]), 0, name)
    if bkey is None:
        raise ValueError(f"{kind} needs a bootstrapping key")
    data = np.broadcast_arrays(*data)
    if kind == "MUX":
        out = hom_mux_raw(*data, bkey)
    else:
        out = gate_bootstrap_raw(gate_linear_raw(kind, list(data)), bkey)
    OPS.add(f"gate_{kind}", int(np.prod(out.shape[:-1], dtype=np.int64)))
    return TlweCiphertext(out, 0, name)


def hom_mux_no_seiks(sel: TlweCiphertext, a: TlweCiphertext, b: TlweCiphertext, bkey: BootstrappingKey) -> TrlweCiphertext:
    _check_inputs("MUX", [sel, a, b])
    data = np.broadcast_arrays(sel.data, a.data, b.data)
    return TrlweCiphertext(hom_mux_no_seiks_raw(*data, bkey), 1, sel.params_name)


# -- circuit bootstrapping --------------------------------------------------------


def circuit_bootstrap_raw(d: np.ndarray, bkey: BootstrappingKey) -> np.ndarray:
    """(B, n+1) level-0 TLWEs -> (B, 2*cb_l, 2, N1) TRGSW rows of the same bits."""
    p = bkey.params
    l, bb = p.cb_l, p.cb_Bgbit
    B = d.shape[0]
    half = [np.uint64(1 << (64 - (i + 1) * bb - 1)) for i in range(l)]
    tv = np.repeat(np.array(half, dtype=np.uint64)[None, :], B, axis=0).reshape(B * l, 1)
    tv = np.broadcast_to(tv, (B * l, p.N2))
    rep = np.repeat(d, l, axis=0)
    acc = blind_rotate_raw(rep, tv, 2, bkey)
    ext = sample_extract_raw(acc, 0)
    ext[:, -1] += tv[:, 0]
    rows_a = private_key_switch_raw(ext, bkey, 0).reshape(B, l, 2, p.N1)
    rows_b = private_key_switch_raw(ext, bkey, 1).reshape(B, l, 2, p.N1)
    OPS.add("circuit_bootstrap", B)
    return np.concatenate([rows_a, rows_b], axis=1)


def circuit_bootstrap(ct: TlweCiphertext, bkey: BootstrappingKey):
    """Level-0 TLWE(s) -> level-1 TRGSW selector(s); a list for batched input."""
    if ct.level != 0:
        raise ValueError("circuit bootstrapping expects a level-0 TLWE")
    flat = ct.data.reshape(-1, ct.data.shape[-1])
    rows = circuit_bootstrap_raw(flat, bkey)
    p = bkey.params
    out = [TrgswCiphertext(r, 1, ct.params_name, p.cb_Bgbit) for r in rows]
    return out[0] if not ct.batch_shape else out


def torus_word(x: float, level: int) -> int:
    bits = torus_bits(level)
    return int(round(x * 2**bits)) % (1 << bits)
