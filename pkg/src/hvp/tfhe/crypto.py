"""Key generation, encryption, decryption and trivial ciphertexts."""

from __future__ import annotations

import numpy as np

from .ciphertext import BootstrappingKey, SecretKey, TlweCiphertext, TrgswCiphertext, TrlweCiphertext
from .gadget import gadget_values
from .params import ParameterSet, torus_bits, torus_dtype
from .poly import mul_small_exact
from .sampler import NoiseSampler, real_to_torus

_CHUNK = 4096


def _mu_word(level: int) -> int:
    return 1 << (torus_bits(level) - 3)  # 1/8


def encode_bits(m, level: int) -> np.ndarray:
    """mu * (2m - 1) as torus words."""
    m = np.asarray(m)
    if m.size and not np.isin(m, (0, 1)).all():
        raise ValueError("plaintext must be binary")
    dt = torus_dtype(level)
    mu = _mu_word(level)
    return np.where(m.astype(bool), dt(mu), dt((1 << torus_bits(level)) - mu)).astype(dt)


def decode_phase(phase: np.ndarray) -> np.ndarray:
    """(1 + sgn(phase)) / 2 with sgn(0) = +1."""
    bits = 8 * phase.dtype.itemsize
    return (phase < phase.dtype.type(1 << (bits - 1))).astype(np.uint8)


def _sampler(sampler: NoiseSampler | None) -> NoiseSampler:
    return sampler if sampler is not None else NoiseSampler()


def gen_secret_key(params: ParameterSet, rng: NoiseSampler | None = None) -> SecretKey:
    rng = _sampler(rng)
    return SecretKey(params, rng.bits(params.n), rng.bits(params.N1), rng.bits(params.N2))


# -- raw encryption helpers --------------------------------------------------


def _lwe_encrypt_words(phase, key, level, params, sampler, mask=None, noise=None):
    phase = np.asarray(phase, dtype=torus_dtype(level))
    dt = torus_dtype(level)
    n = key.shape[0]
    if mask is None:
        a = sampler.uniform(phase.shape + (n,), dt)
    else:
        a = np.broadcast_to(np.asarray(mask, dtype=dt), phase.shape + (n,))
    if noise is None:
        e = sampler.gaussian_torus(phase.shape, sampler.sigma_for(params, level), dt)
    else:
        e = np.broadcast_to(np.asarray(noise, dtype=dt), phase.shape)
    dot = (a.astype(np.uint64) * key.astype(np.uint64)).sum(axis=-1, dtype=np.uint64).astype(dt)
    b = dot + phase + e
    return np.concatenate([a, b[..., None]], axis=-1)


def _rlwe_encrypt_words(phase, key, level, params, sampler, mask=None, noise=None):
    """phase: (..., N) torus words -> (..., 2, N)."""
    dt = torus_dtype(level)
    phase = np.asarray(phase, dtype=dt)
    lead = phase.shape[:-1]
    N = key.shape[0]
    flat = phase.reshape(-1, N)
    out = np.empty((flat.shape[0], 2, N), dtype=dt)
    sigma = sampler.sigma_for(params, level)
    for lo in range(0, flat.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, flat.shape[0])
        rows = hi - lo
        if mask is None:
            a = sampler.uniform((rows, N), dt)
        else:
            a = np.broadcast_to(np.asarray(mask, dtype=dt), (rows, N))
        if noise is None:
            e = sampler.gaussian_torus((rows, N), sigma, dt)
        else:
            e = np.broadcast_to(np.asarray(noise, dtype=dt), (rows, N))
        out[lo:hi, 0] = a
        out[lo:hi, 1] = mul_small_exact(key, a) + flat[lo:hi] + e
    return out.reshape(lead + (2, N))


def _gadget_rows(m, level: int, l: int, basebit: int, N: int) -> np.ndarray:
    """m * G as an array (..., 2l, 2, N)."""
    dt = torus_dtype(level)
    m = np.asarray(m, dtype=np.int64)
    g = np.zeros((2 * l, 2, N), dtype=dt)
    for i, gv in enumerate(gadget_values(l, basebit, torus_bits(level))):
        g[i, 0, 0] = gv
        g[l + i, 1, 0] = gv
    return (g * m[..., None, None, None].astype(dt)).astype(dt)


# -- public API -------------------------------------------------------------


def tlwe_encrypt(m, sk: SecretKey, sampler: NoiseSampler | None = None, level: int = 0, *, mask=None, noise=None) -> TlweCiphertext:
    """b = <a, s> + mu(2m - 1) + e; ``m`` may be an array for a batch."""
    sampler = _sampler(sampler)
    data = _lwe_encrypt_words(encode_bits(m, level), sk.level_key(level), level, sk.params, sampler, mask, noise)
    return TlweCiphertext(data, level, sk.params.name)


def tlwe_encrypt_phase(phase, sk: SecretKey, sampler: NoiseSampler | None = None, level: int = 0) -> TlweCiphertext:
    """Encrypt arbitrary torus words (used by tests and noise studies)."""
    sampler = _sampler(sampler)
    data = _lwe_encrypt_words(phase, sk.level_key(level), level, sk.params, sampler)
    return TlweCiphertext(data, level, sk.params.name)


def tlwe_phase(ct: TlweCiphertext, sk: SecretKey) -> np.ndarray:
    key = sk.level_key(ct.level)
    if ct.dim != key.shape[0]:
        raise ValueError(f"ciphertext dimension {ct.dim} does not match level-{ct.level} key")
    dt = ct.data.dtype
    dot = (ct.a.astype(np.uint64) * key.astype(np.uint64)).sum(axis=-1, dtype=np.uint64).astype(dt)
    return (ct.b - dot).astype(dt)


def tlwe_decrypt(ct: TlweCiphertext, sk: SecretKey):
    bits = decode_phase(tlwe_phase(ct, sk))
    return int(bits) if bits.ndim == 0 else bits


def tlwe_trivial(m, params: ParameterSet, level: int = 0) -> TlweCiphertext:
    """(0, mu(2m - 1)): decrypts to m under any key."""
    words = encode_bits(m, level)
    dim = params.dim(level)
    data = np.zeros(words.shape + (dim + 1,), dtype=torus_dtype(level))
    data[..., -1] = words
    return TlweCiphertext(data, level, params.name)


def trlwe_encrypt(m, sk: SecretKey, sampler: NoiseSampler | None = None, level: int = 1, *, mask=None, noise=None) -> TrlweCiphertext:
    sampler = _sampler(sampler)
    m = np.asarray(m)
    N = sk.params.dim(level)
    if m.shape[-1:] != (N,):
        raise ValueError(f"plaintext polynomial must have {N} coefficients")
    data = _rlwe_encrypt_words(encode_bits(m, level), sk.level_key(level), level, sk.params, sampler, mask, noise)
    return TrlweCiphertext(data, level, sk.params.name)


def trlwe_encrypt_phase(phase, sk: SecretKey, sampler: NoiseSampler | None = None, level: int = 1) -> TrlweCiphertext:
    sampler = _sampler(sampler)
    data = _rlwe_encrypt_words(phase, sk.level_key(level), level, sk.params, sampler)
    return TrlweCiphertext(data, level, sk.params.name)


def trlwe_phase(ct: TrlweCiphertext, sk: SecretKey) -> np.ndarray:
    key = sk.level_key(ct.level)
    if ct.N != key.shape[0]:
        raise ValueError(f"ciphertext degree {ct.N} does not match level-{ct.level} key")
    return (ct.b - mul_small_exact(key, ct.a)).astype(ct.data.dtype)


def trlwe_decrypt(ct: TrlweCiphertext, sk: SecretKey) -> np.ndarray:
    return decode_phase(trlwe_phase(ct, sk))


def trlwe_trivial(m, params: ParameterSet, level: int = 1) -> TrlweCiphertext:
    words = encode_bits(m, level)
    return trlwe_trivial_phase(words, params, level)


def trlwe_trivial_phase(phase, params: ParameterSet, level: int = 1) -> TrlweCiphertext:
    phase = np.asarray(phase, dtype=torus_dtype(level))
    data = np.zeros(phase.shape[:-1] + (2, phase.shape[-1]), dtype=phase.dtype)
    data[..., 1, :] = phase
    return TrlweCiphertext(data, level, params.name)


def trgsw_encrypt(m, sk: SecretKey, sampler: NoiseSampler | None = None, level: int = 1, basebit: int | None = None, l: int | None = None) -> TrgswCiphertext:
    """2l fresh encryptions of zero plus m times the gadget matrix."""
    sampler = _sampler(sampler)
    p = sk.params
    dl, dbits = p.gadget(level)
    l = dl if l is None else l
    basebit = dbits if basebit is None else basebit
    N = p.dim(level)
    zeros = np.zeros((2 * l, N), dtype=torus_dtype(level))
    rows = _rlwe_encrypt_words(zeros, sk.level_key(level), level, p, sampler)
    data = rows + _gadget_rows(int(m), level, l, basebit, N)
    return TrgswCiphertext(data, level, p.name, basebit)


def trgsw_trivial(m: int, params: ParameterSet, level: int = 1, basebit: int | None = None, l: int | None = None) -> TrgswCiphertext:
    dl, dbits = params.gadget(level)
    l = dl if l is None else l
    basebit = dbits if basebit is None else basebit
    data = _gadget_rows(int(m), level, l, basebit, params.dim(level))
    return TrgswCiphertext(data, level, params.name, basebit)


def gen_bootstrapping_key(sk: SecretKey, sampler: NoiseSampler | None = None) -> BootstrappingKey:
    sampler = _sampler(sampler)
    p = sk.params
    s0 = sk.lv0.astype(np.int64)

    def trgsw_table(level: int) -> np.ndarray:
        l, basebit = p.gadget(level)
        N = p.dim(level)
        zeros = np.zeros((p.n, 2 * l, N), dtype=torus_dtype(level))
        rows = _rlwe_encrypt_words(zeros, sk.level_key(level), level, p, sampler)
        return rows + _gadget_rows(s0, level, l, basebit, N)

    bk = trgsw_table(1)
    bk2 = trgsw_table(2)

    # identity key switch, level 1 -> level 0
    ks_g = np.array(gadget_values(p.ks_len, p.ks_basebit, 32), dtype=np.uint64)
    msg = (sk.lv1.astype(np.uint64)[:, None] * ks_g[None, :]).astype(np.uint32)
    ksk = _lwe_encrypt_words(msg, sk.lv0, 0, p, sampler)

    # private key switch, level-2 TLWE -> level-1 TRLWE, for P = -s1 and P = 1
    pks_g = np.array(gadget_values(p.pks_len, p.pks_basebit, 32), dtype=np.uint64)
    kext = np.concatenate([sk.lv2.astype(np.int64), [-1]])
    coeff = (kext[:, None] * pks_g[None, :].astype(np.int64)).astype(np.uint32)  # (N2+1, t)
    phase = np.zeros((2, p.N2 + 1, p.pks_len, p.N1), dtype=np.uint32)
    phase[0] = (0 - coeff[..., None] * sk.lv1.astype(np.uint32)).astype(np.uint32)
    phase[1, :, :, 0] = coeff
    privksk = _rlwe_encrypt_words(phase, sk.lv1, 1, p, sampler)
    return BootstrappingKey(p, bk, ksk, bk2, privksk)


def real_phase(x, level: int) -> np.ndarray:
    """Real message(s) mod 1 as torus words of the given level."""
    return real_to_torus(x, torus_dtype(level))
