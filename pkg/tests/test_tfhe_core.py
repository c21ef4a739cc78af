import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hvp.tfhe import (
    GATE_ARITY,
    OPS,
    TEST_DET,
    TFHE_80,
    DeterministicModeRefused,
    NoiseSampler,
    circuit_bootstrap,
    cmux,
    gate_bootstrap,
    get_params,
    hom_gate,
    hom_mux_no_seiks,
    identity_key_switch,
    measure,
    sample_extract,
    tlwe_decrypt,
    tlwe_encrypt,
    tlwe_phase,
    tlwe_trivial,
    trgsw_complement,
    trgsw_encrypt,
    trgsw_trivial,
    trlwe_decrypt,
    trlwe_encrypt,
    trlwe_trivial,
)
from hvp.tfhe.crypto import decode_phase, encode_bits
from hvp.tfhe.gadget import decompose, recompose
from hvp.tfhe.params import derive
from hvp.tfhe.poly import fft_for, mul_small_exact, negacyclic_schoolbook, rotate, to_signed_float
from hvp.tfhe.sampler import real_to_torus, torus_to_real

TRUTH = {
    "AND": lambda a, b: a & b,
    "NAND": lambda a, b: 1 - (a & b),
    "OR": lambda a, b: a | b,
    "NOR": lambda a, b: 1 - (a | b),
    "XOR": lambda a, b: a ^ b,
    "XNOR": lambda a, b: 1 - (a ^ b),
    "ANDNOT": lambda a, b: a & (1 - b),
    "ORNOT": lambda a, b: a | (1 - b),
}


# -- parameters and sampling ---------------------------------------------------


def test_parameter_sets():
    assert get_params("tfhe-80") is TFHE_80
    assert (TFHE_80.n, TFHE_80.N1, TFHE_80.N2) == (500, 1024, 2048)
    assert (TFHE_80.l1, TFHE_80.Bg1, TFHE_80.l2, TFHE_80.Bg2) == (2, 1024, 4, 512)
    assert TEST_DET.alpha0 == TEST_DET.alpha1 == TEST_DET.alpha2 == 0 and not TEST_DET.secure
    with pytest.raises(KeyError):
        get_params("nope")
    with pytest.raises(ValueError):
        derive(TFHE_80, "bad", N1=1000)
    with pytest.raises(ValueError):
        derive(TFHE_80, "bad2", alpha0=0.0)


def test_sampler_determinism_and_refusal():
    a = NoiseSampler(7, TEST_DET).uniform(16)
    b = NoiseSampler(7, TEST_DET).uniform(16)
    assert (a == b).all()
    assert not (NoiseSampler(8, TEST_DET).uniform(16) == a).all()
    with pytest.raises(DeterministicModeRefused):
        NoiseSampler(7, TFHE_80)
    NoiseSampler(7, TFHE_80, unsafe=True)


def test_gaussian_statistics():
    s = NoiseSampler(3, TEST_DET)
    x = torus_to_real(s.gaussian_torus(200_000, 1e-3))
    assert abs(x.mean()) < 2e-5
    assert abs(x.std() / 1e-3 - 1) < 0.01


@given(st.floats(-10, 10, allow_nan=False))
def test_torus_round_trip(x):
    t = real_to_torus(x)
    frac = x - round(x)
    assert abs(float(torus_to_real(t)) - frac) <= 2**-32 or abs(abs(frac) - 0.5) < 1e-9


# -- polynomials -------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([8, 64, 1024]))
def test_mul_small_exact_matches_schoolbook(seed, N):
    r = np.random.default_rng(seed)
    x = r.integers(-512, 512, N)
    p = r.integers(0, 2**32, N, dtype=np.uint64).astype(np.uint32)
    assert (mul_small_exact(x, p) == negacyclic_schoolbook(x, p)).all()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(-300, 300))
def test_rotate_is_multiplication_by_monomial(seed, k):
    N = 64
    r = np.random.default_rng(seed)
    p = r.integers(0, 2**32, N, dtype=np.uint64).astype(np.uint32)
    mono = np.zeros(N, dtype=np.int64)
    kk = k % (2 * N)
    mono[kk % N] = 1 if kk < N else -1
    assert (rotate(p, k) == negacyclic_schoolbook(mono, p)).all()
    assert (rotate(p[None], np.array([k]))[0] == rotate(p, k)).all()


def test_fft_product_error_is_small():
    N = 1024
    r = np.random.default_rng(1)
    x = r.integers(-512, 512, N)
    p = r.integers(0, 2**32, N, dtype=np.uint64).astype(np.uint32)
    fft = fft_for(N)
    approx = fft.inverse(fft.forward(x.astype(float)) * fft.forward(to_signed_float(p)))
    exact = negacyclic_schoolbook(x, p).astype(np.int32).astype(float)
    err = (np.rint(approx) - exact) % 2**32
    err = np.minimum(err, 2**32 - err)
    assert err.max() < 2**8


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_gadget_decomposition_bound(seed):
    r = np.random.default_rng(seed)
    for bits, l, bb in ((32, 2, 10), (32, 3, 6), (64, 4, 9)):
        dt = np.uint32 if bits == 32 else np.uint64
        p = r.integers(0, 2**63, 32, dtype=np.uint64).astype(dt)
        d = decompose(p, l, bb)
        assert d.min() >= -(1 << (bb - 1)) and d.max() < (1 << (bb - 1))
        back = recompose(d, bb, dt)
        diff = (p - back).astype(np.int64 if bits == 64 else np.int32)
        assert np.abs(diff.astype(float)).max() <= 2.0 ** (bits - l * bb - 1)


# -- encryption -------------------------------------------------------------------


def test_encode_decode():
    assert (decode_phase(encode_bits(np.array([0, 1]), 0)) == [0, 1]).all()
    assert decode_phase(np.uint32(0)) == 1  # sign convention at 0


@pytest.mark.parametrize("level", [0, 1, 2])
def test_tlwe_round_trip(det_keys, level):
    sk, _ = det_keys
    m = np.random.default_rng(level).integers(0, 2, 40)
    ct = tlwe_encrypt(m, sk, NoiseSampler(1, TEST_DET), level)
    assert (tlwe_decrypt(ct, sk) == m).all()
    assert (tlwe_decrypt(tlwe_trivial(m, TEST_DET, level), sk) == m).all()


def test_trlwe_and_trgsw(det_keys):
    sk, _ = det_keys
    r = NoiseSampler(2, TEST_DET)
    m1, m0 = r.bits(TEST_DET.N1), r.bits(TEST_DET.N1)
    c1, c0 = trlwe_encrypt(m1, sk, r), trlwe_encrypt(m0, sk, r)
    assert (trlwe_decrypt(c1, sk) == m1).all()
    assert (trlwe_decrypt(trlwe_trivial(m0, TEST_DET), sk) == m0).all()
    for bit in (0, 1):
        for sel in (trgsw_encrypt(bit, sk, r), trgsw_trivial(bit, TEST_DET)):
            assert (trlwe_decrypt(cmux(sel, c1, c0), sk) == (m1 if bit else m0)).all()
            assert (trlwe_decrypt(cmux(trgsw_complement(sel), c1, c0), sk) == (m0 if bit else m1)).all()


def test_fresh_tlwe_noise_at_tfhe80(keys80):
    sk, _ = keys80
    ct = tlwe_encrypt(np.ones(5000, dtype=np.uint8), sk, NoiseSampler(4, TFHE_80, unsafe=True))
    err = torus_to_real(tlwe_phase(ct, sk)) - 0.125
    assert abs(err.std() / TFHE_80.alpha0 - 1) < 0.05


# -- homomorphic operations -----------------------------------------------------------


@pytest.mark.parametrize("kind", sorted(TRUTH))
def test_binary_gates_exhaustive(det_keys, kind):
    sk, bk = det_keys
    r = NoiseSampler(5, TEST_DET)
    for a, b in itertools.product((0, 1), repeat=2):
        out = hom_gate(kind, [tlwe_encrypt([a] * 8, sk, r), tlwe_encrypt([b] * 8, sk, r)], bk)
        assert (tlwe_decrypt(out, sk) == TRUTH[kind](a, b)).all()


def test_not_mux_and_no_seiks(det_keys):
    sk, bk = det_keys
    r = NoiseSampler(6, TEST_DET)
    E = lambda m: tlwe_encrypt(m, sk, r)  # noqa: E731
    for a in (0, 1):
        assert tlwe_decrypt(hom_gate("NOT", [E(a)], bk), sk) == 1 - a
    for s, a, b in itertools.product((0, 1), repeat=3):
        want = a if s else b
        assert tlwe_decrypt(hom_gate("MUX", [E(s), E(a), E(b)], bk), sk) == want
        assert trlwe_decrypt(hom_mux_no_seiks(E(s), E(a), E(b), bk), sk)[0] == want
    assert set(GATE_ARITY) == set(TRUTH) | {"NOT", "MUX"}


def test_gate_input_validation(det_keys):
    sk, bk = det_keys
    with pytest.raises(ValueError):
        hom_gate("AND", [tlwe_encrypt(1, sk)], bk)
    with pytest.raises(ValueError):
        hom_gate("FOO", [tlwe_encrypt(1, sk), tlwe_encrypt(1, sk)], bk)


def test_half_adder(det_keys):
    sk, bk = det_keys
    r = NoiseSampler(7, TEST_DET)
    for a, b in itertools.product((0, 1), repeat=2):
        A, B = tlwe_encrypt(a, sk, r), tlwe_encrypt(b, sk, r)
        s = tlwe_decrypt(hom_gate("XOR", [A, B], bk), sk)
        c = tlwe_decrypt(hom_gate("AND", [A, B], bk), sk)
        assert (s, c) == (a ^ b, a & b)


def test_bootstrap_extract_keyswitch(det_keys):
    sk, bk = det_keys
    r = NoiseSampler(8, TEST_DET)
    m = r.bits(64)
    ct = tlwe_encrypt(m, sk, r)
    with measure() as c:
        out = gate_bootstrap(ct, bk)
    assert c["bootstrap"] == 64
    assert (tlwe_decrypt(out, sk) == m).all()
    rl = trlwe_encrypt(r.bits(TEST_DET.N1), sk, r)
    ex = sample_extract(rl, 3)
    assert tlwe_decrypt(ex, sk) == trlwe_decrypt(rl, sk)[3]
    assert tlwe_decrypt(identity_key_switch(ex, bk), sk) == trlwe_decrypt(rl, sk)[3]


def test_circuit_bootstrap_selects(det_keys):
    sk, bk = det_keys
    r = NoiseSampler(9, TEST_DET)
    m1, m0 = r.bits(TEST_DET.N1), r.bits(TEST_DET.N1)
    c1, c0 = trlwe_encrypt(m1, sk, r), trlwe_encrypt(m0, sk, r)
    sels = circuit_bootstrap(tlwe_encrypt([0, 1], sk, r), bk)
    assert (trlwe_decrypt(cmux(sels[0], c1, c0), sk) == m0).all()
    assert (trlwe_decrypt(cmux(sels[1], c1, c0), sk) == m1).all()


def test_counters_reset():
    OPS.add("x", 3)
    assert OPS["x"] >= 3
    with measure() as c:
        OPS.add("x", 2)
    assert c["x"] == 2 and c["missing"] == 0


def test_gate_noise_bounds_at_tfhe80(keys80):
    """Output noise of a bootstrapped gate: independent of the input noise.

    A bootstrap cannot bring noise below the identity key switch's own
    contribution, so the invariant compares a bootstrap of a noisy input
    against a bootstrap of a fresh one, and both against the decryption
    margin mu = 1/8.
    """
    sk, bk = keys80
    r = NoiseSampler(10, TFHE_80, unsafe=True)
    fresh = tlwe_encrypt(np.ones(200, np.uint8), sk, r)
    noisy = tlwe_encrypt(np.ones(200, np.uint8), sk, NoiseSampler(11, TFHE_80, unsafe=True, sigma=0.02))
    sd = []
    for ct in (fresh, noisy):
        out = gate_bootstrap(ct, bk)
        err = torus_to_real(tlwe_phase(out, sk)) - 0.125
        assert (tlwe_decrypt(out, sk) == 1).all()
        sd.append(err.std())
    assert sd[1] <= 2 * sd[0]
    assert 8 * sd[0] < 0.125
