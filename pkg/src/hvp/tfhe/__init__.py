"""TFHE primitives over 32/64-bit torus words."""

from .ciphertext import BootstrappingKey, SecretKey, TlweCiphertext, TrgswCiphertext, TrlweCiphertext
from .counters import OPS, measure
from .crypto import (
    gen_bootstrapping_key,
    gen_secret_key,
    tlwe_decrypt,
    tlwe_encrypt,
    tlwe_encrypt_phase,
    tlwe_phase,
    tlwe_trivial,
    trgsw_encrypt,
    trgsw_trivial,
    trlwe_decrypt,
    trlwe_encrypt,
    trlwe_encrypt_phase,
    trlwe_phase,
    trlwe_trivial,
)
from .ops import (
    GATE_ARITY,
    circuit_bootstrap,
    cmux,
    gate_bootstrap,
    hom_gate,
    hom_mux_no_seiks,
    identity_key_switch,
    sample_extract,
    trgsw_complement,
)
from .params import TEST_DET, TFHE_80, ParameterSet, get_params, known_params, register_params
from .sampler import DeterministicModeRefused, NoiseSampler

__all__ = [name for name in dir() if not name.startswith("_")]
