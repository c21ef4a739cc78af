"""Packed CMUX lookup-table ROM.

The image is cut into 32-bit blocks (little-endian).  With N level-1
coefficients a TRLWE holds R = N/32 blocks:

    TRLWE t, coefficient 32*r + k  =  bit k of block t*R + r

A block address splits into low bits (r, log2 R of them) and high bits (t).
The high bits drive a CMUX tree over the TRLWEs; the low bits then rotate the
survivor by X^(-32 * 2^i) under CMUX control, which brings block r to
coefficients 0..31.  Sample extraction at 0..31 plus IKS yields the 32
level-0 output bits.  At N = 1024 and a 512-byte ROM this is 3 + 5 = 8 CMUXes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tfhe.ciphertext import BootstrappingKey, SecretKey, TlweCiphertext
from ..tfhe.crypto import _rlwe_encrypt_words, decode_phase, encode_bits
from ..tfhe.ops import cmux_raw, identity_key_switch_raw, sample_extract_raw
from ..tfhe.params import ParameterSet, get_params
from ..tfhe.poly import mul_small_exact, rotate
from ..tfhe.sampler import NoiseSampler
from .ram import GeometryError, RamAddress, address_to_trgsw

FETCH_BITS = 32


@dataclass(frozen=True)
class RomGeometry:
    size_bytes: int
    N: int

    def __post_init__(self) -> None:
        if self.size_bytes <= 0 or self.size_bytes % 4:
            raise GeometryError("ROM size must be a positive multiple of 4 bytes")
        if self.N < FETCH_BITS:
            raise GeometryError("ring degree too small to hold one 32-bit block")

    @property
    def blocks(self) -> int:
        return self.size_bytes // 4

    @property
    def per_trlwe(self) -> int:
        return self.N // FETCH_BITS

    @property
    def low_bits(self) -> int:
        return min(self.per_trlwe, self.blocks_padded).bit_length() - 1

    @property
    def blocks_padded(self) -> int:
        return 1 << max(0, (self.blocks - 1).bit_length())

    @property
    def addr_bits(self) -> int:
        return (self.blocks_padded).bit_length() - 1

    @property
    def high_bits(self) -> int:
        return self.addr_bits - self.low_bits

    @property
    def trlwes(self) -> int:
        return 1 << self.high_bits

    @property
    def cmux_per_read(self) -> int:
        return (self.trlwes - 1) + self.low_bits


@dataclass(frozen=True, eq=False)
class EncryptedRom:
    luts: np.ndarray  # (T, 2, N1) uint32
    geometry: RomGeometry
    params_name: str

    def __post_init__(self) -> None:
        luts = np.ascontiguousarray(self.luts, dtype=np.uint32).view()
        luts.flags.writeable = False
        g = self.geometry
        if luts.shape != (g.trlwes, 2, g.N):
            raise GeometryError(f"ROM tables {luts.shape} do not match geometry")
        object.__setattr__(self, "luts", luts)

    @property
    def params(self) -> ParameterSet:
        return get_params(self.params_name)


def pack_rom(image: bytes, geometry: RomGeometry) -> np.ndarray:
    """Plain bit layout (T, N) following the table in the module docstring."""
    if len(image) != geometry.size_bytes:
        raise GeometryError(f"ROM image must be {geometry.size_bytes} bytes, got {len(image)}")
    bits = np.unpackbits(np.frombuffer(bytes(image), np.uint8), bitorder="little")
    padded = np.zeros(geometry.blocks_padded * FETCH_BITS, dtype=np.uint8)
    padded[: bits.size] = bits
    R = 1 << geometry.low_bits
    table = np.zeros((geometry.trlwes, geometry.N), dtype=np.uint8)
    table[:, : R * FETCH_BITS] = padded.reshape(geometry.trlwes, R * FETCH_BITS)
    return table


def unpack_rom(table: np.ndarray, geometry: RomGeometry) -> bytes:
    R = 1 << geometry.low_bits
    bits = np.asarray(table)[:, : R * FETCH_BITS].reshape(-1)[: geometry.size_bytes * 8]
    return np.packbits(bits, bitorder="little").tobytes()


def encrypt_rom(image: bytes, sk: SecretKey | None, params: ParameterSet | None = None, sampler: NoiseSampler | None = None) -> EncryptedRom:
    """Encrypt a ROM image; ``sk=None`` makes a trivial (keyless) ROM."""
    params = sk.params if sk is not None else params
    if params is None:
        raise ValueError("trivial ROM needs a parameter set")
    g = RomGeometry(len(image), params.N1)
    phase = encode_bits(pack_rom(image, g), 1)
    if sk is None:
        luts = np.zeros((g.trlwes, 2, g.N), dtype=np.uint32)
        luts[:, 1] = phase
    else:
        luts = _rlwe_encrypt_words(phase, sk.lv1, 1, params, sampler if sampler is not None else NoiseSampler())
    return EncryptedRom(luts, g, params.name)


def decrypt_rom(rom: EncryptedRom, sk: SecretKey) -> bytes:
    phase = rom.luts[:, 1] - mul_small_exact(sk.lv1, rom.luts[:, 0])
    return unpack_rom(decode_phase(phase.astype(np.uint32)), rom.geometry)


def rom_read(rom: EncryptedRom, addr: RamAddress, bkey: BootstrappingKey) -> TlweCiphertext:
    """Fetch the 32-bit block at ``addr`` as 32 level-0 TLWEs (bit k at index k)."""
    g = rom.geometry
    if addr.v != g.addr_bits:
        raise GeometryError(f"ROM address needs {g.addr_bits} bits, got {addr.v}")
    low, high = addr.bits[: g.low_bits], addr.bits[g.low_bits :]
    layer = rom.luts[None]
    for sel in high:
        layer = cmux_raw(sel, layer[:, 1::2], layer[:, 0::2])
    acc = layer[:, 0]
    for i, sel in enumerate(low):
        acc = cmux_raw(sel, rotate(acc, -FETCH_BITS * (1 << i)), acc)
    lv1 = np.stack([sample_extract_raw(acc[0], k) for k in range(FETCH_BITS)])
    return TlweCiphertext(identity_key_switch_raw(lv1, bkey), 0, rom.params_name)


def rom_cycle(rom: EncryptedRom, addr_tlwe, bkey: BootstrappingKey) -> TlweCiphertext:
    """Circuit-bootstrap a level-0 block address, then :func:`rom_read`."""
    return rom_read(rom, address_to_trgsw(addr_tlwe, bkey), bkey)
