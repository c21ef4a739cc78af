"""CMUX-based single-port RAM: read unit, control unit and write bars.

Cell (j, A) holds bit j of word A as a level-1 TRLWE with the bit at
coefficient 0, so block j is the j-th bit plane.  Address bits are LSB
first and the LSB selects at the leaf layer of every CMUX tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tfhe.ciphertext import BootstrappingKey, SecretKey, TlweCiphertext, TrgswCiphertext, TrlweCiphertext
from ..tfhe.crypto import _rlwe_encrypt_words, decode_phase, encode_bits
from ..tfhe.ops import (
    bootstrap_to_trlwe_raw,
    circuit_bootstrap_raw,
    cmux_raw,
    hom_mux_no_seiks_raw,
    identity_key_switch_raw,
    sample_extract_raw,
    trgsw_complement,
)
from ..tfhe.params import ParameterSet, get_params
from ..tfhe.sampler import NoiseSampler
from .geometry import MemoryGeometry


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EncryptedRam:
    cells: np.ndarray  # (w, 2^v, 2, N1) uint32
    geometry: MemoryGeometry
    params_name: str

    def __post_init__(self) -> None:
        cells = np.ascontiguousarray(self.cells, dtype=np.uint32).view()
        cells.flags.writeable = False
        g = self.geometry
        if cells.shape[:3] != (g.w, g.words, 2):
            raise GeometryError(f"RAM cells {cells.shape} do not match geometry v={g.v}, w={g.w}")
        object.__setattr__(self, "cells", cells)

    @property
    def params(self) -> ParameterSet:
        return get_params(self.params_name)


@dataclass(frozen=True)
class RamAddress:
    """v TRGSW selectors, LSB first."""

    bits: tuple[TrgswCiphertext, ...]

    @property
    def v(self) -> int:
        return len(self.bits)


def _as_rows(ct) -> np.ndarray:
    if isinstance(ct, TlweCiphertext):
        return ct.data.reshape(-1, ct.data.shape[-1])
    return np.stack([c.data for c in ct])


def address_to_trgsw(addr, bkey: BootstrappingKey) -> RamAddress:
    """Circuit-bootstrap v level-0 address bits into TRGSW selectors."""
    rows = _as_rows(addr)
    p = bkey.params
    out = circuit_bootstrap_raw(rows, bkey)
    return RamAddress(tuple(TrgswCiphertext(r, 1, p.name, p.cb_Bgbit) for r in out))


def _check(ram: EncryptedRam, addr: RamAddress) -> None:
    if addr.v != ram.geometry.v:
        raise GeometryError(f"address has {addr.v} bits, RAM expects {ram.geometry.v}")


def cmux_tree_raw(leaves: np.ndarray, sels) -> np.ndarray:
    """Select along axis 1 of (B, 2^k, 2, N) with k selectors, LSB at the leaves."""
    layer = leaves
    for sel in sels:
        layer = cmux_raw(sel, layer[:, 1::2], layer[:, 0::2])
    return layer[:, 0]


def ram_read_unit(ram: EncryptedRam, addr: RamAddress) -> TrlweCiphertext:
    """w parallel CMUX trees; result j carries bit j of the addressed word."""
    _check(ram, addr)
    return TrlweCiphertext(cmux_tree_raw(ram.cells, addr.bits), 1, ram.params_name)


def read_to_tlwe(read_out: TrlweCiphertext, bkey: BootstrappingKey) -> TlweCiphertext:
    """SE at coefficient 0 followed by IKS for each of the w read bits."""
    lv1 = sample_extract_raw(read_out.data, 0)
    return TlweCiphertext(identity_key_switch_raw(lv1, bkey), 0, read_out.params_name)


def ram_control_unit(read_out: TrlweCiphertext, wflag: TlweCiphertext, wdata: TlweCiphertext, bkey: BootstrappingKey, read_tlwe: TlweCiphertext | None = None) -> TrlweCiphertext:
    """wflag ? wdata : read word, as w TRLWEs (HomMUX without SE/IKS)."""
    if read_tlwe is None:
        read_tlwe = read_to_tlwe(read_out, bkey)
    w = read_tlwe.data.shape[0]
    flag = np.broadcast_to(wflag.data.reshape(-1)[None, :], (w, wflag.data.shape[-1]))
    data = wdata.data.reshape(w, -1)
    out = hom_mux_no_seiks_raw(flag, data, read_tlwe.data, bkey)
    return TrlweCiphertext(out, 1, read_out.params_name)


def ram_write_unit(ram: EncryptedRam, addr: RamAddress, controlled: TrlweCiphertext, bkey: BootstrappingKey) -> EncryptedRam:
    """w * 2^v write bars, then a bootstrap of every cell.

    Bar (j, A) runs c <- CMUX(match_i(A), c, old) over the address bits,
    starting from controlled[j]; match_i is the selector itself when bit i
    of A is 1 and H - selector when it is 0.
    """
    _check(ram, addr)
    g = ram.geometry
    old = ram.cells
    if controlled.data.shape[0] != g.w:
        raise GeometryError(f"controlled data has {controlled.data.shape[0]} bits, RAM word is {g.w}")
    c = np.repeat(controlled.data[:, None], g.words, axis=1)
    A = np.arange(g.words)
    for i, sel in enumerate(addr.bits):
        one = (A >> i) & 1 == 1
        c[:, one] = cmux_raw(sel, c[:, one], old[:, one])
        c[:, ~one] = cmux_raw(trgsw_complement(sel), c[:, ~one], old[:, ~one])
    flat = c.reshape(-1, 2, c.shape[-1])
    lv0 = identity_key_switch_raw(sample_extract_raw(flat, 0), bkey)
    fresh = bootstrap_to_trlwe_raw(lv0, bkey).reshape(old.shape)
    return EncryptedRam(fresh, g, ram.params_name)


def ram_cycle(ram: EncryptedRam, addr_tlwe, wflag: TlweCiphertext, wdata: TlweCiphertext, bkey: BootstrappingKey):
    """One read-before-write cycle.  Returns (read word as w level-0 TLWEs, new RAM)."""
    addr = address_to_trgsw(addr_tlwe, bkey)
    read_out = ram_read_unit(ram, addr)
    read_tlwe = read_to_tlwe(read_out, bkey)
    controlled = ram_control_unit(read_out, wflag, wdata, bkey, read_tlwe)
    return read_tlwe, ram_write_unit(ram, addr, controlled, bkey)


# -- encryption -------------------------------------------------------------


def image_to_bits(image: bytes, geometry: MemoryGeometry) -> np.ndarray:
    """Little-endian words -> (w, 2^v) bit planes."""
    if len(image) != geometry.image_bytes:
        raise GeometryError(f"RAM image must be {geometry.image_bytes} bytes, got {len(image)}")
    bits = np.unpackbits(np.frombuffer(bytes(image), np.uint8), bitorder="little")
    return bits[: geometry.capacity_bits].reshape(geometry.words, geometry.w).T.copy()


def bits_to_image(planes: np.ndarray, geometry: MemoryGeometry) -> bytes:
    flat = np.asarray(planes, dtype=np.uint8).T.reshape(-1)
    return np.packbits(flat, bitorder="little").tobytes()


def _cell_phase(planes: np.ndarray, N: int) -> np.ndarray:
    m = np.zeros(planes.shape + (N,), dtype=np.uint8)
    m[..., 0] = planes
    return encode_bits(m, 1)


def encrypt_ram(image: bytes, sk: SecretKey | None, geometry: MemoryGeometry = MemoryGeometry(), params: ParameterSet | None = None, sampler: NoiseSampler | None = None) -> EncryptedRam:
    """Encrypt a RAM image; ``sk=None`` builds trivial ciphertexts (needs ``params``)."""
    params = sk.params if sk is not None else params
    if params is None:
        raise ValueError("trivial RAM needs a parameter set")
    phase = _cell_phase(image_to_bits(image, geometry), params.N1)
    if sk is None:
        cells = np.zeros(phase.shape[:-1] + (2, params.N1), dtype=np.uint32)
        cells[..., 1, :] = phase
    else:
        cells = _rlwe_encrypt_words(phase, sk.lv1, 1, params, sampler if sampler is not None else NoiseSampler())
    return EncryptedRam(cells, geometry, params.name)


def decrypt_ram_bits(ram: EncryptedRam, sk: SecretKey) -> np.ndarray:
    ext = sample_extract_raw(ram.cells, 0)
    dot = (ext[..., :-1].astype(np.uint64) * sk.lv1.astype(np.uint64)).sum(axis=-1, dtype=np.uint64)
    return decode_phase((ext[..., -1] - dot.astype(np.uint32)).astype(np.uint32))


def decrypt_ram(ram: EncryptedRam, sk: SecretKey) -> bytes:
    return bits_to_image(decrypt_ram_bits(ram, sk), ram.geometry)


def words_of(image: bytes, geometry: MemoryGeometry) -> np.ndarray:
    planes = image_to_bits(image, geometry)
    return (planes.astype(np.int64) << np.arange(geometry.w)[:, None]).sum(axis=0)
