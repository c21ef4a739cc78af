"""Value backends for the netlist engine.

A backend fixes how one net value is stored (a row of the value table) and
evaluates groups of same-kind gates in one call:

``PlainBackend``
    uint8 bits with ``lanes`` independent SIMD lanes per net.
``TfheBackend``
    one level-0 TLWE (n+1 uint32 words) per net.  All bootstrapped gates of
    a task are fused into a single batched bootstrap.
"""

from __future__ import annotations

import numpy as np

from ..memory.geometry import MemoryGeometry
from ..memory.ram import EncryptedRam, RamAddress, address_to_trgsw, ram_control_unit, ram_read_unit, ram_write_unit, read_to_tlwe
from ..memory.rom import EncryptedRom, rom_read
from ..tfhe.ciphertext import BootstrappingKey, TlweCiphertext
from ..tfhe.crypto import encode_bits
from ..tfhe.ops import (
    MU32,
    bootstrap_to_trlwe_raw,
    gate_linear_raw,
    hom_not_raw,
    identity_key_switch_raw,
    mux_halves_raw,
    sample_extract_raw,
)


class PlainBackend:
    name = "plain"
    params_name = ""

    def __init__(self, lanes: int = 1) -> None:
        self.lanes = lanes

    @property
    def row_shape(self) -> tuple[int, ...]:
        return (self.lanes,)

    dtype = np.uint8

    def constant(self, bit: int) -> np.ndarray:
        return np.full(self.row_shape, bit, dtype=np.uint8)

    def encode(self, bits) -> np.ndarray:
        """Plain bits (k,) or (k, lanes) -> rows."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim == 1:
            bits = np.repeat(bits[:, None], self.lanes, axis=1)
        return bits

    def eval_gates(self, groups):
        out = []
        for kind, ins in groups:
            if kind == "NOT":
                y = 1 - ins[0]
            elif kind == "MUX":
                a, b, s = ins
                y = np.where(s.astype(bool), b, a)
            else:
                a, b = ins
                y = {
                    "AND": lambda: a & b,
                    "NAND": lambda: 1 - (a & b),
                    "OR": lambda: a | b,
                    "NOR": lambda: 1 - (a | b),
                    "XOR": lambda: a ^ b,
                    "XNOR": lambda: 1 - (a ^ b),
                    "ANDNOT": lambda: a & (1 - b),
                    "ORNOT": lambda: a | (1 - b),
                }[kind]()
            out.append(y.astype(np.uint8))
        return out

    # memories: ROM state (blocks, 32, lanes) bits; RAM state (w, 2^v, lanes) bit planes

    @staticmethod
    def _addr(rows: np.ndarray) -> np.ndarray:
        return (rows.astype(np.int64) << np.arange(rows.shape[0])[:, None]).sum(axis=0)

    def eval_rom(self, state: np.ndarray, addr: np.ndarray) -> np.ndarray:
        a = self._addr(addr) % state.shape[0]
        lanes = np.arange(state.shape[2])
        return state[a, :, lanes].T.copy()

    def eval_ram(self, state: np.ndarray, addr, wdata, wflag):
        a = self._addr(addr)
        lanes = np.arange(state.shape[2])
        rdata = state[:, a, lanes].copy()  # (w, lanes)
        new = state.copy()
        wf = wflag.astype(bool)
        new[:, a[wf], lanes[wf]] = wdata[:, wf]
        return rdata, new

    def rom_state(self, image: bytes, addr_bits: int) -> np.ndarray:
        bits = np.unpackbits(np.frombuffer(bytes(image), np.uint8), bitorder="little")
        blocks = np.zeros((1 << addr_bits) * 32, dtype=np.uint8)
        blocks[: bits.size] = bits[: blocks.size]
        return np.repeat(blocks.reshape(-1, 32)[:, :, None], self.lanes, axis=2)

    def ram_state(self, image: bytes, geometry: MemoryGeometry) -> np.ndarray:
        from ..memory.ram import image_to_bits

        return np.repeat(image_to_bits(image, geometry)[:, :, None], self.lanes, axis=2)

    def decode(self, rows: np.ndarray) -> np.ndarray:
        return np.asarray(rows)


class TfheBackend:
    name = "tfhe"
    dtype = np.uint32

    def __init__(self, bkey: BootstrappingKey) -> None:
        self.bkey = bkey
        self.params = bkey.params
        self.params_name = bkey.params.name

    @property
    def row_shape(self) -> tuple[int, ...]:
        return (self.params.n + 1,)

    def constant(self, bit: int) -> np.ndarray:
        row = np.zeros(self.row_shape, dtype=np.uint32)
        row[-1] = encode_bits(bit, 0)
        return row

    def encode(self, bits) -> np.ndarray:
        """Plain bits become trivial ciphertexts; (k, n+1) arrays pass through."""
        arr = np.asarray(bits)
        if arr.ndim == 2 and arr.shape[1] == self.params.n + 1 and arr.dtype == np.uint32:
            return arr
        arr = arr.astype(np.uint8).reshape(-1)
        rows = np.zeros((arr.size,) + self.row_shape, dtype=np.uint32)
        rows[:, -1] = encode_bits(arr, 0)
        return rows

    def eval_gates(self, groups):
        bk = self.bkey
        out: list = [None] * len(groups)
        boot, spans = [], []
        for gi, (kind, ins) in enumerate(groups):
            if kind == "NOT":
                out[gi] = hom_not_raw(ins[0])
                continue
            if kind == "MUX":
                a, b, s = ins
                halves = mux_halves_raw(s, b, a)  # Y = S ? B : A
                boot.append(halves.reshape(-1, halves.shape[-1]))
            else:
                boot.append(gate_linear_raw(kind, list(ins)))
            spans.append((gi, kind, boot[-1].shape[0]))
        if not boot:
            return out
        acc = bootstrap_to_trlwe_raw(np.concatenate(boot), bk)
        ext = sample_extract_raw(acc, 0)
        lv1, pos, keep = [], 0, []
        for gi, kind, rows in spans:
            part = ext[pos : pos + rows]
            pos += rows
            if kind == "MUX":
                half = rows // 2
                part = part[:half] + part[half:]
                part[:, -1] += np.uint32(MU32)
            lv1.append(part)
            keep.append((gi, part.shape[0]))
        lv0 = identity_key_switch_raw(np.concatenate(lv1), bk)
        pos = 0
        for gi, rows in keep:
            out[gi] = lv0[pos : pos + rows]
            pos += rows
        return out

    def eval_rom(self, state: EncryptedRom, addr: np.ndarray) -> np.ndarray:
        sel = address_to_trgsw(TlweCiphertext(addr, 0, self.params_name), self.bkey)
        return rom_read(state, sel, self.bkey).data.copy()

    def eval_ram(self, state: EncryptedRam, addr, wdata, wflag):
        bk = self.bkey
        sel: RamAddress = address_to_trgsw(TlweCiphertext(addr, 0, self.params_name), bk)
        read_out = ram_read_unit(state, sel)
        read_tlwe = read_to_tlwe(read_out, bk)
        controlled = ram_control_unit(
            read_out, TlweCiphertext(wflag, 0, self.params_name), TlweCiphertext(wdata, 0, self.params_name), bk, read_tlwe
        )
        return read_tlwe.data.copy(), ram_write_unit(state, sel, controlled, bk)


def make_backend(name: str, bkey: BootstrappingKey | None = None, lanes: int = 1):
    if name == "plain":
        return PlainBackend(lanes)
    if name == "tfhe":
        if bkey is None:
            raise ValueError("the tfhe backend needs a bootstrapping key")
        return TfheBackend(bkey)
    raise ValueError(f"unknown backend {name!r}")
