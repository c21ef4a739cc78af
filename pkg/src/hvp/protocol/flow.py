"""Client and evaluator sides of the offloading protocol.

Client (holds the secret key): :func:`make_request_packet`,
:func:`decrypt_result`.  Evaluator (holds only public material):
:func:`evaluate`, :func:`resume_flow`.  The evaluator functions take a
bootstrapping key and never see a secret key.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cpu.isa import RAM_WORDS, RESULT_REG, ROM_BYTES
from ..cpu.machine import Machine, gate_memory_init
from ..cpu.netlist import RAM_GEOMETRY, parse_variant
from ..memory.ram import EncryptedRam, decrypt_ram, encrypt_ram
from ..memory.rom import encrypt_rom
from ..netlist.backends import PlainBackend, TfheBackend
from ..netlist.engine import EngineState
from ..netlist.schema import Netlist
from ..netlist.snapshot import snapshot_load, snapshot_save
from ..tfhe.ciphertext import BootstrappingKey, SecretKey, TlweCiphertext
from ..tfhe.crypto import tlwe_decrypt, tlwe_encrypt, tlwe_trivial
from ..tfhe.params import ParameterSet
from ..tfhe.sampler import NoiseSampler
from .packets import PacketError, RequestPacket, ResultPacket


class ProtocolError(ValueError):
    pass


def _pad(image: bytes, size: int) -> bytes:
    image = bytes(image or b"")
    if len(image) > size:
        raise ProtocolError(f"image of {len(image)} bytes exceeds {size}")
    return image + bytes(size - len(image))


# -- client ------------------------------------------------------------------


def make_request_packet(
    rom_image: bytes,
    ram_image: bytes | None,
    cycles: int,
    variant: str = "ruby5",
    provider: str = "secret",
    sk: SecretKey | None = None,
    params: ParameterSet | None = None,
    sampler: NoiseSampler | None = None,
) -> RequestPacket:
    """Encrypt (or trivially encode) a program and its input for evaluation.

    ``secret`` needs the secret key; ``trivial`` needs only the parameter
    set and produces keyless ciphertexts; ``plain`` ships the raw images for
    the plaintext backend.
    """
    rom = _pad(rom_image, ROM_BYTES)
    ram = _pad(ram_image, 2 * RAM_WORDS)
    _, memory = parse_variant(variant)
    if provider == "secret":
        if sk is None:
            raise ProtocolError("the secret provider needs a secret key")
        params = sk.params
    elif provider == "trivial":
        if params is None:
            raise ProtocolError("the trivial provider needs a parameter set")
    elif provider == "plain":
        pname = ""
        if memory == "gate":
            return RequestPacket(pname, variant, provider, cycles, None, None, {k: np.array([v], np.uint8) for k, v in gate_memory_init(rom, ram).items()})
        return RequestPacket(pname, variant, provider, cycles, rom, ram)
    else:
        raise PacketError(f"unknown provider {provider!r}")
    sampler = sampler if sampler is not None else NoiseSampler()
    key = sk if provider == "secret" else None
    if memory == "gate":
        init = gate_memory_init(rom, ram)
        bits = np.fromiter(init.values(), dtype=np.uint8, count=len(init))
        rows = tlwe_encrypt(bits, sk, sampler).data if key is not None else tlwe_trivial(bits, params).data
        return RequestPacket(params.name, variant, provider, cycles, None, None, dict(zip(init, rows)))
    erom = encrypt_rom(rom, key, params, sampler)
    eram = encrypt_ram(ram, key, RAM_GEOMETRY, params, sampler)
    return RequestPacket(params.name, variant, provider, cycles, erom, eram)


@dataclass
class Report:
    cycles: int
    flag: int
    registers: list
    ram: bytes

    @property
    def result(self) -> int:
        return self.registers[RESULT_REG]

    def suggested_budget(self) -> int | None:
        """Advisory next budget when the program has not finished."""
        return None if self.flag else suggest_budget(self.cycles)


def suggest_budget(cycles: int) -> int:
    return max(1, 2 * int(cycles))


def _bits_to_words(bits: np.ndarray) -> list[int]:
    bits = np.asarray(bits, dtype=np.int64)
    return [int(v) for v in (bits << np.arange(bits.shape[-1])).sum(axis=-1)]


def decrypt_result(result: ResultPacket, sk: SecretKey | None = None) -> Report:
    """Decrypt a result.  CPA-only: a wrong key yields noise, not an error."""
    if result.backend == "plain":
        dec = lambda rows: np.asarray(rows)[..., 0]  # noqa: E731
    else:
        if sk is None:
            raise ProtocolError("decrypting an encrypted result needs the secret key")
        if sk.params.name != result.params_name:
            raise ProtocolError(f"key is for {sk.params.name!r}, result uses {result.params_name!r}")
        dec = lambda rows: np.asarray(tlwe_decrypt(TlweCiphertext(np.asarray(rows), 0, result.params_name), sk))  # noqa: E731
    flag = int(dec(result.flag).reshape(-1)[0])
    regs = [0] + _bits_to_words(dec(result.registers))
    if isinstance(result.ram, EncryptedRam):
        ram = decrypt_ram(result.ram, sk)
    else:
        words = _bits_to_words(dec(result.ram))
        ram = b"".join(w.to_bytes(2, "little") for w in words)
    return Report(result.cycles, flag, regs, ram)


# -- evaluator -----------------------------------------------------------------


def _backend(provider_or_backend: str, params_name: str, bkey: BootstrappingKey | None):
    if provider_or_backend == "plain":
        return PlainBackend()
    if bkey is None:
        raise ProtocolError("encrypted evaluation needs a bootstrapping key")
    if not isinstance(bkey, BootstrappingKey):
        raise ProtocolError("the evaluator accepts only a bootstrapping key")
    if bkey.params.name != params_name:
        raise ProtocolError(f"bootstrapping key is for {bkey.params.name!r}, request uses {params_name!r}")
    return TfheBackend(bkey)


def _result(m: Machine, state: EngineState, snapshot_ref: str) -> ResultPacket:
    if m.memory == "gate":
        ram = m.ram_rows(state)
    else:
        ram = state.memories[m.memory_id("ram")]
        if isinstance(m.backend, PlainBackend):
            ram = np.ascontiguousarray(np.moveaxis(ram, 0, 1))  # (words, 16, lanes)
    return ResultPacket(
        m.backend.params_name if not isinstance(m.backend, PlainBackend) else "",
        m.name,
        state.cycle,
        m.flag_rows(state),
        m.register_rows(state),
        ram,
        m.backend.name,
        snapshot_ref,
    )


def evaluate(request: RequestPacket, bkey: BootstrappingKey | None = None, workers: int = 1, snapshot_ref: str = "", on_cycle=None) -> tuple[ResultPacket, bytes]:
    """Run a request for its cycle budget; returns the result and a snapshot."""
    backend = _backend(request.provider, request.params_name, bkey)
    m = Machine(request.variant, backend, workers)
    try:
        state = m.load(request.rom, request.ram, dff_init=request.dff_init)
        res = m.run(state, request.cycles, on_cycle)
        return _result(m, res.state, snapshot_ref), snapshot_save(res.state, m.netlist)
    finally:
        m.close()


def resume_flow(snapshot: bytes, extra_cycles: int, bkey: BootstrappingKey | None = None, workers: int = 1, snapshot_ref: str = "", on_cycle=None) -> tuple[ResultPacket, bytes]:
    """Continue a snapshot for ``extra_cycles`` more cycles (0 is allowed)."""
    if extra_cycles < 0:
        raise ProtocolError("extra cycles must be non-negative")
    state, netlist = snapshot_load(snapshot)
    backend = _backend(state.backend, state.params_name, bkey)
    m = Machine(netlist.name, backend, workers, netlist=_checked(netlist))
    try:
        res = m.run(state, extra_cycles, on_cycle)
        return _result(m, res.state, snapshot_ref), snapshot_save(res.state, m.netlist)
    finally:
        m.close()


def _checked(netlist: Netlist) -> Netlist:
    base, memory = parse_variant(netlist.name)
    from ..cpu.netlist import MEMORIES, VARIANTS

    if base not in VARIANTS or memory not in MEMORIES:
        raise ProtocolError(f"snapshot netlist {netlist.name!r} is not a known processor")
    return netlist
