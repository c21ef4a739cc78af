"""Request and result packets exchanged between the client and the evaluator.

Both are HVP1 containers (magic, object tag, parameter-set name) whose
first section is the packet format version.  Request sections::

    0 u16[1]   version
    1 u8[]     processor variant (UTF-8)
    2 u8[]     provider: secret | trivial | plain
    3 u64[1]   cycle budget
    4          ROM payload: u32 (T, 2, N) TRLWE tables, or u8 (512,) plain image
    5 u32[2]   ROM geometry (bytes, N)
    6          RAM payload: u32 (w, 2^v, 2, N) cells, or u8 (512,) plain image
    7 u32[2]   RAM geometry (v, w)
    8 u8[]     initial DFF names, newline separated
    9          initial DFF rows (k, *row)

Gate-memory variants carry their ROM/RAM inside the DFF rows and leave
sections 4 and 6 empty.  Result sections::

    0 u16[1]   version
    1 u8[]     processor variant
    2 u64[1]   cycles executed (total since reset)
    3          termination flag row (1, *row)
    4          registers x1..x15 (15, 16, *row), bit 0 first
    5          RAM: u32 cells (w, 2^v, 2, N), or rows (256, 16, *row)
    6 u32[2]   RAM geometry (v, w)
    7 u8[]     snapshot reference (path, may be empty)
    8 u8[1]    backend: 0 plain, 1 tfhe

Rows are TLWE level-0 ciphertexts (u32, n+1) on the TFHE backend and
single plain bits (u8, 1) on the plain backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..memory.geometry import MemoryGeometry
from ..memory.ram import EncryptedRam
from ..memory.rom import EncryptedRom, RomGeometry
from ..tfhe import serialize
from ..tfhe.serialize import FormatError

VERSION = 1
PROVIDERS = ("secret", "trivial", "plain")


class PacketError(FormatError):
    pass


def _s(text: str) -> np.ndarray:
    return np.frombuffer(text.encode(), dtype=np.uint8)


def _text(arr) -> str:
    return np.asarray(arr, dtype=np.uint8).tobytes().decode()


def _empty() -> np.ndarray:
    return np.zeros(0, dtype=np.uint8)


def _check_version(sections, what: str) -> None:
    if not sections or sections[0].size != 1:
        raise PacketError(f"{what} packet has no version field")
    v = int(sections[0][0])
    if v != VERSION:
        raise PacketError(f"unsupported {what} packet version {v} (expected {VERSION})")


@dataclass(eq=False)
class RequestPacket:
    params_name: str
    variant: str
    provider: str
    cycles: int
    rom: object = None  # EncryptedRom | bytes | None
    ram: object = None  # EncryptedRam | bytes | None
    dff_init: dict = field(default_factory=dict)  # name -> row
    version: int = VERSION

    def __post_init__(self) -> None:
        from ..cpu.netlist import MEMORIES, VARIANTS, parse_variant

        base, memory = parse_variant(self.variant)
        if base not in VARIANTS or memory not in MEMORIES:
            raise PacketError(f"unknown processor variant {self.variant!r}")
        if self.provider not in PROVIDERS:
            raise PacketError(f"unknown provider {self.provider!r}")
        if int(self.cycles) < 1:
            raise PacketError("cycle budget must be at least 1")
        if memory == "cmux" and (self.rom is None or self.ram is None):
            raise PacketError(f"variant {self.variant!r} needs ROM and RAM payloads")
        plain = self.provider == "plain"
        for what, obj, kind in (("ROM", self.rom, EncryptedRom), ("RAM", self.ram, EncryptedRam)):
            if obj is None:
                continue
            if plain and not isinstance(obj, (bytes, bytearray)):
                raise PacketError(f"plain requests carry a raw {what} image")
            if not plain and not isinstance(obj, kind):
                raise PacketError(f"{self.provider} requests carry an encrypted {what}")
            if isinstance(obj, (EncryptedRom, EncryptedRam)) and obj.params_name != self.params_name:
                raise PacketError(f"{what} uses parameter set {obj.params_name!r}, packet says {self.params_name!r}")
        if isinstance(self.ram, EncryptedRam):
            from ..cpu.netlist import RAM_GEOMETRY

            if self.ram.geometry != RAM_GEOMETRY:
                raise PacketError(f"RAM geometry {self.ram.geometry} does not match the processor")

    @property
    def memory(self) -> str:
        from ..cpu.netlist import parse_variant

        return parse_variant(self.variant)[1]


def _payload(obj):
    if obj is None:
        return _empty(), np.zeros(2, np.uint32)
    if isinstance(obj, EncryptedRom):
        return obj.luts, np.array([obj.geometry.size_bytes, obj.geometry.N], np.uint32)
    if isinstance(obj, EncryptedRam):
        return obj.cells, np.array([obj.geometry.v, obj.geometry.w], np.uint32)
    return np.frombuffer(bytes(obj), np.uint8), np.zeros(2, np.uint32)


def encode_request(p: RequestPacket) -> bytes:
    rom, romg = _payload(p.rom)
    ram, ramg = _payload(p.ram)
    names = list(p.dff_init)
    rows = np.stack([np.asarray(p.dff_init[n]) for n in names]) if names else _empty()
    sections = [
        np.array([p.version], np.uint16),
        _s(p.variant),
        _s(p.provider),
        np.array([p.cycles], np.uint64),
        rom,
        romg,
        ram,
        ramg,
        _s("\n".join(names)),
        rows,
    ]
    return serialize.encode("request", p.params_name, sections)


def decode_request(blob: bytes) -> RequestPacket:
    _, name, s = serialize.decode(blob, expect="request")
    _check_version(s, "request")
    if len(s) != 10:
        raise PacketError(f"request packet has {len(s)} sections, expected 10")
    provider = _text(s[2])
    rom = ram = None
    try:
        if s[4].size:
            if provider == "plain":
                rom = s[4].tobytes()
            else:
                rom = EncryptedRom(s[4], RomGeometry(int(s[5][0]), int(s[5][1])), name)
        if s[6].size:
            if provider == "plain":
                ram = s[6].tobytes()
            else:
                ram = EncryptedRam(s[6], MemoryGeometry(int(s[7][0]), int(s[7][1])), name)
    except ValueError as exc:
        raise PacketError(f"malformed request payload: {exc}") from None
    text = _text(s[8])
    names = text.split("\n") if text else []
    if len(names) != (s[9].shape[0] if s[9].ndim > 1 else 0):
        raise PacketError("DFF name list does not match the DFF rows")
    dff = {n: np.array(s[9][i]) for i, n in enumerate(names)}
    return RequestPacket(name, _text(s[1]), provider, int(s[3][0]), rom, ram, dff, int(s[0][0]))


@dataclass(eq=False)
class ResultPacket:
    params_name: str
    variant: str
    cycles: int
    flag: np.ndarray  # (1, *row)
    registers: np.ndarray  # (15, 16, *row)
    ram: object  # EncryptedRam or rows (256, 16, *row)
    backend: str = "tfhe"
    snapshot: str = ""
    version: int = VERSION

    def __post_init__(self) -> None:
        if self.flag is None or np.asarray(self.flag).shape[:1] != (1,):
            raise PacketError("every result must carry the termination flag")


def encode_result(r: ResultPacket) -> bytes:
    if isinstance(r.ram, EncryptedRam):
        ram, ramg = r.ram.cells, np.array([r.ram.geometry.v, r.ram.geometry.w], np.uint32)
    else:
        ram, ramg = np.asarray(r.ram), np.zeros(2, np.uint32)
    sections = [
        np.array([r.version], np.uint16),
        _s(r.variant),
        np.array([r.cycles], np.uint64),
        np.asarray(r.flag),
        np.asarray(r.registers),
        ram,
        ramg,
        _s(r.snapshot),
        np.array([0 if r.backend == "plain" else 1], np.uint8),
    ]
    return serialize.encode("result", r.params_name, sections)


def decode_result(blob: bytes) -> ResultPacket:
    _, name, s = serialize.decode(blob, expect="result")
    _check_version(s, "result")
    if len(s) != 9:
        raise PacketError(f"result packet has {len(s)} sections, expected 9")
    backend = "plain" if int(s[8][0]) == 0 else "tfhe"
    ram = np.array(s[5])
    if backend == "tfhe" and ram.ndim == 4:
        ram = EncryptedRam(ram, MemoryGeometry(int(s[6][0]), int(s[6][1])), name)
    return ResultPacket(name, _text(s[1]), int(s[2][0]), np.array(s[3]), np.array(s[4]), ram, backend, _text(s[7]), int(s[0][0]))


parse_result_packet = decode_result
