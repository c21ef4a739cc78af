"""Resumable evaluation state.

File layout: magic b"HVPS", u16 version, then one HVP1 container (tag
``snapshot``) with sections:

    0  u64[1]   cycle counter
    1  u8[]     backend name (UTF-8)
    2  u8[]     netlist JSON (UTF-8), so a snapshot is self-contained
    3  DFF table (num_dff, *row_shape)
    4  u32[m,4] memory directory: cell id, kind (0 ROM, 1 RAM), geometry a, b
    5+ one section per memory, in directory order

ROM geometry is (size in bytes, N); RAM geometry is (v, w).  The parameter
set name lives in the container header ("" for the plain backend).
"""

from __future__ import annotations

import struct

import numpy as np

from ..memory.geometry import MemoryGeometry
from ..memory.ram import EncryptedRam
from ..memory.rom import EncryptedRom, RomGeometry
from ..tfhe import serialize
from .engine import EngineState
from .schema import Netlist, parse_netlist, to_json

SNAP_MAGIC = b"HVPS"
VERSION = 1

serialize.TAGS.setdefault("snapshot", 64)
serialize.TAG_NAMES[serialize.TAGS["snapshot"]] = "snapshot"


class SnapshotError(ValueError):
    pass


def _bytes(s: str) -> np.ndarray:
    return np.frombuffer(s.encode(), dtype=np.uint8)


def snapshot_save(state: EngineState, netlist: Netlist) -> bytes:
    directory, payloads = [], []
    for cid in sorted(state.memories):
        mem = state.memories[cid]
        if isinstance(mem, EncryptedRom):
            directory.append((cid, 0, mem.geometry.size_bytes, mem.geometry.N))
            payloads.append(mem.luts)
        elif isinstance(mem, EncryptedRam):
            directory.append((cid, 1, mem.geometry.v, mem.geometry.w))
            payloads.append(mem.cells)
        else:
            arr = np.asarray(mem, dtype=np.uint8)
            directory.append((cid, 2, arr.shape[0], arr.shape[1]))
            payloads.append(arr)
    sections = [
        np.array([state.cycle], dtype=np.uint64),
        _bytes(state.backend),
        _bytes(to_json(netlist)),
        np.asarray(state.dff),
        np.array(directory, dtype=np.uint32).reshape(-1, 4),
        *payloads,
    ]
    body = serialize.encode("snapshot", state.params_name, sections)
    return SNAP_MAGIC + struct.pack("<H", VERSION) + body


def snapshot_load(blob: bytes, expect_params: str | None = None, expect_backend: str | None = None) -> tuple[EngineState, Netlist]:
    if len(blob) < 6 or blob[:4] != SNAP_MAGIC:
        raise SnapshotError("not a snapshot file (bad magic)")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version} (expected {VERSION})")
    try:
        _, params_name, s = serialize.decode(blob[6:], expect="snapshot")
    except serialize.FormatError as exc:
        raise SnapshotError(str(exc)) from None
    if len(s) < 5:
        raise SnapshotError("truncated snapshot")
    backend = s[1].tobytes().decode()
    if expect_params is not None and params_name != expect_params:
        raise SnapshotError(f"snapshot uses parameter set {params_name!r}, expected {expect_params!r}")
    if expect_backend is not None and backend != expect_backend:
        raise SnapshotError(f"snapshot was taken on backend {backend!r}, expected {expect_backend!r}")
    netlist = parse_netlist(s[2].tobytes())
    directory = s[4]
    if len(s) != 5 + len(directory):
        raise SnapshotError("memory directory does not match payload count")
    memories = {}
    for (cid, kind, ga, gb), payload in zip(directory.tolist(), s[5:]):
        if kind == 0:
            memories[cid] = EncryptedRom(payload, RomGeometry(ga, gb), params_name)
        elif kind == 1:
            memories[cid] = EncryptedRam(payload, MemoryGeometry(ga, gb), params_name)
        else:
            memories[cid] = np.array(payload)
    state = EngineState(int(s[0][0]), np.array(s[3]), memories, backend, params_name)
    return state, netlist
