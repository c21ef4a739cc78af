"""Run a processor netlist on a backend: memory setup, reset and readout."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..netlist.backends import PlainBackend
from ..netlist.engine import Engine, EngineState
from ..netlist.schema import Netlist
from .isa import RAM_WORDS, ROM_BYTES
from .netlist import RAM_GEOMETRY, ROM_ADDR_BITS, build_netlist, parse_variant

REG_NAMES = [[f"x{r}[{i}]" for i in range(16)] for r in range(1, 16)]
FLAG = "flag"


@lru_cache(maxsize=None)
def processor(name: str) -> Netlist:
    """Cached netlist for ``ruby5``, ``pearl1`` or their ``-gatemem`` forms."""
    variant, memory = parse_variant(name)
    return build_netlist(variant, memory)


def reset_inputs(cycle: int) -> dict:
    return {"reset": 1 if cycle == 0 else 0}


def _pad(image: bytes, size: int, what: str) -> bytes:
    image = bytes(image)
    if len(image) > size:
        raise ValueError(f"{what} image is {len(image)} bytes; the processor holds {size}")
    return image + bytes(size - len(image))


def rom_bits(image: bytes) -> np.ndarray:
    """(blocks, 32) plain bits of a ROM image."""
    bits = np.unpackbits(np.frombuffer(_pad(image, ROM_BYTES, "ROM"), np.uint8), bitorder="little")
    return bits.reshape(-1, 32)


def ram_bits(image: bytes) -> np.ndarray:
    """(words, 16) plain bits of a RAM image."""
    bits = np.unpackbits(np.frombuffer(_pad(image, 2 * RAM_WORDS, "RAM"), np.uint8), bitorder="little")
    return bits.reshape(-1, 16)


def gate_memory_init(rom: bytes, ram: bytes) -> dict:
    """DFF initial values for the gate-constructed ROM and RAM."""
    out = {}
    for k, row in enumerate(rom_bits(rom)):
        for i, bit in enumerate(row):
            out[f"rom[{k}][{i}]"] = int(bit)
    for a, row in enumerate(ram_bits(ram)):
        for i, bit in enumerate(row):
            out[f"ram[{a}][{i}]"] = int(bit)
    return out


def register_init(regs) -> dict:
    out = {}
    for r, v in enumerate(regs):
        if r == 0:
            continue
        for i in range(16):
            out[f"x{r}[{i}]"] = (int(v) >> i) & 1
    return out


@dataclass
class RunResult:
    state: EngineState
    cycles: int
    halted: bool
    stats: list


class Machine:
    """A processor netlist bound to a backend and a worker pool."""

    def __init__(self, variant: str = "ruby5", backend=None, workers: int = 1, seed: int | None = None, netlist: Netlist | None = None) -> None:
        self.name = variant
        self.variant, self.memory = parse_variant(variant)
        self.netlist = processor(variant) if netlist is None else netlist
        self.backend = backend if backend is not None else PlainBackend()
        self.engine = Engine(self.netlist, self.backend, workers, seed=seed)

    def close(self) -> None:
        self.engine.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- setup -------------------------------------------------------------------

    def load(self, rom=None, ram=None, regs=None, dff_init: dict | None = None, encrypt=None) -> EngineState:
        """Initial state from images (bytes) or backend memory states.

        For the plain backend bytes are converted directly.  On the TFHE
        backend ``rom``/``ram`` must already be encrypted (EncryptedRom /
        EncryptedRam) for CMUX memory; for gate memory the image bits are
        turned into rows by ``encrypt`` (bits array -> rows array), or into
        trivial ciphertexts when it is omitted.  Gate memory may instead
        arrive entirely through ``dff_init`` (as request packets carry it).
        """
        be = self.backend
        init = {}
        memories = {}
        if self.memory == "gate":
            if rom is not None or ram is not None:
                bits = gate_memory_init(rom or b"", ram or b"")
                if encrypt is not None:
                    rows = encrypt(np.fromiter(bits.values(), dtype=np.uint8, count=len(bits)))
                    bits = dict(zip(bits, rows))
                init.update(bits)
        else:
            if isinstance(rom, (bytes, bytearray)):
                if not isinstance(be, PlainBackend):
                    raise TypeError("encrypted backends need an EncryptedRom, not raw bytes")
                rom = be.rom_state(_pad(rom, ROM_BYTES, "ROM"), ROM_ADDR_BITS)
            if isinstance(ram, (bytes, bytearray)) or ram is None:
                if not isinstance(be, PlainBackend):
                    raise TypeError("encrypted backends need an EncryptedRam, not raw bytes")
                ram = be.ram_state(_pad(ram or b"", 2 * RAM_WORDS, "RAM"), RAM_GEOMETRY)
            memories = {"rom": rom, "ram": ram}
        if regs is not None:
            init.update(register_init(regs))
        init.update(dff_init or {})  # explicit rows win over images
        return self.engine.init_state(memories, init)

    # -- evaluation ------------------------------------------------------------

    def run(self, state: EngineState, cycles: int, on_cycle=None) -> RunResult:
        """Exactly ``cycles`` cycles; the reset input is high on cycle 0 only."""
        state, stats = self.engine.run(state, cycles, reset_inputs, on_cycle)
        return RunResult(state, state.cycle, None, stats)

    def run_until_halt(self, state: EngineState, max_cycles: int) -> RunResult:
        """Plain backend only: stop at the first cycle with the flag raised."""
        if not isinstance(self.backend, PlainBackend):
            raise TypeError("only the plain backend can observe the termination flag")
        stats = []
        while state.cycle < max_cycles:
            state, st = self.engine.run_cycle(state, reset_inputs)
            stats.append(st)
            if self.flag(state):
                return RunResult(state, state.cycle, True, stats)
        return RunResult(state, state.cycle, False, stats)

    # -- readout -----------------------------------------------------------------

    def rows(self, state: EngineState, names) -> np.ndarray:
        return self.engine.dff_rows(state, names)

    def flag_rows(self, state: EngineState) -> np.ndarray:
        return self.rows(state, [FLAG])

    def register_rows(self, state: EngineState) -> np.ndarray:
        """(15, 16, *row) rows of x1..x15, bit 0 first."""
        flat = self.rows(state, [n for r in REG_NAMES for n in r])
        return flat.reshape((15, 16) + flat.shape[1:])

    def ram_rows(self, state: EngineState) -> np.ndarray:
        """Gate memory only: (words, 16, *row)."""
        names = [f"ram[{a}][{i}]" for a in range(RAM_WORDS) for i in range(16)]
        flat = self.rows(state, names)
        return flat.reshape((RAM_WORDS, 16) + flat.shape[1:])

    # plain helpers (lane 0)

    def flag(self, state: EngineState, lane: int = 0) -> int:
        return int(self.flag_rows(state)[0, lane])

    def registers(self, state: EngineState, lane: int = 0) -> list[int]:
        bits = self.register_rows(state)[..., lane].astype(np.int64)
        return [0] + [int((row << np.arange(16)).sum()) for row in bits]

    def ram_image(self, state: EngineState, lane: int = 0) -> bytes:
        if self.memory == "gate":
            planes = self.ram_rows(state)[..., lane]
        else:
            planes = state.memories[self._mem_id("ram")][:, :, lane].T
        return np.packbits(planes.reshape(-1).astype(np.uint8), bitorder="little").tobytes()

    def _mem_id(self, name: str) -> int:
        for c in self.engine.mems:
            if c.name == name:
                return c.id
        raise KeyError(name)

    def memory_id(self, name: str) -> int:
        return self._mem_id(name)
