"""Plain instruction-set simulator: the architectural ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

from .isa import RAM_WORDS, ROM_BYTES, EncodingError, decode


class IssError(RuntimeError):
    pass


@dataclass
class IssState:
    regs: list[int] = field(default_factory=lambda: [0] * 16)
    pc: int = 0
    ram: list[int] = field(default_factory=lambda: [0] * RAM_WORDS)
    halted: bool = False
    steps: int = 0

    def ram_bytes(self) -> bytes:
        return b"".join(w.to_bytes(2, "little") for w in self.ram)


M16 = 0xFFFF


def _s16(v: int) -> int:
    return v - 0x10000 if v & 0x8000 else v


def step(rom: bytes, st: IssState) -> None:
    if st.halted:
        return
    if st.pc >= ROM_BYTES:
        raise IssError(f"PC {st.pc:#x} ran past the end of ROM")
    try:
        ins = decode(rom, st.pc)
    except EncodingError as exc:
        raise IssError(f"bad instruction at {st.pc:#x}: {exc}") from None
    r = st.regs
    n, rd, rs, imm = ins.name, ins.rd, ins.rs, ins.imm
    pc = st.pc
    nxt = (pc + ins.size) & M16
    val = None
    if n == "mov":
        val = r[rs]
    elif n == "add":
        val = r[rd] + r[rs]
    elif n == "sub":
        val = r[rd] - r[rs]
    elif n == "and":
        val = r[rd] & r[rs]
    elif n == "or":
        val = r[rd] | r[rs]
    elif n == "xor":
        val = r[rd] ^ r[rs]
    elif n == "sll":
        val = r[rd] << (r[rs] & 15)
    elif n == "srl":
        val = r[rd] >> (r[rs] & 15)
    elif n == "sra":
        val = _s16(r[rd]) >> (r[rs] & 15)
    elif n == "jalr":
        val = pc + 2
        nxt = r[rs]
    elif n == "nop":
        pass
    elif n == "addi":
        val = r[rs] + imm
    elif n == "andi":
        val = r[rs] & (imm & M16)
    elif n == "ori":
        val = r[rs] | (imm & M16)
    elif n == "xori":
        val = r[rs] ^ (imm & M16)
    elif n == "lsi":
        val = imm
    elif n == "lui":
        val = imm << 8
    elif n == "lw":
        val = st.ram[((r[rs] + imm) >> 1) & 0xFF]
    elif n == "sw":
        st.ram[(((r[rs] + imm) & M16) >> 1) & 0xFF] = r[rd]
    elif n in ("beq", "bne", "blt", "bltu"):
        a, b = r[rd], r[rs]
        take = {"beq": a == b, "bne": a != b, "blt": _s16(a) < _s16(b), "bltu": a < b}[n]
        if take:
            nxt = (pc + imm) & M16
    elif n == "jal":
        val = pc + 3
        nxt = (pc + imm) & M16
        if imm == 0:
            st.halted = True
    if val is not None and rd != 0:
        r[rd] = val & M16
    st.pc = nxt
    st.steps += 1


def iss_run(rom: bytes, ram_init: bytes | None = None, max_cycles: int = 100_000, regs: list[int] | None = None, trace: list | None = None) -> IssState:
    """Run until the self-jump halt or ``max_cycles`` steps.

    Hitting the budget is not an error: the returned state has
    ``halted == False`` and the caller decides what to do.
    """
    st = IssState()
    if ram_init is not None:
        st.ram = [int.from_bytes(ram_init[2 * i : 2 * i + 2], "little") for i in range(RAM_WORDS)]
    if regs is not None:
        st.regs = [v & M16 for v in regs]
        st.regs[0] = 0
    while not st.halted and st.steps < max_cycles:
        step(rom, st)
        if trace is not None:
            trace.append((st.pc, list(st.regs)))
    return st
