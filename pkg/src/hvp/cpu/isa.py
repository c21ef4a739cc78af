"""MiniCAHP instruction set: the one table shared by assembler, ISS and netlist.

Instructions are byte aligned and little-endian.  Bit 0 of the first byte
selects the width: 0 for 16 bits, 1 for 24 bits.

16-bit word ``h``::

    h[0]      = 0
    h[3:1]    = op3     0 ALU (register), 1 JALR, 2 NOP
    h[7:4]    = rd
    h[11:8]   = rs
    h[15:12]  = funct   ALU only, see R_FUNCT

24-bit word ``t``::

    t[0]      = 1
    t[4:1]    = opcode  see I_OPCODES
    t[7:5]    = 0       reserved
    t[11:8]   = rd      (first register operand)
    t[15:12]  = rs      (second register operand)      I and B forms
    t[23:16]  = imm8    sign-extended except for LUI
    t[23:12]  = imm12   J form (JAL), sign-extended

Semantics (PC-relative offsets are in bytes from the instruction's own PC):

    MOV rd, rs          rd = rs
    ADD..SRA rd, rs     rd = rd op rs     (asm: ``add rd, rd, rs``)
    JALR rd, rs         rd = PC + 2; PC = rs
    ADDI/ANDI/ORI/XORI  rd = rs op sext(imm8)
    LSI rd, imm         rd = sext(imm8)
    LUI rd, imm         rd = imm8 << 8
    LW rd, imm(rs)      rd = RAM[((rs + sext(imm8)) >> 1) & 0xff]
    SW rd, imm(rs)      RAM[((rs + sext(imm8)) >> 1) & 0xff] = rd
    BEQ/BNE/BLT/BLTU rd, rs, imm   if cond(rd, rs): PC += sext(imm8)
    JAL rd, imm         rd = PC + 3; PC += sext(imm12)

Shifts use rs[3:0].  x0 reads as zero and ignores writes.  HALT is the
pseudo-instruction ``jal x0, 0`` (a jump to itself).
"""

from __future__ import annotations

from dataclasses import dataclass

R_FUNCT = {"mov": 0, "add": 1, "sub": 2, "and": 3, "or": 4, "xor": 5, "sll": 6, "srl": 7, "sra": 8}
R_NAMES = {v: k for k, v in R_FUNCT.items()}
OP3_ALU, OP3_JALR, OP3_NOP = 0, 1, 2

I_OPCODES = {
    "addi": 0,
    "andi": 1,
    "ori": 2,
    "xori": 3,
    "lsi": 4,
    "lui": 5,
    "lw": 6,
    "sw": 7,
    "beq": 8,
    "bne": 9,
    "blt": 10,
    "bltu": 11,
    "jal": 12,
}
I_NAMES = {v: k for k, v in I_OPCODES.items()}
ALU_I = ("addi", "andi", "ori", "xori")
BRANCHES = ("beq", "bne", "blt", "bltu")

ROM_BYTES = 512
RAM_WORDS = 256
RESULT_REG = 8


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class Instr:
    name: str
    rd: int = 0
    rs: int = 0
    imm: int = 0

    @property
    def size(self) -> int:
        return 2 if self.name in R_FUNCT or self.name in ("jalr", "nop") else 3

    @property
    def is_halt(self) -> bool:
        return self.name == "jal" and self.imm == 0


def _reg(r: int) -> int:
    if not 0 <= r < 16:
        raise EncodingError(f"register x{r} out of range")
    return r


def _simm(v: int, bits: int) -> int:
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    if not lo <= v <= hi:
        raise EncodingError(f"immediate {v} out of range [{lo}, {hi}]")
    return v & ((1 << bits) - 1)


def _sext(v: int, bits: int) -> int:
    return v - (1 << bits) if v & (1 << (bits - 1)) else v


def encode(ins: Instr) -> bytes:
    n = ins.name
    if n in R_FUNCT:
        h = (OP3_ALU << 1) | (_reg(ins.rd) << 4) | (_reg(ins.rs) << 8) | (R_FUNCT[n] << 12)
        return h.to_bytes(2, "little")
    if n == "jalr":
        h = (OP3_JALR << 1) | (_reg(ins.rd) << 4) | (_reg(ins.rs) << 8)
        return h.to_bytes(2, "little")
    if n == "nop":
        return (OP3_NOP << 1).to_bytes(2, "little")
    if n not in I_OPCODES:
        raise EncodingError(f"unknown instruction {n!r}")
    op = I_OPCODES[n]
    if n == "jal":
        t = 1 | (op << 1) | (_reg(ins.rd) << 8) | (_simm(ins.imm, 12) << 12)
    else:
        if n == "lui":
            if not 0 <= ins.imm <= 255:
                raise EncodingError(f"immediate {ins.imm} out of range [0, 255]")
            imm = ins.imm
        else:
            imm = _simm(ins.imm, 8)
        t = 1 | (op << 1) | (_reg(ins.rd) << 8) | (_reg(ins.rs) << 12) | (imm << 16)
    return t.to_bytes(3, "little")


def decode(buf: bytes, offset: int = 0) -> Instr:
    """Decode the instruction at ``offset``; raises on undefined encodings."""
    if offset >= len(buf):
        raise EncodingError("decode past end of image")
    b0 = buf[offset]
    if b0 & 1 == 0:
        if offset + 2 > len(buf):
            raise EncodingError("truncated 16-bit instruction")
        h = int.from_bytes(buf[offset : offset + 2], "little")
        op3, rd, rs, funct = (h >> 1) & 7, (h >> 4) & 15, (h >> 8) & 15, (h >> 12) & 15
        if op3 == OP3_ALU:
            if funct not in R_NAMES:
                raise EncodingError(f"undefined ALU funct {funct}")
            return Instr(R_NAMES[funct], rd, rs)
        if op3 == OP3_JALR and funct == 0:
            return Instr("jalr", rd, rs)
        if op3 == OP3_NOP and h == OP3_NOP << 1:
            return Instr("nop")
        raise EncodingError(f"undefined 16-bit encoding {h:#06x}")
    if offset + 3 > len(buf):
        raise EncodingError("truncated 24-bit instruction")
    t = int.from_bytes(buf[offset : offset + 3], "little")
    op = (t >> 1) & 15
    if (t >> 5) & 7 or op not in I_NAMES:
        raise EncodingError(f"undefined 24-bit encoding {t:#08x}")
    n = I_NAMES[op]
    rd = (t >> 8) & 15
    if n == "jal":
        return Instr(n, rd, 0, _sext(t >> 12, 12))
    rs = (t >> 12) & 15
    imm = t >> 16
    if n != "lui":
        imm = _sext(imm, 8)
    if n in ("lsi", "lui") and rs:
        raise EncodingError(f"{n} with non-zero rs field")
    return Instr(n, rd, rs, imm)
