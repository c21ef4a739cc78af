"""Two-pass assembler and disassembler for MiniCAHP.

Source format: one statement per line, ``label:`` prefixes, ``;`` comments.
Sections: ``.text`` (default, ROM bytes) and ``.data`` (RAM words).  Data
directives: ``.word v, ...`` (numbers or 'c' character literals),
``.wstr "text"`` (one word per character) and ``.space n`` (n zero words).
Data labels evaluate to RAM byte addresses.

Pseudo-instructions: ``halt`` (jal x0, 0), ``j label`` (jal x0, label),
``li rd, v`` (lsi, or lui + addi), ``la rd, label`` (always lui + addi).
Operands may be ``label``, ``label+n`` or ``label-n``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .isa import ALU_I, BRANCHES, I_OPCODES, R_FUNCT, RAM_WORDS, ROM_BYTES, EncodingError, Instr, decode, encode


class AsmError(ValueError):
    def __init__(self, msg: str, line: int | None = None) -> None:
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


@dataclass
class Program:
    rom: bytes
    ram: bytes
    symbols: dict = field(default_factory=dict)
    code_size: int = 0


_REG = re.compile(r"^x(\d+)$")
_MEM = re.compile(r"^(.*)\((x\d+)\)$")


def _reg(tok: str, line: int) -> int:
    m = _REG.match(tok.strip().lower())
    if not m or int(m.group(1)) > 15:
        raise AsmError(f"bad register {tok!r}", line)
    return int(m.group(1))


def _split_operands(s: str) -> list[str]:
    out, cur, quote = [], "", None
    for ch in s:
        if quote:
            cur += ch
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
            cur += ch
        elif ch == ",":
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def _strip_comment(s: str) -> str:
    quote = None
    for i, ch in enumerate(s):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == ";":
            return s[:i]
    return s


def _number(tok: str) -> int | None:
    tok = tok.strip()
    if len(tok) == 3 and tok[0] == tok[2] == "'":
        return ord(tok[1])
    try:
        return int(tok, 0)
    except ValueError:
        return None


class _Asm:
    def __init__(self) -> None:
        self.symbols: dict[str, int] = {}
        self.code: list = []  # (pc, mnemonic, operands, line)
        self.data: list[int] = []
        self.pc = 0

    def value(self, tok: str, line: int) -> int:
        tok = tok.strip()
        n = _number(tok)
        if n is not None:
            return n
        m = re.match(r"^([A-Za-z_.$][\w.$]*)\s*([+-]\s*\S+)?$", tok)
        if not m:
            raise AsmError(f"cannot parse operand {tok!r}", line)
        name = m.group(1)
        if name not in self.symbols:
            raise AsmError(f"undefined label {name!r}", line)
        off = 0
        if m.group(2):
            off = _number(m.group(2).replace(" ", ""))
            if off is None:
                raise AsmError(f"bad offset in {tok!r}", line)
        return self.symbols[name] + off

    @staticmethod
    def _is_literal(tok: str) -> bool:
        return _number(tok) is not None

    def size_of(self, mnem: str, ops: list[str], line: int) -> int:
        if mnem in R_FUNCT or mnem in ("jalr", "nop"):
            return 2
        if mnem in I_OPCODES or mnem in ("halt", "j"):
            return 3
        if mnem == "la":
            return 6
        if mnem == "li":
            if len(ops) != 2:
                raise AsmError("li takes two operands", line)
            v = _number(ops[1])
            if v is None:
                return 6
            return 3 if -128 <= _s16(v) <= 127 else (3 if _s16(v) & 0xFF == 0 else 6)
        raise AsmError(f"unknown mnemonic {mnem!r}", line)

    def pass1(self, source: str) -> None:
        section = "text"
        for ln, raw in enumerate(source.splitlines(), 1):
            s = _strip_comment(raw).strip()
            while True:
                m = re.match(r"^([A-Za-z_.$][\w.$]*)\s*:(.*)$", s)
                if not m:
                    break
                name = m.group(1)
                if name in self.symbols:
                    raise AsmError(f"duplicate label {name!r}", ln)
                self.symbols[name] = self.pc if section == "text" else 2 * len(self.data)
                s = m.group(2).strip()
            if not s:
                continue
            parts = s.split(None, 1)
            mnem = parts[0].lower()
            ops = _split_operands(parts[1]) if len(parts) > 1 else []
            if mnem == ".text":
                section = "text"
                continue
            if mnem == ".data":
                section = "data"
                continue
            if mnem.startswith("."):
                if section != "data":
                    raise AsmError(f"{mnem} is only allowed in .data", ln)
                self.directive(mnem, ops, parts[1] if len(parts) > 1 else "", ln)
                continue
            if section != "text":
                raise AsmError("instructions are not allowed in .data", ln)
            self.code.append((self.pc, mnem, ops, ln))
            self.pc += self.size_of(mnem, ops, ln)
        if self.pc > ROM_BYTES:
            raise AsmError(f"program is {self.pc} bytes; ROM holds {ROM_BYTES}")
        if len(self.data) > RAM_WORDS:
            raise AsmError(f"data is {len(self.data)} words; RAM holds {RAM_WORDS}")

    def directive(self, mnem: str, ops: list[str], rest: str, ln: int) -> None:
        if mnem == ".word":
            for op in ops:
                v = _number(op)
                if v is None:
                    raise AsmError(f".word needs numeric values, got {op!r}", ln)
                if not -32768 <= v <= 0xFFFF:
                    raise AsmError(f".word value {v} does not fit 16 bits", ln)
                self.data.append(v & 0xFFFF)
        elif mnem == ".wstr":
            m = re.match(r'^\s*"(.*)"\s*$', rest)
            if not m:
                raise AsmError(".wstr needs a double-quoted string", ln)
            self.data.extend(ord(c) for c in m.group(1))
        elif mnem == ".space":
            n = _number(ops[0]) if ops else None
            if n is None or n < 0:
                raise AsmError(".space needs a non-negative count", ln)
            self.data.extend([0] * n)
        else:
            raise AsmError(f"unknown directive {mnem!r}", ln)

    def pass2(self) -> list[tuple[int, Instr, int]]:
        starts = {pc for pc, *_ in self.code}
        out = []
        for pc, mnem, ops, ln in self.code:
            for ins in self.expand(pc, mnem, ops, ln):
                if ins.name in BRANCHES or ins.name == "jal":
                    tgt = pc + ins.imm
                    if tgt not in starts and not (ins.name == "jal" and ins.imm == 0):
                        raise AsmError(f"misaligned branch target {tgt} (not an instruction start)", ln)
                out.append((pc, ins, ln))
                pc += ins.size
        return out

    def expand(self, pc: int, mnem: str, ops: list[str], ln: int) -> list[Instr]:
        def need(k):
            if len(ops) != k:
                raise AsmError(f"{mnem} takes {k} operands, got {len(ops)}", ln)

        if mnem == "nop":
            need(0)
            return [Instr("nop")]
        if mnem == "halt":
            need(0)
            return [Instr("jal", 0, 0, 0)]
        if mnem == "mov":
            need(2)
            return [Instr("mov", _reg(ops[0], ln), _reg(ops[1], ln))]
        if mnem in R_FUNCT:
            if len(ops) == 3:
                rd, rs1, rs2 = (_reg(o, ln) for o in ops)
                if rd != rs1:
                    raise AsmError(f"{mnem} is two-operand: destination must equal the first source", ln)
            else:
                need(2)
                rd, rs2 = (_reg(o, ln) for o in ops)
            return [Instr(mnem, rd, rs2)]
        if mnem == "jalr":
            need(2)
            return [Instr("jalr", _reg(ops[0], ln), _reg(ops[1], ln))]
        if mnem in ALU_I:
            need(3)
            return [Instr(mnem, _reg(ops[0], ln), _reg(ops[1], ln), self.value(ops[2], ln))]
        if mnem in ("lsi", "lui"):
            need(2)
            return [Instr(mnem, _reg(ops[0], ln), 0, self.value(ops[1], ln))]
        if mnem in ("lw", "sw"):
            need(2)
            m = _MEM.match(ops[1].replace(" ", ""))
            if not m:
                raise AsmError(f"{mnem} needs an imm(reg) operand", ln)
            imm = self.value(m.group(1) or "0", ln)
            return [Instr(mnem, _reg(ops[0], ln), _reg(m.group(2), ln), imm)]
        if mnem in BRANCHES:
            need(3)
            off = self._target(pc, ops[2], ln)
            return [Instr(mnem, _reg(ops[0], ln), _reg(ops[1], ln), off)]
        if mnem == "jal":
            need(2)
            return [Instr("jal", _reg(ops[0], ln), 0, self._target(pc, ops[1], ln))]
        if mnem == "j":
            need(1)
            return [Instr("jal", 0, 0, self._target(pc, ops[0], ln))]
        if mnem in ("li", "la"):
            need(2)
            rd = _reg(ops[0], ln)
            v = _s16(self.value(ops[1], ln))
            size = self.size_of(mnem, ops, ln)
            if size == 3:
                return [Instr("lsi", rd, 0, v)] if -128 <= v <= 127 else [Instr("lui", rd, 0, (v >> 8) & 0xFF)]
            lo = _s8(v & 0xFF)
            hi = ((v - lo) >> 8) & 0xFF
            return [Instr("lui", rd, 0, hi), Instr("addi", rd, rd, lo)]
        raise AsmError(f"unknown mnemonic {mnem!r}", ln)

    def _target(self, pc: int, tok: str, ln: int) -> int:
        tok = tok.strip()
        if self._is_literal(tok):
            return _number(tok)
        return self.value(tok, ln) - pc


def _s16(v: int) -> int:
    v &= 0xFFFF
    return v - 0x10000 if v & 0x8000 else v


def _s8(v: int) -> int:
    v &= 0xFF
    return v - 0x100 if v & 0x80 else v


def assemble(source: str) -> Program:
    a = _Asm()
    a.pass1(source)
    rom = bytearray(ROM_BYTES)
    for pc, ins, ln in a.pass2():
        try:
            enc = encode(ins)
        except EncodingError as exc:
            raise AsmError(str(exc).replace("immediate", "immediate overflow:"), ln) from None
        rom[pc : pc + len(enc)] = enc
    ram = bytearray(2 * RAM_WORDS)
    for i, w in enumerate(a.data):
        ram[2 * i : 2 * i + 2] = w.to_bytes(2, "little")
    return Program(bytes(rom), bytes(ram), dict(a.symbols), a.pc)


def format_instr(ins: Instr) -> str:
    n = ins.name
    if n == "nop":
        return "nop"
    if n == "mov":
        return f"mov x{ins.rd}, x{ins.rs}"
    if n in R_FUNCT:
        return f"{n} x{ins.rd}, x{ins.rd}, x{ins.rs}"
    if n == "jalr":
        return f"jalr x{ins.rd}, x{ins.rs}"
    if n in ALU_I:
        return f"{n} x{ins.rd}, x{ins.rs}, {ins.imm}"
    if n in ("lsi", "lui"):
        return f"{n} x{ins.rd}, {ins.imm}"
    if n in ("lw", "sw"):
        return f"{n} x{ins.rd}, {ins.imm}(x{ins.rs})"
    if n in BRANCHES:
        return f"{n} x{ins.rd}, x{ins.rs}, {ins.imm}"
    if n == "jal":
        return f"jal x{ins.rd}, {ins.imm}"
    raise EncodingError(n)


def disassemble(code: bytes, length: int | None = None) -> str:
    """One instruction per line; ``length`` limits decoding to the code bytes."""
    end = len(code) if length is None else length
    lines, pc = [], 0
    while pc < end:
        ins = decode(code, pc)
        lines.append(format_instr(ins))
        pc += ins.size
    return "\n".join(lines) + ("\n" if lines else "")


def tokens(text: str) -> list[list[str]]:
    out = []
    for line in text.splitlines():
        line = _strip_comment(line).strip()
        if line:
            out.append(re.findall(r"[^\s,()]+|[(),]", line.lower()))
    return out
