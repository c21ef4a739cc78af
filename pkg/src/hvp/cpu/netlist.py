"""Gate-level MiniCAHP processors generated with :class:`CircuitBuilder`.

Variants:

``ruby5``
    Five-stage pipeline IF / ID / EX / MEM / WB.  Full forwarding from
    EX/MEM and MEM/WB into EX, a WB -> ID register-file bypass, a one-cycle
    load-use stall, and branches/jumps resolved in EX (IF/ID and ID/EX are
    flushed on a redirect).
``pearl1``
    The same datapath with the pipeline registers removed: one instruction
    per cycle, ROM -> decode -> ALU -> RAM -> register file in one pass.

Both fetch through a 32-bit instruction cache.  The ROM delivers 32-bit
blocks and a 24-bit instruction can straddle two of them, so IF keeps the
previous block: while the cache is valid the ROM is read one block ahead and
the 64-bit window ``cache ++ rom`` always holds the whole instruction.
After a redirect the cache is invalid; an instruction that does not fit the
current block costs one bubble while the cache refills.

``memory="gate"`` replaces the ROM and RAM cells with DFF banks read by MUX
trees and written through an address decoder (the gate-constructed memory
used for comparison).

The termination flag is a sticky DFF ``flag``.  The halt (``jal x0, 0``) is
recognised in ID and the flag is raised when that instruction retires, so
every earlier instruction has completed by the time the flag reads 1.
"""

from __future__ import annotations

from ..memory.geometry import MemoryGeometry
from ..netlist.builder import CircuitBuilder
from ..netlist.schema import Netlist
from .isa import I_OPCODES, R_FUNCT, ROM_BYTES

VARIANTS = ("ruby5", "pearl1")
MEMORIES = ("cmux", "gate")
XLEN = 16
ROM_ADDR_BITS = (ROM_BYTES // 4 - 1).bit_length()  # 7 for 128 blocks
RAM_GEOMETRY = MemoryGeometry(8, 16)


class _Logic:
    """Vector helpers over a builder; vectors are little-endian net lists."""

    def __init__(self, b: CircuitBuilder) -> None:
        self.b = b

    def const(self, value: int, width: int) -> list[int]:
        return [self.b.const((value >> i) & 1) for i in range(width)]

    def mux(self, s, a1, a0):
        return [self.b.MUX(s, x, y) for x, y in zip(a1, a0)]

    def gate(self, kind, a, b):
        return [self.b.gate(kind, x, y) for x, y in zip(a, b)]

    def mask(self, s, a):
        return [self.b.AND(s, x) for x in a]

    def any(self, bits):
        bits = list(bits)
        if not bits:
            return self.b.zero
        while len(bits) > 1:
            nxt = [self.b.OR(bits[i], bits[i + 1]) for i in range(0, len(bits) - 1, 2)]
            if len(bits) % 2:
                nxt.append(bits[-1])
            bits = nxt
        return bits[0]

    def all(self, bits):
        bits = list(bits)
        if not bits:
            return self.b.one
        while len(bits) > 1:
            nxt = [self.b.AND(bits[i], bits[i + 1]) for i in range(0, len(bits) - 1, 2)]
            if len(bits) % 2:
                nxt.append(bits[-1])
            bits = nxt
        return bits[0]

    def eq(self, a, b):
        return self.b.NOT(self.any(self.gate("XOR", a, b)))

    def eq_const(self, a, value: int):
        return self.all(x if (value >> i) & 1 else self.b.NOT(x) for i, x in enumerate(a))

    def add(self, a, b, cin=None):
        """Ripple-carry sum; returns (sum, carry_out)."""
        c = self.b.zero if cin is None else cin
        out = []
        for x, y in zip(a, b):
            p = self.b.XOR(x, y)
            out.append(self.b.XOR(p, c))
            c = self.b.MUX(p, c, x)
        return out, c

    def inc(self, a, bit):
        out, c = [], bit
        for x in a:
            out.append(self.b.XOR(x, c))
            c = self.b.AND(x, c)
        return out

    def shift_left(self, a, amt):
        for k, s in enumerate(amt):
            d = 1 << k
            a = [self.b.MUX(s, a[i - d] if i >= d else self.b.zero, a[i]) for i in range(len(a))]
        return a

    def shift_right(self, a, amt, fill):
        n = len(a)
        for k, s in enumerate(amt):
            d = 1 << k
            a = [self.b.MUX(s, a[i + d] if i + d < n else fill, a[i]) for i in range(n)]
        return a

    def select(self, s_bits, options):
        """MUX tree: options[int(s_bits)]; len(options) == 2**len(s_bits)."""
        level = list(options)
        for s in s_bits:
            level = [self.mux(s, level[i + 1], level[i]) if isinstance(level[i], list) else self.b.MUX(s, level[i + 1], level[i]) for i in range(0, len(level), 2)]
        return level[0]

    def decoder(self, bits, enable=None):
        """One-hot lines for every value of ``bits`` (AND-ed with ``enable``)."""
        if not bits:
            return [self.b.one if enable is None else enable]
        if len(bits) == 1:
            lo = [self.b.NOT(bits[0]), bits[0]]
            return lo if enable is None else [self.b.AND(enable, x) for x in lo]
        h = len(bits) // 2
        lo = self.decoder(bits[:h], enable)
        hi = self.decoder(bits[h:])
        return [self.b.AND(x, y) for y in hi for x in lo]

    def register(self, name: str, d, reset=None):
        """A named DFF bank; with ``reset`` the bank clears synchronously."""
        q = [self.b.dff(f"{name}[{i}]") for i in range(len(d))]
        for qi, di in zip(q, d):
            self.b.connect(qi, di if reset is None else self.b.ANDNOT(di, reset))
        return q

    def dffs(self, name: str, width: int):
        return [self.b.dff(f"{name}[{i}]") for i in range(width)]

    def tie(self, q, d, reset=None):
        for qi, di in zip(q, d):
            self.b.connect(qi, di if reset is None else self.b.ANDNOT(di, reset))


CTRL = (
    "r_form",
    "op_add",
    "op_sub",
    "op_and",
    "op_or",
    "op_xor",
    "op_sll",
    "op_srl",
    "op_sra",
    "op_passb",
    "is_load",
    "is_store",
    "is_beq",
    "is_bne",
    "is_blt",
    "is_bltu",
    "is_jal",
    "is_jalr",
    "is_halt",
    "wr",
)


def _decode(L: _Logic, t):
    """Instruction bits (24, low byte first) -> control dict and fields."""
    b = L.b
    w24 = t[0]
    n24 = b.NOT(w24)
    rdf = L.mux(w24, t[8:12], t[4:8])
    rsf = L.mux(w24, t[12:16], t[8:12])
    op3 = t[1:4]
    opc_lines = L.decoder(t[1:5], w24)
    op = {name: opc_lines[code] for name, code in I_OPCODES.items()}
    op3_lines = L.decoder(op3, n24)
    r_form = op3_lines[0]
    fn_lines = L.decoder(t[12:16], r_form)
    fn = {name: fn_lines[code] for name, code in R_FUNCT.items()}
    imm8 = t[16:24]
    is_jal = op["jal"]
    imm12_zero = L.eq_const(t[12:24], 0)
    c = {
        "r_form": r_form,
        "op_add": L.any([fn["add"], op["addi"], op["lw"], op["sw"]]),
        "op_sub": fn["sub"],
        "op_and": b.OR(fn["and"], op["andi"]),
        "op_or": b.OR(fn["or"], op["ori"]),
        "op_xor": b.OR(fn["xor"], op["xori"]),
        "op_sll": fn["sll"],
        "op_srl": fn["srl"],
        "op_sra": fn["sra"],
        "op_passb": L.any([fn["mov"], op["lsi"], op["lui"]]),
        "is_load": op["lw"],
        "is_store": op["sw"],
        "is_beq": op["beq"],
        "is_bne": op["bne"],
        "is_blt": op["blt"],
        "is_bltu": op["bltu"],
        "is_jal": is_jal,
        "is_jalr": op3_lines[1],
        "is_halt": b.AND(is_jal, imm12_zero),
    }
    writes = L.any([r_form, c["is_jalr"], op["addi"], op["andi"], op["ori"], op["xori"], op["lsi"], op["lui"], op["lw"], is_jal])
    c["wr"] = b.AND(writes, L.any(rdf))
    branch = L.any([op["beq"], op["bne"], op["blt"], op["bltu"]])
    uses_r1 = L.any([r_form, op["sw"], branch])
    uses_r2 = L.any([r_form, c["is_jalr"], op["addi"], op["andi"], op["ori"], op["xori"], op["lw"], op["sw"], branch])
    sext8 = imm8 + [imm8[7]] * 8
    lui_imm = [b.zero] * 8 + imm8
    imm12 = t[12:24] + [t[23]] * 4
    imm = L.mux(op["lui"], lui_imm, L.mux(is_jal, imm12, sext8))
    return c, rdf, rsf, imm, uses_r1, uses_r2


def _execute(L: _Logic, c, R1, R2, imm, pc, pcn):
    """ALU, branch unit and link; returns (result, redirect, target, mem_addr)."""
    b = L.b
    A = L.mux(c["r_form"], R1, R2)
    B = L.mux(c["r_form"], R2, imm)
    sub = c["op_sub"]
    s, _ = L.add(A, [b.XOR(x, sub) for x in B], sub)
    amt = B[:4]
    sll = L.shift_left(A, amt)
    srx = L.shift_right(A, amt, b.AND(c["op_sra"], A[-1]))
    alu = s
    for key, val in (
        ("op_and", L.gate("AND", A, B)),
        ("op_or", L.gate("OR", A, B)),
        ("op_xor", L.gate("XOR", A, B)),
        ("op_sll", sll),
        ("op_srl", srx),
        ("op_sra", srx),
        ("op_passb", B),
    ):
        alu = L.mux(c[key], val, alu)
    link = b.OR(c["is_jal"], c["is_jalr"])
    result = L.mux(link, pcn, alu)

    diff, carry = L.add(R1, [b.NOT(x) for x in R2], b.one)
    eq = b.NOT(L.any(L.gate("XOR", R1, R2)))
    ltu = b.NOT(carry)
    lt = b.MUX(b.XOR(R1[-1], R2[-1]), R1[-1], diff[-1])
    taken = L.any(
        [
            b.AND(c["is_beq"], eq),
            b.ANDNOT(c["is_bne"], eq),
            b.AND(c["is_blt"], lt),
            b.AND(c["is_bltu"], ltu),
        ]
    )
    redirect = L.any([taken, c["is_jal"], c["is_jalr"]])
    rel, _ = L.add(pc, imm)
    target = L.mux(c["is_jalr"], R2, rel)
    return result, redirect, target, s[1:9]


def _read_regs(L: _Logic, regs, idx):
    return L.select(idx, regs)


class _Fetch:
    """IF with the one-block instruction cache."""

    def __init__(self, L: _Logic, rom_read) -> None:
        b = L.b
        self.pc = L.dffs("pc", XLEN)
        self.cache = L.dffs("cache", 32)
        self.valid = b.dff("icache_valid")
        blk = self.pc[2 : 2 + ROM_ADDR_BITS]
        rom_addr = L.inc(blk, self.valid)
        self.rom_out = rom_read(rom_addr)
        window = L.mux(self.valid, self.cache, self.rom_out) + self.rom_out
        o = self.pc[0:2]
        self.t = [L.select(o, [window[8 * k + i] for k in range(4)]) for i in range(24)]
        w24 = self.t[0]
        self.pcn, _ = L.add(self.pc, [w24, b.one] + [b.zero] * (XLEN - 2))
        e, _ = L.add(o + [b.zero], [w24, b.one, b.zero])
        crosses = e[2]
        over = b.AND(e[2], b.OR(e[0], e[1]))
        self.fits = b.ORNOT(self.valid, over)
        self.crosses = crosses
        self.L = L

    def close(self, reset, redirect, target, stall):
        L, b = self.L, self.L.b
        hold = b.OR(stall, b.NOT(self.fits))
        pc_next = L.mux(redirect, target, L.mux(hold, self.pc, self.pcn))
        L.tie(self.pc, pc_next, reset)
        keep = b.OR(stall, b.AND(self.fits, b.ANDNOT(self.valid, self.crosses)))
        L.tie(self.cache, L.mux(keep, self.cache, self.rom_out))
        v_run = L.any([self.valid, b.NOT(self.crosses), b.NOT(self.fits)])
        v_next = b.MUX(stall, self.valid, v_run)
        b.connect(self.valid, b.ANDNOT(b.ANDNOT(v_next, redirect), reset))


def _memories(L: _Logic, memory: str):
    """Return (rom_read(addr), ram_access(addr, wdata, wflag)) factories."""
    b = L.b
    if memory == "cmux":
        return (lambda addr: b.rom(list(addr), "rom")), (lambda a, d, w: b.ram(list(a), list(d), w, "ram"))

    def rom_read(addr):
        blocks = 1 << ROM_ADDR_BITS
        bits = []
        cells = [[b.dff(f"rom[{k}][{i}]") for i in range(32)] for k in range(blocks)]
        for row in cells:
            for q in row:
                b.connect(q, q)
        for i in range(32):
            bits.append(L.select(addr, [cells[k][i] for k in range(blocks)]))
        return bits

    def ram_access(addr, wdata, wflag):
        g = RAM_GEOMETRY
        cells = [[b.dff(f"ram[{a}][{i}]") for i in range(g.w)] for a in range(g.words)]
        lines = L.decoder(list(addr), wflag)
        for a, row in enumerate(cells):
            for i, q in enumerate(row):
                b.connect(q, b.MUX(lines[a], wdata[i], q))
        return [L.select(addr, [cells[a][i] for a in range(g.words)]) for i in range(g.w)]

    return rom_read, ram_access


def _regfile(L: _Logic):
    b = L.b
    regs = [[b.zero] * XLEN] + [L.dffs(f"x{r}", XLEN) for r in range(1, 16)]
    return regs


def _write_regs(L: _Logic, regs, we, rd, value):
    lines = L.decoder(rd, we)
    for r in range(1, 16):
        L.tie(regs[r], L.mux(lines[r], value, regs[r]))


def _outputs(L: _Logic, regs, flag, pc):
    b = L.b
    b.output("flag", [flag])
    b.output("regs", [x for r in regs for x in r])
    b.output("pc", pc)


def _build_pearl1(L: _Logic, memory: str) -> None:
    b = L.b
    reset = b.input("reset")[0]
    rom_read, ram_access = _memories(L, memory)
    regs = _regfile(L)
    flag = b.dff("flag")
    f = _Fetch(L, rom_read)
    c, rdf, rsf, imm, _, _ = _decode(L, f.t)
    issue = b.ANDNOT(f.fits, reset)
    c = {k: b.AND(v, issue) if k in ("is_load", "is_store", "is_beq", "is_bne", "is_blt", "is_bltu", "is_jal", "is_jalr", "is_halt", "wr") else v for k, v in c.items()}
    R1 = _read_regs(L, regs, rdf)
    R2 = _read_regs(L, regs, rsf)
    result, redirect, target, mem_addr = _execute(L, c, R1, R2, imm, f.pc, f.pcn)
    rdata = ram_access(mem_addr, R1, c["is_store"])
    value = L.mux(c["is_load"], rdata, result)
    _write_regs(L, regs, c["wr"], rdf, value)
    b.connect(flag, b.ANDNOT(b.OR(flag, c["is_halt"]), reset))
    f.close(reset, redirect, target, b.zero)
    _outputs(L, regs, flag, f.pc)


def _build_ruby5(L: _Logic, memory: str) -> None:
    b = L.b
    reset = b.input("reset")[0]
    rom_read, ram_access = _memories(L, memory)
    regs = _regfile(L)
    flag = b.dff("flag")
    f = _Fetch(L, rom_read)

    # pipeline registers (Q sides); D sides are tied at the end
    ifid_valid = b.dff("ifid.valid")
    ifid_t = L.dffs("ifid.t", 24)
    ifid_pc = L.dffs("ifid.pc", XLEN)
    ifid_pcn = L.dffs("ifid.pcn", XLEN)
    idex_c = {k: b.dff(f"idex.{k}") for k in CTRL}
    idex_rdf = L.dffs("idex.rdf", 4)
    idex_rsf = L.dffs("idex.rsf", 4)
    idex_R1 = L.dffs("idex.r1", XLEN)
    idex_R2 = L.dffs("idex.r2", XLEN)
    idex_imm = L.dffs("idex.imm", XLEN)
    idex_pc = L.dffs("idex.pc", XLEN)
    idex_pcn = L.dffs("idex.pcn", XLEN)
    exmem_c = {k: b.dff(f"exmem.{k}") for k in ("is_load", "is_store", "is_halt", "wr")}
    exmem_rd = L.dffs("exmem.rd", 4)
    exmem_res = L.dffs("exmem.result", XLEN)
    exmem_sd = L.dffs("exmem.store", XLEN)
    memwb_c = {k: b.dff(f"memwb.{k}") for k in ("is_halt", "wr")}
    memwb_rd = L.dffs("memwb.rd", 4)
    memwb_val = L.dffs("memwb.value", XLEN)

    # WB
    _write_regs(L, regs, memwb_c["wr"], memwb_rd, memwb_val)
    b.connect(flag, b.ANDNOT(b.OR(flag, memwb_c["is_halt"]), reset))

    # MEM
    rdata = ram_access(exmem_res[1:9], exmem_sd, b.ANDNOT(exmem_c["is_store"], reset))
    mem_val = L.mux(exmem_c["is_load"], rdata, exmem_res)
    L.tie(memwb_val, mem_val)
    L.tie(memwb_rd, exmem_rd)
    for k in memwb_c:
        b.connect(memwb_c[k], b.ANDNOT(exmem_c[k], reset))

    # EX with forwarding
    def forward(idx, val):
        from_mem = b.AND(exmem_c["wr"], L.eq(exmem_rd, idx))
        from_wb = b.AND(memwb_c["wr"], L.eq(memwb_rd, idx))
        return L.mux(from_mem, exmem_res, L.mux(from_wb, memwb_val, val))

    R1x = forward(idex_rdf, idex_R1)
    R2x = forward(idex_rsf, idex_R2)
    result, redirect, target, _ = _execute(L, idex_c, R1x, R2x, idex_imm, idex_pc, idex_pcn)
    L.tie(exmem_res, result)
    L.tie(exmem_sd, R1x)
    L.tie(exmem_rd, idex_rdf)
    for k in exmem_c:
        b.connect(exmem_c[k], b.ANDNOT(idex_c[k], reset))

    # ID
    c, rdf, rsf, imm, uses_r1, uses_r2 = _decode(L, ifid_t)

    def read(idx):
        bypass = b.AND(memwb_c["wr"], L.eq(memwb_rd, idx))
        return L.mux(bypass, memwb_val, _read_regs(L, regs, idx))

    R1 = read(rdf)
    R2 = read(rsf)
    hazard_rd = b.AND(idex_c["is_load"], idex_c["wr"])
    stall = b.AND(
        b.AND(ifid_valid, hazard_rd),
        b.OR(b.AND(uses_r1, L.eq(idex_rdf, rdf)), b.AND(uses_r2, L.eq(idex_rdf, rsf))),
    )
    go = b.ANDNOT(b.ANDNOT(ifid_valid, stall), redirect)
    if_go = b.ANDNOT(go, reset)
    for k in CTRL:
        v = c[k]
        b.connect(idex_c[k], b.AND(v, if_go) if k != "r_form" and not k.startswith("op_") else v)
    for q, d in ((idex_rdf, rdf), (idex_rsf, rsf), (idex_R1, R1), (idex_R2, R2), (idex_imm, imm), (idex_pc, ifid_pc), (idex_pcn, ifid_pcn)):
        L.tie(q, d)

    # IF -> IF/ID
    new_valid = b.ANDNOT(f.fits, redirect)
    b.connect(ifid_valid, b.ANDNOT(b.MUX(stall, ifid_valid, new_valid), reset))
    L.tie(ifid_t, L.mux(stall, ifid_t, f.t))
    L.tie(ifid_pc, L.mux(stall, ifid_pc, f.pc))
    L.tie(ifid_pcn, L.mux(stall, ifid_pcn, f.pcn))
    f.close(reset, redirect, target, stall)
    _outputs(L, regs, flag, f.pc)


def build_netlist(variant: str = "ruby5", memory: str = "cmux") -> Netlist:
    """Generate a processor netlist; ``memory`` is ``cmux`` or ``gate``."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown processor variant {variant!r}; choose from {VARIANTS}")
    if memory not in MEMORIES:
        raise ValueError(f"unknown memory kind {memory!r}; choose from {MEMORIES}")
    name = variant if memory == "cmux" else f"{variant}-gatemem"
    L = _Logic(CircuitBuilder(name))
    (_build_ruby5 if variant == "ruby5" else _build_pearl1)(L, memory)
    return L.b.build()


def parse_variant(name: str) -> tuple[str, str]:
    if name.endswith("-gatemem"):
        return name[: -len("-gatemem")], "gate"
    return name, "cmux"
