import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hvp.cpu import (
    AsmError,
    EncodingError,
    Instr,
    Machine,
    assemble,
    decode,
    disassemble,
    encode,
    format_instr,
    iss_run,
    processor,
    program_source,
)
from hvp.cpu.asm import tokens
from hvp.cpu.isa import ALU_I, BRANCHES, I_OPCODES, R_FUNCT
from hvp.cpu.machine import register_init
from hvp.cpu.netlist import RAM_GEOMETRY
from hvp.memory import encrypt_ram, encrypt_rom
from hvp.memory.ram import image_to_bits
from hvp.netlist import PlainBackend, TfheBackend, netlist_stats
from hvp.tfhe import TEST_DET, NoiseSampler
from hvp.tfhe.ciphertext import TlweCiphertext
from hvp.tfhe.crypto import tlwe_decrypt

CORPUS = ("fibonacci", "hamming", "bf")
EXPECTED = {"fibonacci": 5, "hamming": 24, "bf": 42}


# -- ISA ------------------------------------------------------------------------


def _all_instrs():
    for n in R_FUNCT:
        for rd in range(16):
            for rs in range(16):
                yield Instr(n, rd, rs)
    for rd in range(16):
        for rs in range(16):
            yield Instr("jalr", rd, rs)
            for n in I_OPCODES:
                if n == "jal":
                    continue
                for imm in range(0, 256) if n == "lui" else range(-128, 128):
                    yield Instr(n, rd, 0 if n in ("lsi", "lui") else rs, imm)
        for imm in range(-2048, 2048):
            yield Instr("jal", rd, 0, imm)
    yield Instr("nop")


def test_encode_decode_exhaustive():
    count = 0
    for ins in _all_instrs():
        enc = encode(ins)
        assert len(enc) == ins.size
        assert decode(enc) == ins
        count += 1
    assert count > 100_000


def test_decode_all_16bit_words():
    # every 16-bit word either decodes and re-encodes to itself, or is rejected
    ok = 0
    for h in range(0, 1 << 16, 2):
        buf = h.to_bytes(2, "little")
        try:
            ins = decode(buf)
        except EncodingError:
            continue
        assert encode(ins) == buf
        ok += 1
    assert ok == len(R_FUNCT) * 256 + 256 + 1


def test_encoding_range_errors():
    for bad in (Instr("addi", 1, 1, 128), Instr("lui", 1, 0, -1), Instr("jal", 0, 0, 2048), Instr("add", 16, 0)):
        with pytest.raises(EncodingError):
            encode(bad)
    with pytest.raises(EncodingError):
        encode(Instr("mul", 1, 2))
    with pytest.raises(EncodingError):
        decode(b"\x01\x00")


def test_halt_encoding():
    p = assemble("halt\n")
    assert p.rom[:3] == encode(Instr("jal", 0, 0, 0))
    assert disassemble(p.rom, p.code_size) == "jal x0, 0\n"
    assert decode(p.rom).is_halt


# -- assembler --------------------------------------------------------------------


@pytest.mark.parametrize("name", CORPUS)
def test_assembler_round_trip(name):
    p = assemble(program_source(name))
    text = disassemble(p.rom, p.code_size)
    again = assemble(text)
    assert again.rom[: p.code_size] == p.rom[: p.code_size]
    assert tokens(text) == tokens(disassemble(again.rom, again.code_size))


@given(st.lists(st.sampled_from(sorted(R_FUNCT) + list(ALU_I) + ["lsi", "lui", "lw", "sw", "nop"]), min_size=1, max_size=30), st.randoms())
def test_format_reassembles(names, rnd):
    code = b""
    for n in names:
        rd, rs = rnd.randrange(16), rnd.randrange(16)
        imm = rnd.randrange(256) if n == "lui" else rnd.randrange(-128, 128)
        ins = Instr(n, rd, 0 if n in ("lsi", "lui") else rs, 0 if n in R_FUNCT or n == "nop" else imm)
        if n == "nop":
            ins = Instr("nop")
        code += encode(ins)
        assert assemble(format_instr(ins)).rom[: ins.size] == encode(ins)
    assert assemble(disassemble(code)).rom[: len(code)] == code


def test_assembler_errors():
    with pytest.raises(AsmError, match="undefined"):
        assemble("beq x1, x2, nowhere\nhalt\n")
    far = "beq x1, x2, far\n" + "nop\n" * 150 + "far: halt\n"
    with pytest.raises(AsmError, match="overflow"):
        assemble(far)
    with pytest.raises(AsmError, match="misaligned"):
        assemble("start: beq x1, x2, start+1\nhalt\n")
    with pytest.raises(AsmError):
        assemble("add x1, x2, x3\n")  # destination must equal the first source
    with pytest.raises(AsmError):
        assemble("frob x1\n")


def test_assembler_pseudos_and_data():
    p = assemble("li x1, 1000\nla x2, buf\nj end\nend: halt\n.data\nbuf: .word 7, 8\nmsg: .wstr \"ab\"\n")
    st_ = iss_run(p.rom, p.ram)
    assert st_.halted and st_.regs[1] == 1000 and st_.regs[2] == p.symbols["buf"]
    assert st_.ram[0:4] == [7, 8, ord("a"), ord("b")]


def test_li_short_and_long():
    assert assemble("li x1, -5\n").code_size == 3
    assert assemble("li x1, 0x1234\n").code_size == 6
    assert iss_run(assemble("li x1, 0x8001\nhalt\n").rom).regs[1] == 0x8001


# -- ISS ----------------------------------------------------------------------------


def test_iss_halt_first_cycle():
    st_ = iss_run(assemble("halt\n").rom)
    assert st_.halted and st_.steps == 1 and st_.pc == 0


def test_iss_add_preloaded():
    st_ = iss_run(assemble("add x1, x1, x2\nhalt\n").rom, regs=[0, 40, 2] + [0] * 13)
    assert st_.regs[1] == 42


@pytest.mark.parametrize("name", CORPUS)
def test_iss_corpus(name):
    p = assemble(program_source(name))
    st_ = iss_run(p.rom, p.ram)
    assert st_.halted and st_.regs[8] == EXPECTED[name]
    assert st_.ram[p.symbols["result"] // 2] == EXPECTED[name]


def test_iss_semantics():
    src = """
        lsi  x1, -3
        lui  x2, 0x80
        sra  x2, x2, x3
        lsi  x4, 1
        sll  x4, x4, x5
        srl  x6, x6, x5
        sub  x7, x7, x1
        bltu x1, x4, bad
        blt  x4, x1, bad
jl:     jal  x9, there
bad:    lsi  x10, 1
there:  halt
    """
    p = assemble(src)
    st_ = iss_run(p.rom, regs=[0, 0, 0, 4, 0, 3, 0x80, 10] + [0] * 8)
    assert st_.regs[1] == 0xFFFD
    assert st_.regs[2] == 0xF800
    assert st_.regs[4] == 8 and st_.regs[6] == 0x10 and st_.regs[7] == 13
    assert st_.regs[10] == 0
    assert st_.regs[9] == p.symbols["jl"] + 3 and st_.pc == p.symbols["there"]


# -- netlist lockstep -----------------------------------------------------------


def _lanes_run(variant, rom, rams, regs, max_cycles):
    """Run len(rams) independent initial states as plain lanes of one netlist."""
    lanes = len(rams)
    m = Machine(variant, PlainBackend(lanes))
    init = {}
    per = [register_init(r) for r in regs]
    for name in per[0]:
        init[name] = np.array([p[name] for p in per], dtype=np.uint8)
    be = m.backend
    if m.memory == "gate":
        from hvp.cpu.machine import gate_memory_init

        bits = [gate_memory_init(rom, r) for r in rams]
        for name in bits[0]:
            init[name] = np.array([b[name] for b in bits], dtype=np.uint8)
        mems = {}
    else:
        ram = np.stack([image_to_bits(r, RAM_GEOMETRY) for r in rams], axis=2)
        mems = {"rom": be.rom_state(rom, 7), "ram": ram}
    s = m.engine.init_state(mems, init)
    halted = [None] * lanes
    while s.cycle < max_cycles and None in halted:
        s, _ = m.engine.run_cycle(s, {"reset": 1 if s.cycle == 0 else 0})
        f = m.flag_rows(s)[0]
        for j in range(lanes):
            if halted[j] is None and f[j]:
                halted[j] = s.cycle
    return [(m.registers(s, j), m.ram_image(s, j), halted[j]) for j in range(lanes)]


def _random_inits(name, p, rng, count):
    """Random registers and RAM, keeping program inputs in a range that halts."""
    data_end = 2 * (max(p.symbols.values(), default=-2) // 2 + 8)
    rams, regs = [], []
    for _ in range(count):
        ram = bytearray(rng.integers(0, 256, size=512, dtype=np.uint8).tobytes())
        ram[:data_end] = p.ram[:data_end]
        if name == "fibonacci":
            n = p.symbols["n"]
            ram[n : n + 2] = int(rng.integers(0, 24)).to_bytes(2, "little")
        elif name == "hamming":
            for lab in ("a", "b"):
                o = p.symbols[lab]
                ram[o : o + 4] = rng.integers(0, 256, 4, dtype=np.uint8).tobytes()
        rams.append(bytes(ram))
        regs.append([0] + [int(x) for x in rng.integers(0, 1 << 16, 15)])
    return rams, regs


@pytest.mark.parametrize("name", CORPUS)
def test_lockstep_randomized(name):
    p = assemble(program_source(name))
    rams, regs = _random_inits(name, p, np.random.default_rng(len(name)), 100)
    refs = [iss_run(p.rom, r, regs=g) for r, g in zip(rams, regs)]
    assert all(r.halted for r in refs)
    limit = 4 * max(r.steps for r in refs) + 20
    got = {v: _lanes_run(v, p.rom, rams, regs, limit) for v in ("ruby5", "pearl1")}
    for j, ref in enumerate(refs):
        for v in got:
            r_regs, r_ram, halt = got[v][j]
            assert halt is not None, (v, j)
            assert r_regs == ref.regs, (v, j)
            assert r_ram == ref.ram_bytes(), (v, j)
        assert got["ruby5"][j][2] >= got["pearl1"][j][2]


def _random_program(rng, length=24):
    """Straight-line code with forward branches only, ending in HALT."""
    kinds = sorted(R_FUNCT) + list(ALU_I) + ["lsi", "lui", "lw", "sw", "nop"] + list(BRANCHES) * 2 + ["jal"]
    draft = [str(rng.choice(kinds)) for _ in range(length)]
    sizes = [2 if k in R_FUNCT or k == "nop" else 3 for k in draft] + [3]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    code = b""
    for i, k in enumerate(draft):
        rd, rs = (int(x) for x in rng.integers(1 if k == "jal" else 0, 16, 2))
        if k in BRANCHES or k == "jal":
            tgt = int(rng.integers(i + 1, length + 1))
            ins = Instr(k, rd, 0 if k == "jal" else rs, int(offs[tgt] - offs[i]))
        elif k in R_FUNCT:
            ins = Instr(k, rd, rs)
        elif k == "nop":
            ins = Instr("nop")
        elif k == "lui":
            ins = Instr(k, rd, 0, int(rng.integers(256)))
        elif k == "lsi":
            ins = Instr(k, rd, 0, int(rng.integers(-128, 128)))
        else:
            ins = Instr(k, rd, rs, int(rng.integers(-128, 128)))
        code += encode(ins)
    return code + encode(Instr("jal", 0, 0, 0))


@pytest.mark.parametrize("variant", ["ruby5", "pearl1"])
def test_lockstep_random_programs(variant):
    rng = np.random.default_rng(99)
    for _ in range(40):
        rom = _random_program(rng)
        rams, regs = _random_inits("none", assemble("halt\n"), rng, 4)
        res = _lanes_run(variant, rom, rams, regs, 200)
        for (g_regs, g_ram, halt), ram, reg in zip(res, rams, regs):
            ref = iss_run(rom, ram, regs=reg)
            assert halt is not None and g_regs == ref.regs and g_ram == ref.ram_bytes()


def _run_plain(variant, rom, ram=b"", regs=None, max_cycles=400):
    m = Machine(variant)
    return m, m.run_until_halt(m.load(rom, ram, regs=regs), max_cycles)


@pytest.mark.parametrize("variant", ["ruby5", "pearl1"])
@pytest.mark.parametrize("offset", [0, 1, 2, 3])
@pytest.mark.parametrize("loop", [False, True])
def test_if_alignment(variant, offset, loop):
    # prefixes landing the next instruction at each byte offset of a block
    prefix = {0: "", 1: "addi x1, x1, 1\nnop\n", 2: "nop\n", 3: "addi x1, x1, 1\n"}[offset]
    body = "t: addi x2, x2, 7\nmov x3, x2\nxori x4, x2, -1\n"
    tail = "addi x5, x5, 1\nbne x5, x6, t\nhalt\n" if loop else "halt\n"
    p = assemble(prefix + body + tail)
    assert p.symbols["t"] % 4 == offset
    regs = [0, 0, 0, 0, 0, 0, 3] + [0] * 9
    ref = iss_run(p.rom, regs=regs)
    m, r = _run_plain(variant, p.rom, regs=regs)
    assert r.halted and m.registers(r.state) == ref.regs


@pytest.mark.parametrize("variant", ["ruby5", "pearl1"])
def test_x0_writes_discarded(variant):
    p = assemble("addi x0, x0, 5\nlui x0, 3\nlw x0, 0(x0)\nmov x1, x0\nadd x1, x1, x0\njal x0, next\nnext: halt\n.data\n.word 99\n")
    m, r = _run_plain(variant, p.rom, p.ram)
    assert r.halted and m.registers(r.state)[:2] == [0, 0]


@pytest.mark.parametrize("variant", ["ruby5", "pearl1"])
def test_termination_flag(variant):
    _, r = _run_plain(variant, encode(Instr("jal", 0, 0, 0)), max_cycles=20)
    assert r.halted
    # jal x0, +4 lands on a branch self-loop: never a halt
    rom = encode(Instr("jal", 0, 0, 4)) + b"\x04" + encode(Instr("beq", 0, 0, 0))
    _, r = _run_plain(variant, rom, max_cycles=60)
    assert not r.halted and r.cycles == 60
    _, r = _run_plain(variant, encode(Instr("beq", 0, 0, 0)), max_cycles=60)
    assert not r.halted


@pytest.mark.parametrize("variant", ["ruby5", "pearl1"])
def test_halt_is_stable(variant):
    p = assemble(program_source("fibonacci"))
    m = Machine(variant)
    r = m.run_until_halt(m.load(p.rom, p.ram), 200)
    before = (m.registers(r.state), m.ram_image(r.state))
    later = m.run(r.state, 10).state
    assert m.flag(later) == 1 and (m.registers(later), m.ram_image(later)) == before


def test_variant_structure():
    s5, s1 = netlist_stats(processor("ruby5")), netlist_stats(processor("pearl1"))
    assert s5["dff"] > s1["dff"]
    assert s5["g_max"] > s1["g_max"]
    for name in CORPUS:
        p = assemble(program_source(name))
        c5 = _run_plain("ruby5", p.rom, p.ram, max_cycles=5000)[1].cycles
        c1 = _run_plain("pearl1", p.rom, p.ram, max_cycles=5000)[1].cycles
        assert c5 >= c1


def test_gate_memory_variant_matches():
    p = assemble(program_source("hamming"))
    ref = iss_run(p.rom, p.ram)
    for v in ("ruby5-gatemem", "pearl1-gatemem"):
        m, r = _run_plain(v, p.rom, p.ram, max_cycles=600)
        assert r.halted and m.registers(r.state) == ref.regs and m.ram_image(r.state) == ref.ram_bytes()


# -- TFHE ---------------------------------------------------------------------------


def test_tfhe_tracks_plain_cycle_by_cycle(det_keys):
    sk, bk = det_keys
    p = assemble(program_source("fibonacci"))
    r = NoiseSampler(5, TEST_DET)
    plain = Machine("ruby5")
    ps = plain.load(p.rom, p.ram)
    enc = Machine("ruby5", TfheBackend(bk))
    es = enc.load(encrypt_rom(p.rom, sk, TEST_DET, r), encrypt_ram(p.ram, sk, RAM_GEOMETRY, TEST_DET, r))
    for _ in range(10):
        ps = plain.run(ps, 1).state
        es = enc.run(es, 1).state
        bits = tlwe_decrypt(TlweCiphertext(es.dff, 0, TEST_DET.name), sk)
        assert np.array_equal(bits, ps.dff[:, 0])
