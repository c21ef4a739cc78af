import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hvp.cpu import assemble, program_source
from hvp.protocol import (
    PacketError,
    ProtocolError,
    ResultPacket,
    decode_request,
    decode_result,
    decrypt_result,
    encode_request,
    encode_result,
    evaluate,
    make_request_packet,
    resume_flow,
    suggest_budget,
)
from hvp.protocol.cli import main
from hvp.tfhe import TEST_DET, NoiseSampler, gen_secret_key
from hvp.tfhe import serialize

CORPUS = ("fibonacci", "hamming", "bf")
EXPECTED = {"fibonacci": 5, "hamming": 24, "bf": 42}
BUDGET = {"fibonacci": 100, "hamming": 300, "bf": 2000}


def _prog(name):
    return assemble(program_source(name))


def _same_report(a, b):
    return (a.cycles, a.flag, a.registers, a.ram) == (b.cycles, b.flag, b.registers, b.ram)


# -- packets ------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(
    st.binary(max_size=512),
    st.binary(max_size=512),
    st.integers(1, 2**40),
    st.sampled_from(["ruby5", "pearl1", "ruby5-gatemem", "pearl1-gatemem"]),
)
def test_plain_request_round_trip(rom, ram, cycles, variant):
    req = make_request_packet(rom, ram, cycles, variant, "plain")
    back = decode_request(encode_request(req))
    assert (back.variant, back.provider, back.cycles, back.params_name) == (variant, "plain", cycles, "")
    assert back.rom == req.rom and back.ram == req.ram
    assert list(back.dff_init) == list(req.dff_init)
    assert all(np.array_equal(back.dff_init[k], req.dff_init[k]) for k in req.dff_init)


def test_encrypted_request_round_trip(det_keys):
    sk, _ = det_keys
    p = _prog("fibonacci")
    req = make_request_packet(p.rom, p.ram, 10, "pearl1", "secret", sk, sampler=NoiseSampler(1, TEST_DET))
    back = decode_request(encode_request(req))
    assert back.params_name == "test-det"
    assert np.array_equal(back.rom.luts, req.rom.luts) and np.array_equal(back.ram.cells, req.ram.cells)
    gate = make_request_packet(p.rom, p.ram, 10, "pearl1-gatemem", "trivial", params=TEST_DET)
    gback = decode_request(encode_request(gate))
    assert gback.rom is None and len(gback.dff_init) == len(gate.dff_init) > 8000


def test_packet_validation():
    p = _prog("fibonacci")
    with pytest.raises(PacketError):
        make_request_packet(p.rom, p.ram, 0, "pearl1", "plain")
    with pytest.raises(PacketError):
        make_request_packet(p.rom, p.ram, 5, "ruby9", "plain")
    with pytest.raises(PacketError):
        make_request_packet(p.rom, p.ram, 5, "ruby5", "psychic")
    with pytest.raises(ProtocolError):
        make_request_packet(p.rom, p.ram, 5, "ruby5", "secret")
    with pytest.raises(ProtocolError):
        make_request_packet(b"\0" * 513, p.ram, 5, "ruby5", "plain")
    with pytest.raises(PacketError):
        ResultPacket("", "ruby5", 3, None, np.zeros((15, 16, 1)), np.zeros((256, 16, 1)), "plain")


def test_packet_version_checked():
    req = make_request_packet(b"", b"", 5, "ruby5", "plain")
    req.version = 99
    with pytest.raises(PacketError, match="version"):
        decode_request(encode_request(req))
    blob = encode_request(make_request_packet(b"", b"", 5, "ruby5", "plain"))
    with pytest.raises(serialize.FormatError):
        decode_result(blob)


def test_result_round_trip_plain():
    p = _prog("hamming")
    res, _ = evaluate(make_request_packet(p.rom, p.ram, 300, "ruby5", "plain"))
    back = decode_result(encode_result(res))
    assert _same_report(decrypt_result(back), decrypt_result(res))
    rep = decrypt_result(back)
    assert rep.flag == 1 and rep.result == 24 and rep.suggested_budget() is None


# -- budgets, snapshots, resume ----------------------------------------------------


def test_suggest_budget():
    assert suggest_budget(100) == 200 and suggest_budget(0) == 1


@pytest.mark.parametrize("variant", ["ruby5", "pearl1", "pearl1-gatemem"])
@pytest.mark.parametrize("name", CORPUS)
def test_plain_split_budget_and_flag_loop(name, variant):
    p = _prog(name)
    total = BUDGET[name]
    full, _ = evaluate(make_request_packet(p.rom, p.ram, total, variant, "plain"))
    ref = decrypt_result(full)
    assert ref.flag == 1 and ref.result == EXPECTED[name]
    # flag loop: start small, resume with the advisory budget until finished
    res, snap = evaluate(make_request_packet(p.rom, p.ram, 10, variant, "plain"))
    rep = decrypt_result(res)
    rounds = 0
    while not rep.flag:
        extra = rep.suggested_budget() - rep.cycles
        res, snap = resume_flow(snap, extra)
        rep = decrypt_result(res)
        rounds += 1
    assert rounds >= 1 and rep.result == EXPECTED[name]
    # split budget: same total cycles, bit-exact architectural state
    k = 17
    part, snap = evaluate(make_request_packet(p.rom, p.ram, k, variant, "plain"))
    rest, _ = resume_flow(snap, total - k)
    assert _same_report(decrypt_result(rest), ref)


def test_resume_zero_cycles_is_identity():
    p = _prog("fibonacci")
    res, snap = evaluate(make_request_packet(p.rom, p.ram, 12, "ruby5", "plain"))
    again, snap2 = resume_flow(snap, 0)
    assert encode_result(again) == encode_result(res) and snap2 == snap
    with pytest.raises(ProtocolError):
        resume_flow(snap, -1)


def test_tfhe_split_budget_bit_exact(det_keys):
    sk, bk = det_keys
    p = _prog("fibonacci")
    req = make_request_packet(p.rom, p.ram, 6, "pearl1", "secret", sk, sampler=NoiseSampler(3, TEST_DET))
    full, _ = evaluate(req, bk)
    req.cycles = 2
    part, snap = evaluate(req, bk)
    rest, _ = resume_flow(snap, 4, bk)
    assert encode_result(rest) == encode_result(full)
    plain, _ = evaluate(make_request_packet(p.rom, p.ram, 6, "pearl1", "plain"))
    assert _same_report(decrypt_result(rest, sk), decrypt_result(plain))


def test_trivial_provider_matches_plain(det_keys):
    _, bk = det_keys
    p = _prog("fibonacci")
    req = make_request_packet(p.rom, p.ram, 5, "ruby5", "trivial", params=TEST_DET)
    res, _ = evaluate(req, bk)
    other = gen_secret_key(TEST_DET, NoiseSampler(77, TEST_DET))
    plain, _ = evaluate(make_request_packet(p.rom, p.ram, 5, "ruby5", "plain"))
    assert _same_report(decrypt_result(res, other), decrypt_result(plain))


def test_wrong_key_gives_noise(det_keys):
    sk, bk = det_keys
    p = _prog("fibonacci")
    res, _ = evaluate(make_request_packet(p.rom, p.ram, 1, "pearl1", "secret", sk, sampler=NoiseSampler(4, TEST_DET)), bk)
    good = decrypt_result(res, sk)
    bad = decrypt_result(res, gen_secret_key(TEST_DET, NoiseSampler(5, TEST_DET)))
    assert good.ram == p.ram
    assert bad.ram != good.ram
    diff = np.unpackbits(np.frombuffer(bytes(a ^ b for a, b in zip(bad.ram, good.ram)), np.uint8))
    assert 0.3 < diff.mean() < 0.7


def test_evaluator_key_checks(det_keys):
    sk, bk = det_keys
    p = _prog("fibonacci")
    req = make_request_packet(p.rom, p.ram, 1, "pearl1", "secret", sk, sampler=NoiseSampler(6, TEST_DET))
    with pytest.raises(ProtocolError):
        evaluate(req)
    with pytest.raises(ProtocolError):
        evaluate(req, sk)
    res, _ = evaluate(req, bk)
    with pytest.raises(ProtocolError):
        decrypt_result(res)


# -- CLI -------------------------------------------------------------------------


def _cli(*args):
    return main([str(a) for a in args])


def test_cli_end_to_end_tfhe(tmp_path, capsys):
    d = tmp_path
    src = d / "fib.s"
    src.write_text(program_source("fibonacci"))
    assert _cli("genkey", "-o", d / "k.bin", "--params", "test-det", "--seed", 1) == 0
    assert _cli("genbkey", "-i", d / "k.bin", "-o", d / "b.bin", "--seed", 2) == 0
    assert _cli("asm", src, "-o", d / "fib.rom", "--symbols", d / "sym.json") == 0
    assert json.loads((d / "sym.json").read_text())["n"] == 0
    assert _cli("enc", "-k", d / "k.bin", "--rom", d / "fib.rom", "--ram-init", d / "fib.ram", "--cycles", 4, "--variant", "pearl1", "-o", d / "req.bin", "--seed", 3) == 0
    assert _cli("run", "--bkey", d / "b.bin", "--netlist", "pearl1", "-i", d / "req.bin", "-o", d / "res.bin", "--snapshot", d / "snap.bin") == 0
    capsys.readouterr()
    assert _cli("dec", "-k", d / "k.bin", "-i", d / "res.bin") == 0
    out = capsys.readouterr().out
    assert "flag: 0" in out and "suggested next budget 8" in out
    assert _cli("resume", "--bkey", d / "b.bin", "--snapshot", d / "snap.bin", "--cycles", 3, "-o", d / "res2.bin") == 0
    capsys.readouterr()
    assert _cli("dec", "-k", d / "k.bin", "-i", d / "res2.bin", "--json") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["cycles"] == 7 and rep["flag"] == 0


def test_cli_plain_flag_loop(tmp_path, capsys):
    d = tmp_path
    (d / "h.s").write_text(program_source("hamming"))
    assert _cli("asm", d / "h.s", "-o", d / "h.rom") == 0
    assert _cli("enc", "--provider", "plain", "--rom", d / "h.rom", "--ram-init", d / "h.ram", "--cycles", 100, "-o", d / "req.bin") == 0
    assert _cli("run", "-i", d / "req.bin", "-o", d / "res.bin", "--snapshot", d / "s.bin") == 0
    assert _cli("resume", "--snapshot", d / "s.bin", "--cycles", 200, "-o", d / "res.bin") == 0
    capsys.readouterr()
    assert _cli("dec", "-i", d / "res.bin", "--json") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["flag"] == 1 and rep["result"] == 24


def test_cli_disasm(tmp_path, capsys):
    (tmp_path / "x.s").write_text("addi x1, x0, 5\nhalt\n")
    assert _cli("asm", tmp_path / "x.s", "-o", tmp_path / "x.rom") == 0
    capsys.readouterr()
    assert _cli("disasm", tmp_path / "x.rom", "--length", 6) == 0
    assert capsys.readouterr().out == "addi x1, x0, 5\njal x0, 0\n"


def test_cli_rejects_secret_key_on_evaluator(tmp_path, capsys):
    d = tmp_path
    assert _cli("genkey", "-o", d / "k.bin", "--params", "test-det", "--seed", 1) == 0
    (d / "x.s").write_text("halt\n")
    assert _cli("asm", d / "x.s", "-o", d / "x.rom") == 0
    assert _cli("enc", "-k", d / "k.bin", "--rom", d / "x.rom", "--cycles", 2, "-o", d / "req.bin", "--seed", 2) == 0
    capsys.readouterr()
    assert _cli("run", "--bkey", d / "k.bin", "-i", d / "req.bin", "-o", d / "res.bin") == 1
    assert "refusing to read a secret key" in capsys.readouterr().err
    assert _cli("run", "--bkey", d / "k.bin", "-i", d / "k.bin", "-o", d / "res.bin") == 1
    assert _cli("resume", "--bkey", d / "k.bin", "--snapshot", d / "k.bin", "--cycles", 1, "-o", d / "r.bin") == 1
    assert "refusing" in capsys.readouterr().err
    assert not (d / "res.bin").exists() and not (d / "r.bin").exists()


def test_cli_errors(tmp_path, capsys):
    assert _cli("genkey", "-o", tmp_path / "k.bin", "--params", "tfhe-80", "--seed", 1) == 1
    (tmp_path / "bad.s").write_text("beq x1, x2, nowhere\n")
    assert _cli("asm", tmp_path / "bad.s", "-o", tmp_path / "bad.rom") == 1
    assert "undefined" in capsys.readouterr().err
    assert _cli("dec", "-i", tmp_path / "missing.bin") == 1
