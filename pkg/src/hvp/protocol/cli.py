"""``hvp`` command line: key generation, assembly, encryption, evaluation.

Client side: genkey, genbkey, asm, enc, dec.  Evaluator side: run, resume.
The evaluator commands only open bootstrapping keys, requests and
snapshots; a secret-key file handed to them is rejected before any work.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from ..cpu.asm import AsmError, assemble, disassemble
from ..cpu.isa import RAM_WORDS
from ..netlist.snapshot import SnapshotError
from ..tfhe import serialize
from ..tfhe.ciphertext import BootstrappingKey, SecretKey
from ..tfhe.crypto import gen_bootstrapping_key, gen_secret_key
from ..tfhe.params import get_params, known_params
from ..tfhe.sampler import DeterministicModeRefused, NoiseSampler
from ..tfhe.serialize import FormatError, atomic_write, read_file
from .flow import ProtocolError, decrypt_result, evaluate, make_request_packet, resume_flow, suggest_budget
from .packets import decode_request, decode_result, encode_request, encode_result


class CliError(RuntimeError):
    pass


def _sampler(args, params):
    if getattr(args, "seed", None) is None:
        return NoiseSampler()
    return NoiseSampler(args.seed, params, unsafe=args.unsafe_seed)


def _peek_tag(path) -> str:
    blob = read_file(path)
    if blob[:4] != serialize.MAGIC or len(blob) < 5:
        raise CliError(f"{path}: not an HVP1 file")
    return serialize.TAG_NAMES.get(blob[4], "unknown")


def _load_secret(path) -> SecretKey:
    return serialize.load(path, expect="secret_key")


def _load_public_key(path) -> BootstrappingKey:
    tag = _peek_tag(path)
    if tag == "secret_key":
        raise CliError(f"{path}: refusing to read a secret key; the evaluator accepts only a bootstrapping key")
    return serialize.load(path, expect="bootstrapping_key")


def _guard_not_secret(path) -> None:
    blob = read_file(path)
    if blob[:4] == serialize.MAGIC and len(blob) > 4 and serialize.TAG_NAMES.get(blob[4]) == "secret_key":
        raise CliError(f"{path}: refusing to read a secret key on the evaluator side")


def _progress(verbose: bool):
    if not verbose:
        return None

    def report(state, st):
        print(f"cycle {st.cycle}: {st.wall_time:.2f} s", file=sys.stderr)

    return report


# -- subcommands -------------------------------------------------------------


def cmd_genkey(args) -> int:
    params = get_params(args.params)
    sk = gen_secret_key(params, _sampler(args, params))
    atomic_write(args.output, serialize.dumps(sk))
    print(f"secret key ({params.name}) -> {args.output}")
    return 0


def cmd_genbkey(args) -> int:
    sk = _load_secret(args.input)
    t0 = time.perf_counter()
    bk = gen_bootstrapping_key(sk, _sampler(args, sk.params))
    atomic_write(args.output, serialize.dumps(bk))
    print(f"bootstrapping key ({sk.params.name}) -> {args.output} [{time.perf_counter() - t0:.1f} s]")
    return 0


def cmd_asm(args) -> int:
    prog = assemble(Path(args.source).read_text())
    ram_out = args.ram_out or str(Path(args.output).with_suffix(".ram"))
    atomic_write(args.output, prog.rom)
    atomic_write(ram_out, prog.ram)
    print(f"{prog.code_size} code bytes -> {args.output}; RAM image -> {ram_out}")
    if args.symbols:
        atomic_write(args.symbols, json.dumps(prog.symbols, indent=2, sort_keys=True).encode())
    return 0


def cmd_disasm(args) -> int:
    sys.stdout.write(disassemble(read_file(args.image), args.length))
    return 0


def cmd_enc(args) -> int:
    rom = read_file(args.rom)
    ram = read_file(args.ram_init) if args.ram_init else bytes(2 * RAM_WORDS)
    sk = params = None
    if args.provider == "secret":
        if not args.key:
            raise CliError("--provider secret needs -k/--key")
        sk = _load_secret(args.key)
        params = sk.params
    elif args.provider == "trivial":
        params = get_params(args.params) if args.params else (_load_secret(args.key).params if args.key else None)
        if params is None:
            raise CliError("--provider trivial needs --params (no key is used)")
    req = make_request_packet(rom, ram, args.cycles, args.variant, args.provider, sk, params, _sampler(args, params) if params else None)
    atomic_write(args.output, encode_request(req))
    print(f"request ({args.provider}, {args.variant}, {args.cycles} cycles) -> {args.output}")
    return 0


def cmd_run(args) -> int:
    _guard_not_secret(args.input)
    req = decode_request(read_file(args.input))
    if args.netlist and args.netlist != req.variant:
        raise CliError(f"request was prepared for {req.variant!r}, not {args.netlist!r}")
    bkey = None
    if req.provider != "plain":
        if not args.bkey:
            raise CliError("encrypted requests need --bkey")
        bkey = _load_public_key(args.bkey)
    elif args.bkey:
        _load_public_key(args.bkey)
    t0 = time.perf_counter()
    result, snap = evaluate(req, bkey, args.workers, args.snapshot or "", _progress(args.verbose))
    if args.snapshot:
        atomic_write(args.snapshot, snap)
    atomic_write(args.output, encode_result(result))
    print(f"ran {result.cycles} cycles of {req.variant} in {time.perf_counter() - t0:.1f} s -> {args.output}")
    return 0


def cmd_resume(args) -> int:
    _guard_not_secret(args.snapshot)
    blob = read_file(args.snapshot)
    bkey = _load_public_key(args.bkey) if args.bkey else None
    out_snap = args.snapshot_out or args.snapshot
    t0 = time.perf_counter()
    result, snap = resume_flow(blob, args.cycles, bkey, args.workers, out_snap, _progress(args.verbose))
    atomic_write(out_snap, snap)
    atomic_write(args.output, encode_result(result))
    print(f"resumed to cycle {result.cycles} in {time.perf_counter() - t0:.1f} s -> {args.output}")
    return 0


def format_report(rep) -> str:
    lines = [f"cycles: {rep.cycles}", f"flag: {rep.flag}", f"result (x8): {rep.result}"]
    for r in range(0, 16, 4):
        lines.append("  ".join(f"x{i:<2}= {rep.registers[i]:#06x}" for i in range(r, r + 4)))
    lines.append("ram:")
    used = len(rep.ram.rstrip(b"\0"))
    for off in range(0, max(16, (used + 15) // 16 * 16), 16):
        chunk = rep.ram[off : off + 16]
        lines.append(f"  {off:03x}: {chunk.hex(' ')}")
    if not rep.flag:
        lines.append(f"not finished: suggested next budget {suggest_budget(rep.cycles)} cycles (advisory)")
    lines.append("note: results carry no integrity guarantee; a wrong key decrypts to noise")
    return "\n".join(lines)


def cmd_dec(args) -> int:
    res = decode_result(read_file(args.input))
    sk = _load_secret(args.key) if args.key else None
    rep = decrypt_result(res, sk)
    if args.json:
        print(json.dumps({"cycles": rep.cycles, "flag": rep.flag, "result": rep.result, "registers": rep.registers, "ram": rep.ram.hex()}))
    else:
        print(format_report(rep))
    return 0


# -- parser --------------------------------------------------------------------


def _seed_opts(p) -> None:
    p.add_argument("--seed", help="fixed randomness seed (reproducible, insecure)")
    p.add_argument("--unsafe-seed", action="store_true", help="allow --seed with a secure parameter set")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hvp", description="Encrypted execution of MiniCAHP programs over TFHE.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("genkey", help="generate a secret key")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--params", default="tfhe-80", choices=known_params())
    _seed_opts(p)
    p.set_defaults(func=cmd_genkey)

    p = sub.add_parser("genbkey", help="derive the bootstrapping key from a secret key")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    _seed_opts(p)
    p.set_defaults(func=cmd_genbkey)

    p = sub.add_parser("asm", help="assemble a program into ROM and RAM images")
    p.add_argument("source")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--ram-out", help="RAM image path (default: output with .ram suffix)")
    p.add_argument("--symbols", help="write the symbol table as JSON")
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("disasm", help="disassemble a ROM image")
    p.add_argument("image")
    p.add_argument("--length", type=int, help="number of code bytes to decode")
    p.set_defaults(func=cmd_disasm)

    p = sub.add_parser("enc", help="build a request packet")
    p.add_argument("-k", "--key")
    p.add_argument("--rom", required=True)
    p.add_argument("--ram-init")
    p.add_argument("--cycles", type=int, required=True)
    p.add_argument("--provider", choices=("secret", "trivial", "plain"), default="secret")
    p.add_argument("--variant", default="ruby5")
    p.add_argument("--params", help="parameter set for the trivial provider")
    p.add_argument("-o", "--output", required=True)
    _seed_opts(p)
    p.set_defaults(func=cmd_enc)

    p = sub.add_parser("run", help="evaluate a request (evaluator side)")
    p.add_argument("--bkey")
    p.add_argument("--netlist", help="processor variant; must match the request")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--snapshot")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("dec", help="decrypt a result packet")
    p.add_argument("-k", "--key")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_dec)

    p = sub.add_parser("resume", help="continue from a snapshot (evaluator side)")
    p.add_argument("--bkey")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--snapshot-out", help="where to write the new snapshot (default: overwrite)")
    p.add_argument("--cycles", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_resume)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DeterministicModeRefused, FormatError, SnapshotError, ProtocolError, AsmError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"hvp {args.command}: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
