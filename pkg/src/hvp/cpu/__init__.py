"""MiniCAHP: ISA, assembler, instruction-set simulator and processor netlists."""

from pathlib import Path

from .asm import AsmError, Program, assemble, disassemble, format_instr
from .isa import RAM_WORDS, RESULT_REG, ROM_BYTES, EncodingError, Instr, decode, encode
from .iss import IssError, IssState, iss_run
from .machine import Machine, RunResult, processor
from .netlist import VARIANTS, build_netlist

PROGRAMS = Path(__file__).parent / "programs"


def program_source(name: str) -> str:
    """Source of a bundled program (``fibonacci``, ``hamming`` or ``bf``)."""
    return (PROGRAMS / f"{name}.s").read_text()


__all__ = [name for name in dir() if not name.startswith("_")]
