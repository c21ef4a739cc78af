"""Encrypted ROM and RAM built from CMUX trees (leveled mode of TFHE)."""

from .cost import cost_estimate, rom_cmux_count
from .geometry import MemoryGeometry
from .ram import (
    EncryptedRam,
    GeometryError,
    RamAddress,
    address_to_trgsw,
    decrypt_ram,
    encrypt_ram,
    ram_control_unit,
    ram_cycle,
    ram_read_unit,
    ram_write_unit,
    read_to_tlwe,
)
from .rom import EncryptedRom, RomGeometry, decrypt_rom, encrypt_rom, rom_cycle, rom_read

__all__ = [name for name in dir() if not name.startswith("_")]
