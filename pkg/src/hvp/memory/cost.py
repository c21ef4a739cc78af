"""Closed-form cost model in homomorphic-gate equivalents.

A circuit bootstrap costs about 10 gate bootstraps and a sample-extract plus
key switch about one, which gives the CMUX-memory estimates below.
"""

from __future__ import annotations

from .geometry import MemoryGeometry

KINDS = ("cmux_ram", "cmux_rom", "gate_ram_lower_bound")


def cost_estimate(geometry: MemoryGeometry, kind: str) -> dict:
    v, w = geometry.v, geometry.w
    if kind == "cmux_rom":
        return {"gates": 10 * v + w, "circuit_bootstraps": v}
    if kind == "cmux_ram":
        return {
            "gates": 10 * v + w * ((1 << v) + 1),
            "circuit_bootstraps": v,
            "cmux_read": w * ((1 << v) - 1),
            "cmux_write": w * (1 << v) * v,
        }
    if kind == "gate_ram_lower_bound":
        return {"gates": w * 2 * ((1 << v) - 1)}
    raise ValueError(f"unknown cost kind {kind!r}; expected one of {KINDS}")


def rom_cmux_count(size_bytes: int, N: int) -> int:
    from .rom import RomGeometry

    return RomGeometry(size_bytes, N).cmux_per_read
