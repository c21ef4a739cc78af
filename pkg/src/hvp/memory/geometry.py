from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class MemoryGeometry:
    """Address width ``v`` and word width ``w``; capacity is w * 2^v bits."""

    v: int = 8
    w: int = 16

    def __post_init__(self) -> None:
        if self.v < 1 or self.w < 1:
            raise ValueError("memory geometry needs v >= 1 and w >= 1")

    @property
    def words(self) -> int:
        return 1 << self.v

    @property
    def capacity_bits(self) -> int:
        return self.w << self.v

    @property
    def image_bytes(self) -> int:
        return (self.capacity_bits + 7) // 8
