"""Named TFHE parameter sets.

Two sets ship with the package:

``tfhe-80``
    The production set (labelled 80-bit security; no claim beyond that label).
``test-det``
    A tiny, noiseless set for deterministic CI runs.  It is **not secure** and
    exists purely to exercise the exact code paths quickly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# Levels: 0 = LWE level used by gates, 1 = ring level used by bootstrapping and
# CMUX memory, 2 = wide ring level used only inside circuit bootstrapping.
LEVELS = (0, 1, 2)


@dataclass(frozen=True)
class ParameterSet:
    name: str
    n: int
    N1: int
    N2: int
    l1: int
    Bgbit1: int
    l2: int
    Bgbit2: int
    alpha0: float
    alpha1: float
    alpha2: float
    ks_basebit: int
    ks_len: int
    pks_basebit: int
    pks_len: int
    # gadget of the TRGSW selectors produced by circuit bootstrapping
    cb_l: int
    cb_Bgbit: int
    poly_mult: str = "fft"  # "fft" or "exact"
    secure: bool = True
    mu: float = 1.0 / 8.0

    def __post_init__(self) -> None:
        for N in (self.N1, self.N2):
            if N <= 0 or N & (N - 1):
                raise ValueError(f"{self.name}: polynomial degree {N} is not a power of two")
        if self.mu != 1.0 / 8.0:
            raise ValueError("mu must be exactly 1/8")
        if self.l1 * self.Bgbit1 > 32 or self.cb_l * self.cb_Bgbit > 32:
            raise ValueError("level-1 gadget does not fit a 32-bit torus word")
        if self.l2 * self.Bgbit2 > 64:
            raise ValueError("level-2 gadget does not fit a 64-bit torus word")
        if self.ks_len * self.ks_basebit > 32 or self.pks_len * self.pks_basebit > 32:
            raise ValueError("key-switch precision exceeds the output torus word")
        alphas = (self.alpha0, self.alpha1, self.alpha2)
        if self.secure and min(alphas) <= 0:
            raise ValueError("noise must be strictly positive outside the test set")
        if min(alphas) < 0:
            raise ValueError("noise standard deviation cannot be negative")
        if self.poly_mult not in ("fft", "exact"):
            raise ValueError(f"unknown polynomial multiplier {self.poly_mult!r}")

    @property
    def Bg1(self) -> int:
        return 1 << self.Bgbit1

    @property
    def Bg2(self) -> int:
        return 1 << self.Bgbit2

    @property
    def ks_base(self) -> int:
        return 1 << self.ks_basebit

    @property
    def pks_base(self) -> int:
        return 1 << self.pks_basebit

    def dim(self, level: int) -> int:
        """LWE dimension (level 0) or ring degree (levels 1/2)."""
        return (self.n, self.N1, self.N2)[level]

    def alpha(self, level: int) -> float:
        return (self.alpha0, self.alpha1, self.alpha2)[level]

    def gadget(self, level: int) -> tuple[int, int]:
        if level == 1:
            return self.l1, self.Bgbit1
        if level == 2:
            return self.l2, self.Bgbit2
        raise ValueError("TRGSW only exists at levels 1 and 2")


def torus_dtype(level: int) -> type:
    return np.uint64 if level == 2 else np.uint32


def torus_bits(level: int) -> int:
    return 64 if level == 2 else 32


TFHE_80 = ParameterSet(
    name="tfhe-80",
    n=500,
    N1=1024,
    N2=2048,
    l1=2,
    Bgbit1=10,
    l2=4,
    Bgbit2=9,
    alpha0=2.44e-5,
    alpha1=3.73e-9,
    alpha2=2.0**-44,
    ks_basebit=2,
    ks_len=8,
    pks_basebit=3,
    pks_len=10,
    cb_l=3,
    cb_Bgbit=6,
    poly_mult="fft",
)

TEST_DET = ParameterSet(
    name="test-det",
    n=16,
    N1=64,
    N2=128,
    l1=2,
    Bgbit1=10,
    l2=4,
    Bgbit2=9,
    alpha0=0.0,
    alpha1=0.0,
    alpha2=0.0,
    ks_basebit=2,
    ks_len=8,
    pks_basebit=3,
    pks_len=10,
    cb_l=3,
    cb_Bgbit=6,
    poly_mult="exact",
    secure=False,
)

_REGISTRY = {p.name: p for p in (TFHE_80, TEST_DET)}


def get_params(name: str) -> ParameterSet:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown parameter set {name!r}; known: {sorted(_REGISTRY)}") from None


def register_params(params: ParameterSet) -> None:
    """Make a custom parameter set resolvable by name (used by serialization)."""
    _REGISTRY[params.name] = params


def known_params() -> list[str]:
    return sorted(_REGISTRY)


def derive(params: ParameterSet, name: str, **changes) -> ParameterSet:
    """Copy a parameter set under a new name and register it."""
    p = replace(params, name=name, **changes)
    register_params(p)
    return p
