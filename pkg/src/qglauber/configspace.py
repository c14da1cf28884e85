"""Bit-level spin configurations on a periodic chain.

Site ``q`` is stored in bit ``q`` of an integer; a set bit means spin down.
The configuration index is therefore the binary number ``s_{N-1} ... s_0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

MAX_EXACT_SITES = 12
MAX_TRAJECTORY_SITES = 24


@dataclass(frozen=True)
class SpinConfig:
    bits: int
    n_sites: int

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        if self.bits < 0 or self.bits >> self.n_sites:
            raise ValueError(
                f"bits {self.bits:#x} do not fit in {self.n_sites} sites")

    @classmethod
    def from_string(cls, s: str) -> "SpinConfig":
        """Parse a ket label such as ``'0101'`` (leftmost char is the highest site)."""
        return cls(int(s, 2), len(s))

    def __str__(self):
        return format(self.bits, f"0{self.n_sites}b")

    def complement(self) -> "SpinConfig":
        return SpinConfig(self.bits ^ ((1 << self.n_sites) - 1), self.n_sites)


@dataclass(frozen=True)
class ChainGeometry:
    n_sites: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.boundary != "periodic":
            raise ValueError("only periodic boundaries are supported")
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def require_dynamics(self):
        """Raise unless the chain is usable for a dynamics run (N >= 4, even)."""
        if self.n_sites < 4 or self.n_sites % 2:
            raise ValueError(
                f"dynamics need an even chain length >= 4, got {self.n_sites}")


def hamming_distance(a: SpinConfig, b: SpinConfig) -> int:
    if a.n_sites != b.n_sites:
        raise ValueError(
            f"configurations have different lengths ({a.n_sites} vs {b.n_sites})")
    return (a.bits ^ b.bits).bit_count()


def domain_wall_count(c: SpinConfig, g: ChainGeometry | None = None) -> int:
    """Number of unequal nearest-neighbour pairs, wrap-around pair included."""
    n = c.n_sites if g is None else g.n_sites
    if g is not None and c.n_sites != g.n_sites:
        raise ValueError("configuration does not match the chain geometry")
    rotated = ((c.bits >> 1) | ((c.bits & 1) << (n - 1)))
    return (c.bits ^ rotated).bit_count()


def magnetization(c: SpinConfig) -> int:
    return c.n_sites - 2 * c.bits.bit_count()


def zero_magnetization_ensemble(g: ChainGeometry) -> list[SpinConfig]:
    """All configurations with N/2 spins down, in increasing index order."""
    n = g.n_sites
    if n % 2:
        raise ValueError(f"zero magnetization needs an even chain, got N={n}")
    return [SpinConfig(int(b), n) for b in zero_magnetization_indices(n)]


def sample_zero_magnetization(g: ChainGeometry, rng_seed) -> SpinConfig:
    """Draw one zero-magnetization configuration uniformly at random.

    ``rng_seed`` may be an integer seed, a ``SeedSequence`` or a ``Generator``.
    """
    n = g.n_sites
    if n % 2:
        raise ValueError(f"zero magnetization needs an even chain, got N={n}")
    rng = np.random.default_rng(rng_seed)
    down = rng.choice(n, size=n // 2, replace=False)
    return SpinConfig(int(np.sum(np.left_shift(1, down, dtype=np.int64))), n)


# Vectorised tables over the full 2^N configuration space.

@lru_cache(maxsize=None)
def popcounts(n_sites: int) -> np.ndarray:
    idx = np.arange(1 << n_sites, dtype=np.int64)
    out = np.zeros_like(idx)
    for q in range(n_sites):
        out += (idx >> q) & 1
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def domain_wall_table(n_sites: int) -> np.ndarray:
    """``n_D(j)`` for every configuration index ``j`` of a periodic chain."""
    idx = np.arange(1 << n_sites, dtype=np.int64)
    rotated = (idx >> 1) | ((idx & 1) << (n_sites - 1))
    diff = idx ^ rotated
    out = np.zeros_like(idx)
    for q in range(n_sites):
        out += (diff >> q) & 1
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def zero_magnetization_indices(n_sites: int) -> np.ndarray:
    if n_sites % 2:
        raise ValueError(f"zero magnetization needs an even chain, got N={n_sites}")
    idx = sorted(sum(1 << q for q in combo)
                 for combo in combinations(range(n_sites), n_sites // 2))
    out = np.array(idx, dtype=np.int64)
    out.setflags(write=False)
    return out
