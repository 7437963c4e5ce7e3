"""Occupation-number basis of a spinless-fermion chain at fixed particle number.

Sites carry the labels ``-N/2+1, ..., N/2``.  Site ``l`` is stored in bit
position ``l + N/2 - 1`` of an integer bitstring, so the left half
(sites ``-N/2+1 .. 0``) occupies the low bits and the right half
(sites ``1 .. N/2``) the high bits.  States are kept in ascending integer
order, which makes every derived array reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

#: Largest sector dimension :func:`build_sector` accepts by default.
DEFAULT_MAX_DIM = 60_000_000


class SectorTooLargeError(ValueError):
    """Requested sector exceeds the configured memory budget."""


@dataclass(frozen=True, eq=False)
class FockSector:
    """Fixed-particle-number sector of an ``n_sites`` chain.

    ``states`` is a read-only, strictly ascending ``int64`` array of
    bitstrings with exactly ``n_particles`` set bits.
    """

    n_sites: int
    n_particles: int
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return int(self.states.shape[0])

    @property
    def half(self) -> int:
        return self.n_sites // 2

    def bit_of_site(self, site: int) -> int:
        """Bit position holding site label ``site``."""
        if not -self.half + 1 <= site <= self.half:
            raise ValueError(
                f"site {site} outside lattice [{-self.half + 1}, {self.half}]"
            )
        return site + self.half - 1

    def site_of_bit(self, bit: int) -> int:
        return bit - self.half + 1

    @property
    def sites(self) -> list[int]:
        return list(range(-self.half + 1, self.half + 1))

    def occupation(self, site: int) -> np.ndarray:
        """0/1 occupation of ``site`` for every basis state."""
        return ((self.states >> self.bit_of_site(site)) & 1).astype(np.int8)

    def index_of(self, bits):
        """Position of ``bits`` (scalar or array) in :attr:`states`.

        Raises ``KeyError`` if any bitstring is not a member of the sector.
        """
        return index_of(self, bits)


@dataclass(frozen=True, eq=False)
class RightCountMask:
    """Right-half particle count ``N_R`` of every basis state."""

    counts: np.ndarray = field(repr=False)
    n_max: int

    def mask(self, r: int) -> np.ndarray:
        return self.counts == r

    def indices(self, r: int) -> np.ndarray:
        return np.flatnonzero(self.counts == r)

    @property
    def subdims(self) -> dict[int, int]:
        values = np.bincount(self.counts, minlength=self.n_max + 1)
        return {r: int(v) for r, v in enumerate(values)}


def _combinations_sorted(n_bits: int, k: int) -> np.ndarray:
    # table[j] holds the sorted j-particle states on the bits seen so far;
    # adding bit b on top keeps order: states without it are all smaller.
    table: dict[int, np.ndarray] = {0: np.zeros(1, dtype=np.int64)}
    for b in range(n_bits):
        remaining = n_bits - b - 1
        new: dict[int, np.ndarray] = {}
        top = np.int64(1) << np.int64(b)
        for j in range(max(0, k - remaining), min(k, b + 1) + 1):
            parts = []
            if j in table:
                parts.append(table[j])
            if j - 1 in table:
                parts.append(table[j - 1] | top)
            new[j] = np.concatenate(parts) if len(parts) > 1 else parts[0]
        table = new
    return table[k]


def build_sector(
    n_sites: int, n_particles: int, *, max_dim: int = DEFAULT_MAX_DIM
) -> FockSector:
    """Enumerate the ``n_particles`` sector of an ``n_sites`` chain.

    Parameters
    ----------
    n_sites : int
        Even number of lattice sites, at most 62.
    n_particles : int
        Particle number, ``0 <= n_particles <= n_sites``.
    max_dim : int
        Refuse sectors larger than this many states.
    """
    if n_sites <= 0 or n_sites % 2:
        raise ValueError(f"number of sites must be a positive even integer, got {n_sites}")
    if n_sites > 62:
        raise ValueError("at most 62 sites fit an int64 bitstring")
    if not 0 <= n_particles <= n_sites:
        raise ValueError(f"particle number {n_particles} outside [0, {n_sites}]")
    dim = comb(n_sites, n_particles)
    if dim > max_dim:
        raise SectorTooLargeError(
            f"sector N={n_sites}, n={n_particles} has dimension {dim} "
            f"(~{dim * 8 / 2**20:.0f} MiB of bitstrings), above the budget of {max_dim}"
        )
    states = _combinations_sorted(n_sites, n_particles)
    states.setflags(write=False)
    return FockSector(n_sites, n_particles, states)


def half_filling(n_sites: int, **kwargs) -> FockSector:
    return build_sector(n_sites, n_sites // 2, **kwargs)


def index_of(sector: FockSector, bits):
    """Binary-search lookup of bitstring(s) in the canonical basis."""
    scalar = np.ndim(bits) == 0
    query = np.atleast_1d(np.asarray(bits, dtype=np.int64))
    idx = np.searchsorted(sector.states, query)
    clipped = np.minimum(idx, sector.dim - 1)
    found = (idx < sector.dim) & (sector.states[clipped] == query)
    if not np.all(found):
        missing = query[~found][0]
        raise KeyError(f"bitstring {int(missing):#b} not in sector")
    return int(idx[0]) if scalar else idx


def right_count(sector: FockSector) -> RightCountMask:
    """Count particles on sites ``1 .. N/2`` (the high half of the bits)."""
    counts = np.bitwise_count(sector.states >> sector.half).astype(np.int64)
    counts.setflags(write=False)
    n_max = min(sector.half, sector.n_particles)
    return RightCountMask(counts, n_max)
