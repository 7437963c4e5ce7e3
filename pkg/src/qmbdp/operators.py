"""Sparse Hamiltonians and diagonal observables of the single-impurity chain.

The model is

    H = -sum_l [ J/2 (c_l^+ c_{l+1} + h.c.) + Delta n_l n_{l+1} ] + eps0 n_0

on sites ``l = -N/2+1 .. N/2`` with open boundaries.  ``H1`` is the single
hop across the bond (0, 1) between the two halves and ``H0 = H - H1``.
Nearest-neighbour hops cross no intermediate site, so with Jordan-Wigner
ordering along the chain every hopping element is ``-J/2`` with sign +1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fock import FockSector, right_count


@dataclass(frozen=True)
class HamiltonianParams:
    """Couplings of the chain, all in units where ``J`` sets the scale."""

    J: float = 1.0
    delta: float = 1.0
    eps0: float = 0.5
    boundary_hop: bool = True

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError(f"hopping J must be positive, got {self.J}")
        if not (np.isfinite(self.delta) and np.isfinite(self.eps0)):
            raise ValueError("delta and eps0 must be finite")


def _bonds(sector: FockSector, boundary_hop: bool):
    cut = sector.half - 1  # bit of site 0; bond (cut, cut+1) joins the halves
    for b in range(sector.n_sites - 1):
        if b == cut and not boundary_hop:
            continue
        yield b


def _hopping_triplets(sector: FockSector, bonds, amplitude: float):
    rows, cols = [], []
    states = sector.states
    for b in bonds:
        pair = (np.int64(1) << b) | (np.int64(1) << (b + 1))
        # exactly one of the two sites occupied -> hop moves the particle
        occ = (states >> b) & 3
        src = np.flatnonzero((occ == 1) | (occ == 2))
        dst = sector.index_of(states[src] ^ pair)
        rows.append(dst)
        cols.append(src)
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return rows, cols, np.full(rows.shape, amplitude)


def interaction_diagonal(sector: FockSector, params: HamiltonianParams) -> np.ndarray:
    """Diagonal of H: ``-Delta * (#adjacent occupied pairs) + eps0 * n_0``."""
    states = sector.states
    bonds_mask = np.int64((1 << (sector.n_sites - 1)) - 1)
    pairs = np.bitwise_count(states & (states >> 1) & bonds_mask).astype(float)
    diag = -params.delta * pairs
    diag += params.eps0 * sector.occupation(0)
    return diag


def build_hamiltonian(sector: FockSector, params: HamiltonianParams) -> sp.csr_matrix:
    """Real symmetric CSR matrix of H (or H0 when ``params.boundary_hop`` is False)."""
    rows, cols, vals = _hopping_triplets(
        sector, _bonds(sector, params.boundary_hop), -params.J / 2
    )
    diag = interaction_diagonal(sector, params)
    idx = np.arange(sector.dim)
    H = sp.csr_matrix(
        (np.concatenate([vals, diag]), (np.concatenate([rows, idx]), np.concatenate([cols, idx]))),
        shape=(sector.dim, sector.dim),
    )
    H.sort_indices()
    return H


def build_h0(sector: FockSector, params: HamiltonianParams) -> sp.csr_matrix:
    return build_hamiltonian(sector, _with_hop(params, False))


def build_h1(sector: FockSector, params: HamiltonianParams) -> sp.csr_matrix:
    """The hop across the central bond, connecting ``N_R`` to ``N_R +- 1``."""
    cut = sector.half - 1
    rows, cols, vals = _hopping_triplets(sector, [cut], -params.J / 2)
    H1 = sp.csr_matrix((vals, (rows, cols)), shape=(sector.dim, sector.dim))
    H1.sort_indices()
    return H1


def _with_hop(params: HamiltonianParams, hop: bool) -> HamiltonianParams:
    return HamiltonianParams(params.J, params.delta, params.eps0, hop)


@dataclass(frozen=True)
class DiagonalMask:
    """0/1 diagonal projector over a sector; ``values`` is the P side."""

    values: np.ndarray

    @property
    def complement(self) -> "DiagonalMask":
        return DiagonalMask((1 - self.values).astype(np.int8))

    @property
    def dim(self) -> int:
        return int(np.count_nonzero(self.values))

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Return the projected state (works on ``(D,)`` and ``(D, k)`` arrays)."""
        m = self.values.astype(bool)
        out = psi.copy()
        out[~m] = 0
        return out


def projector_mask(sector: FockSector, sites) -> DiagonalMask:
    """Product of occupations over ``sites``; empty list gives the identity."""
    values = np.ones(sector.dim, dtype=np.int8)
    for s in sites:
        values &= sector.occupation(s)
    return DiagonalMask(values)


def detector_masks(sector: FockSector, p: int, q: int) -> tuple[DiagonalMask, DiagonalMask]:
    """``(P, Q)`` for the simultaneous-click signal ``P = n_p n_q``."""
    P = projector_mask(sector, [p, q])
    return P, P.complement


def observable_diag(sector: FockSector, kind) -> np.ndarray:
    """Diagonal of ``n_site`` (``kind`` an int site label) or of ``N_R`` (``kind='NR'``)."""
    if kind == "NR" or kind == "right":
        return right_count(sector).counts.astype(float)
    if isinstance(kind, (int, np.integer)):
        return sector.occupation(int(kind)).astype(float)
    raise ValueError(f"unknown observable {kind!r}")


def expectation(diag: np.ndarray, psi: np.ndarray) -> float:
    return float(np.dot(diag, np.abs(psi) ** 2))


# Spin-1/2 cross-check ----------------------------------------------------

_SX = np.array([[0.0, 1.0], [1.0, 0.0]])
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_SZ = np.array([[-1.0, 0.0], [0.0, 1.0]])  # basis |0>=empty, |1>=occupied
_ID = np.eye(2)


def _site_op(op: np.ndarray, bit: int, n: int) -> sp.csr_matrix:
    # kron ordering puts bit n-1 leftmost so that the integer index of a
    # product state equals its bitstring
    factors = [op if b == bit else _ID for b in reversed(range(n))]
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)


def build_spin_equivalent(sector: FockSector, params: HamiltonianParams) -> sp.csr_matrix:
    """XXZ form of H built from Pauli matrices, restricted to the sector.

    ``sigma^z = 2n - 1`` with up meaning occupied:
    ``-J/2 (c^+c + h.c.) -> -J/4 (XX + YY)``,
    ``-Delta n n -> -Delta/4 (ZZ + Z + Z + 1)``, ``eps0 n -> eps0/2 (Z + 1)``.
    Used only to validate the fermionic sign convention; dense in ``2**N``.
    """
    n = sector.n_sites
    if n > 14:
        raise ValueError("spin cross-check is limited to N <= 14")
    full = 2**n
    H = sp.csr_matrix((full, full), dtype=complex)
    ops = {name: [_site_op(m, b, n) for b in range(n)] for name, m in
           (("x", _SX), ("y", _SY), ("z", _SZ))}
    eye = sp.identity(full, format="csr")
    for b in _bonds(sector, params.boundary_hop):
        H = H - params.J / 4 * (ops["x"][b] @ ops["x"][b + 1] + ops["y"][b] @ ops["y"][b + 1])
    for b in range(n - 1):
        H = H - params.delta / 4 * (ops["z"][b] @ ops["z"][b + 1] + ops["z"][b] + ops["z"][b + 1] + eye)
    H = H + params.eps0 / 2 * (ops["z"][sector.bit_of_site(0)] + eye)
    idx = sector.states
    sub = H[idx][:, idx]
    if sub.nnz and abs(sub.imag).max() > 1e-14:
        raise AssertionError("spin Hamiltonian has imaginary entries in the sector")
    return sp.csr_matrix(sub.real)


def dump_triplets(op: sp.spmatrix, path: str | Path) -> None:
    """Write ``row col value`` lines (0-based, row-major) for external checks."""
    coo = sp.coo_matrix(op)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# dim {op.shape[0]} nnz {coo.nnz}\n")
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")


def load_triplets(path: str | Path) -> sp.csr_matrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        dim = int(header[2])
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((dim, dim))
    return sp.csr_matrix(
        (data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(dim, dim)
    )
