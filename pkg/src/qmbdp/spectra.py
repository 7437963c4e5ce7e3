"""Dense spectra of the cut Hamiltonian ``H0`` in sectors of fixed ``N_R``.

Provides the van Vleck gap parameter

    g_alpha = max_nu | <E_alpha^Q0| H1 |E_nu^P0> / (E_alpha^Q0 - E_nu^P0) |

between the ``N_R <= 1`` eigenstates (alpha) and the ``N_R = 2`` eigenstates
(nu), and the energy-filtered random initial state in the ``N_R = 1`` sector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fock import FockSector, RightCountMask

SECTOR_DENSE_CAP = 10_000
DEGENERACY_THRESHOLD = 1e-10
COUPLING_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class SectorEigensystem:
    """Eigenpairs of ``H0`` restricted to the states with ``N_R = r``."""

    r: int
    indices: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.energies)

    def embed(self, coeffs: np.ndarray, full_dim: int) -> np.ndarray:
        """Map eigenbasis coefficients to a vector over the full sector."""
        out = np.zeros(full_dim, dtype=np.result_type(coeffs, self.vectors))
        out[self.indices] = self.vectors @ coeffs
        return out


def diagonalize_sector(
    H0, mask: RightCountMask, r: int, *, cap: int = SECTOR_DENSE_CAP
) -> SectorEigensystem:
    idx = mask.indices(r)
    if len(idx) > cap:
        raise ValueError(f"N_R={r} block has dimension {len(idx)}, above the dense cap {cap}")
    if len(idx) == 0:
        raise ValueError(f"no basis states with N_R={r}")
    block = sp.csr_matrix(H0)[idx][:, idx].toarray()
    w, V = np.linalg.eigh(block)
    return SectorEigensystem(r, idx, w, V)


def alpha_mid(d_q0: int) -> int:
    return math.ceil(d_q0 / 2)


@dataclass(frozen=True)
class VvptGapTable:
    alpha: np.ndarray
    energies: np.ndarray
    g: np.ndarray
    flagged: np.ndarray

    @property
    def d_q0(self) -> int:
        return len(self.alpha)

    @property
    def alpha_mid(self) -> int:
        return alpha_mid(self.d_q0)

    def rows(self):
        for a, e, g, f in zip(self.alpha, self.energies, self.g, self.flagged):
            yield int(a), float(e), float(g), bool(f)


def vvpt_gap(q_systems, p_sys: SectorEigensystem, H1) -> VvptGapTable:
    """Gap parameters for every ``Q0`` eigenstate.

    ``q_systems`` lists the ``Q0`` eigensystems in alpha order (the single
    ``N_R = 0`` configuration first, then ``N_R = 1``).  Only ``N_R = 2``
    enters the maximum since ``H1`` shifts ``N_R`` by one.  Pairs closer than
    :data:`DEGENERACY_THRESHOLD` in energy with a nonzero coupling are
    reported as ``inf`` and flagged.
    """
    H1 = sp.csr_matrix(H1)
    H1_to_p = H1[p_sys.indices]
    energies, gs, flags = [], [], []
    for sys_ in q_systems:
        # <E_nu^P0| H1 |E_alpha^Q0>, shape (n_nu, n_alpha)
        coupling = p_sys.vectors.conj().T @ (H1_to_p[:, sys_.indices] @ sys_.vectors)
        coupling = np.abs(coupling)
        gap = np.abs(sys_.energies[None, :] - p_sys.energies[:, None])
        degenerate = gap < DEGENERACY_THRESHOLD
        hit = degenerate & (coupling > COUPLING_THRESHOLD)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(degenerate, 0.0, coupling / np.where(degenerate, 1.0, gap))
        ratio[hit] = np.inf
        energies.append(sys_.energies)
        gs.append(ratio.max(axis=0) if ratio.size else np.zeros(sys_.dim))
        flags.append(hit.any(axis=0))
    energies = np.concatenate(energies)
    return VvptGapTable(
        np.arange(len(energies)), energies, np.concatenate(gs), np.concatenate(flags)
    )


@dataclass(frozen=True)
class FilterSpec:
    """Gaussian energy filter for the random ``N_R = 1`` initial state.

    ``energy`` is ``"ground"`` (lowest ``N_R = 1`` level), ``"mid"``
    (level ``alpha_mid``) or an explicit energy.
    """

    energy: float | str = "ground"
    sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("filter width sigma must be positive")
        if isinstance(self.energy, str) and self.energy not in ("ground", "mid"):
            raise ValueError(f"energy selector must be 'ground', 'mid' or a number, got {self.energy!r}")


def target_energy(q_sys: SectorEigensystem, energy) -> float:
    if energy == "ground":
        return float(q_sys.energies[0])
    if energy == "mid":
        # alpha counts the N_R = 0 state as 0, so alpha_mid is 1-based in N_R = 1
        return float(q_sys.energies[alpha_mid(q_sys.dim + 1) - 1])
    return float(energy)


def random_sector_state(dim: int, seed: int) -> np.ndarray:
    """I.i.d. standard complex Gaussian amplitudes, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    return (rng.standard_normal(dim) + 1j * rng.standard_normal(dim)) / np.sqrt(2)


class FilterAnnihilatedError(ValueError):
    pass


def filtered_initial_state(
    q_sys: SectorEigensystem, spec: FilterSpec, sector: FockSector
) -> np.ndarray:
    """``exp[-((H0 - E)/sigma)^2] psi_rand`` in the ``N_R = 1`` sector, normalised."""
    if q_sys.r != 1:
        raise ValueError("the filtered state lives in the N_R = 1 sector")
    E = target_energy(q_sys, spec.energy)
    psi_rand = random_sector_state(q_sys.dim, spec.seed)
    coeffs = q_sys.vectors.conj().T @ psi_rand
    coeffs = coeffs * np.exp(-(((q_sys.energies - E) / spec.sigma) ** 2))
    norm = np.linalg.norm(coeffs)
    if norm < 1e-14:
        raise FilterAnnihilatedError(
            f"filter at E={E:g}, sigma={spec.sigma:g} leaves norm {norm:.2e}; "
            f"N_R=1 spectrum spans [{q_sys.energies[0]:g}, {q_sys.energies[-1]:g}]"
        )
    return q_sys.embed(coeffs / norm, sector.dim)
