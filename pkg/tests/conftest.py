import numpy as np
import pytest

from qmbdp.fock import half_filling
from qmbdp.operators import DiagonalMask, HamiltonianParams, build_hamiltonian, projector_mask
from qmbdp.propagator import make_plan


@pytest.fixture
def two_site():
    """One particle on two sites, eps0 = 0: sector, H, Q (right site empty), left-site state."""
    s = half_filling(2)
    H = build_hamiltonian(s, HamiltonianParams(eps0=0.0))
    P = projector_mask(s, [1])
    psi = np.zeros(2, dtype=complex)
    psi[s.index_of(1 << s.bit_of_site(0))] = 1.0
    return s, H, P, P.complement, psi


@pytest.fixture
def frozen_four_site():
    """Four sites with the cut bond removed; the left-packed state is an H eigenvector inside Q."""
    s = half_filling(4)
    params = HamiltonianParams(delta=1.0, eps0=0.5, boundary_hop=False)
    H = build_hamiltonian(s, params)
    P = projector_mask(s, [1, 2])
    psi = np.zeros(s.dim, dtype=complex)
    psi[s.index_of(0b0011)] = 1.0
    return s, params, H, P, P.complement, psi


def identity_mask(dim):
    return DiagonalMask(np.ones(dim, dtype=np.int8))
