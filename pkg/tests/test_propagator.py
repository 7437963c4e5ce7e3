import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jv

from qmbdp.fock import half_filling
from qmbdp.operators import HamiltonianParams, build_hamiltonian
from qmbdp.propagator import (
    DEFAULT_TOL,
    bessel_j,
    bessel_j_all,
    chebyshev_order,
    dense_evolve_oracle,
    dense_propagator,
    evolve,
    make_plan,
    spectral_bounds,
)


def _series(k, x, terms=30):
    return sum((-1) ** m * (x / 2) ** (2 * m + k) / (math.factorial(m) * math.factorial(m + k))
               for m in range(terms))


def _ham(n, delta=1.0, eps0=0.5):
    return build_hamiltonian(half_filling(n), HamiltonianParams(delta=delta, eps0=eps0))


def _rand(d, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def test_bessel_known_values():
    assert bessel_j(0, 0.0) == 1.0
    assert np.all(bessel_j_all(5, 0.0)[1:] == 0.0)
    assert bessel_j(0, 1.0) == pytest.approx(0.7651976865579666, abs=1e-15)
    for k in range(6):
        assert bessel_j(k, 2.5) == pytest.approx(_series(k, 2.5), abs=1e-14)


@given(st.floats(0.01, 500.0), st.integers(0, 80))
@settings(max_examples=60, deadline=None)
def test_bessel_against_scipy(x, k):
    assert abs(bessel_j(k, x) - jv(k, x)) < 1e-12


def test_bessel_rejects_bad_arguments():
    with pytest.raises(ValueError):
        bessel_j_all(-1, 1.0)
    with pytest.raises(ValueError):
        bessel_j_all(3, -1.0)


def test_chebyshev_order_ranges():
    K20, jk = chebyshev_order(20.0, 1e-12)
    assert 25 <= K20 <= 60
    assert 2 * np.abs(jv(np.arange(K20 + 1, K20 + 200), 20.0)).sum() < 1e-12
    K50, _ = chebyshev_order(50.0, 1e-12)
    K100, _ = chebyshev_order(100.0, 1e-12)
    assert 1.4 < K100 / K50 < 2.2


def test_bounds_enclose_spectrum():
    D = sp.diags([1.0, -2.0, 3.0])
    lo, hi = spectral_bounds(D)
    assert lo == pytest.approx(-2.05) and hi == pytest.approx(3.05)
    H = _ham(8, delta=2.0)
    ev = np.linalg.eigvalsh(H.toarray())
    lo, hi = spectral_bounds(H)
    assert lo < ev[0] and ev[-1] < hi
    lo, hi = spectral_bounds(build_hamiltonian(half_filling(2), HamiltonianParams(eps0=0.0)))
    assert lo <= -0.5 and hi >= 0.5


def test_coefficients_decay():
    plan = make_plan(_ham(8), 2.0)
    assert abs(plan.coeffs[-1]) < DEFAULT_TOL
    assert plan.order >= plan.a


def test_zero_tau_is_identity():
    H = _ham(6)
    plan = make_plan(H, 0.0)
    assert plan.order == 0
    psi = _rand(H.shape[0])
    np.testing.assert_allclose(evolve(plan, psi), psi, atol=1e-15)


def test_invalid_arguments():
    H = _ham(6)
    with pytest.raises(ValueError):
        make_plan(H, -1.0)
    with pytest.raises(ValueError):
        make_plan(H, 1.0, tol=1e-17)
    with pytest.raises(ValueError):
        evolve(make_plan(H, 1.0), np.ones(3, dtype=complex))


@pytest.mark.parametrize("tau", [0.3, 1.0, 2.0, 5.0])
def test_two_site_analytic(tau):
    s = half_filling(2)
    H = build_hamiltonian(s, HamiltonianParams(eps0=0.0))
    psi = np.zeros(2, dtype=complex)
    psi[s.index_of(1 << s.bit_of_site(0))] = 1.0
    out = evolve(make_plan(H, tau), psi)
    assert abs(out[s.index_of(1 << s.bit_of_site(0))]) == pytest.approx(abs(math.cos(tau / 2)), abs=1e-12)


@pytest.mark.parametrize("delta", [0.5, 1.0, 2.0])
def test_matches_dense_oracle(delta):
    H = _ham(8, delta)
    psi = _rand(H.shape[0], 3)
    out = evolve(make_plan(H, 2.0), psi)
    assert np.linalg.norm(out - dense_evolve_oracle(H, psi, 2.0)) < 1e-10
    U = dense_propagator(H, 2.0)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(H.shape[0]), atol=1e-12)
    assert np.linalg.norm(U @ psi - out) < 1e-10


def test_block_equals_columns():
    H = _ham(8)
    plan = make_plan(H, 2.0)
    B = np.stack([_rand(70, s) for s in range(4)], axis=1)
    out = evolve(plan, B)
    for j in range(4):
        np.testing.assert_array_equal(out[:, j], evolve(plan, B[:, j]))


def test_composition():
    H = _ham(8)
    psi = _rand(70, 5)
    plan1, plan2 = make_plan(H, 1.0), make_plan(H, 2.0)
    assert np.linalg.norm(evolve(plan1, evolve(plan1, psi)) - evolve(plan2, psi)) < 20 * DEFAULT_TOL


def test_norm_drift_and_energy_conservation():
    H = _ham(10, delta=1.3)
    plan = make_plan(H, 2.0)
    psi = _rand(H.shape[0], 7)
    e0 = np.vdot(psi, H @ psi).real
    worst_norm = worst_e = 0.0
    for _ in range(1000):
        psi = evolve(plan, psi)
        worst_norm = max(worst_norm, abs(np.linalg.norm(psi) - 1))
        worst_e = max(worst_e, abs(np.vdot(psi, H @ psi).real - e0))
    assert worst_norm < 1e-9
    assert worst_e < 1e-9


def test_dense_oracle_cap():
    with pytest.raises(ValueError):
        dense_propagator(sp.identity(6000, format="csr"), 1.0)
