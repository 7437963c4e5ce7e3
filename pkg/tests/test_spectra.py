import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from qmbdp.fock import half_filling, right_count
from qmbdp.operators import HamiltonianParams, build_h0, build_h1, detector_masks
from qmbdp.spectra import (
    FilterAnnihilatedError,
    FilterSpec,
    alpha_mid,
    diagonalize_sector,
    filtered_initial_state,
    random_sector_state,
    vvpt_gap,
)


def _setup(n, delta=1.0, eps0=0.5):
    s = half_filling(n)
    p = HamiltonianParams(delta=delta, eps0=eps0)
    return s, right_count(s), build_h0(s, p), build_h1(s, p)


def _gaps(H0, H1, mask):
    q = [diagonalize_sector(H0, mask, 0), diagonalize_sector(H0, mask, 1)]
    return vvpt_gap(q, diagonalize_sector(H0, mask, 2), H1)


@pytest.mark.parametrize("n,delta", [(8, 1.0), (12, 2.0), (14, 0.7)])
def test_empty_right_half_energy(n, delta):
    s, mask, H0, _ = _setup(n, delta)
    sys0 = diagonalize_sector(H0, mask, 0)
    assert sys0.dim == 1
    assert sys0.energies[0] == pytest.approx(-delta * (n // 2 - 1) + 0.5, abs=1e-12)


def test_blocks_reproduce_dense_spectrum():
    s, mask, H0, _ = _setup(8, 1.3)
    full = np.linalg.eigvalsh(H0.toarray())
    blocks = []
    for r in range(5):
        sys_ = diagonalize_sector(H0, mask, r)
        V = sys_.vectors
        np.testing.assert_allclose(V.conj().T @ V, np.eye(sys_.dim), atol=1e-10)
        block = H0[sys_.indices][:, sys_.indices].toarray()
        assert np.abs(block @ V - V * sys_.energies).max() < 1e-9
        blocks.append(sys_.energies)
    np.testing.assert_allclose(np.sort(np.concatenate(blocks)), full, atol=1e-10)


def test_dense_cap_and_empty_block():
    s, mask, H0, _ = _setup(8)
    with pytest.raises(ValueError):
        diagonalize_sector(H0, mask, 2, cap=5)
    with pytest.raises(ValueError):
        diagonalize_sector(H0, mask, 7)


def test_alpha_mid():
    assert alpha_mid(50) == 25
    assert alpha_mid(17) == 9


def test_gap_zero_without_coupling():
    s, mask, H0, H1 = _setup(8)
    table = _gaps(H0, sp.csr_matrix(H1.shape), mask)
    assert np.all(table.g == 0) and not table.flagged.any()
    assert table.d_q0 == 1 + 16


def test_gap_shift_invariance_and_scaling():
    s, mask, H0, H1 = _setup(10, 1.4)
    base = _gaps(H0, H1, mask)
    assert np.all(base.g >= 0)
    shifted = _gaps(H0 + 3.7 * sp.identity(s.dim, format="csr"), H1, mask)
    # eigensolver rounding is amplified by near-degenerate denominators
    np.testing.assert_allclose(shifted.g, base.g, rtol=1e-10, atol=1e-12)
    well_separated = base.g < 1.0
    np.testing.assert_allclose(shifted.g[well_separated], base.g[well_separated], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(_gaps(H0, 2 * H1, mask).g, 2 * base.g, rtol=1e-12)


def test_degenerate_coupled_pairs_flagged():
    # pure hopping with no interaction has exact cross-sector degeneracies
    s, mask, H0, H1 = _setup(6, delta=0.0, eps0=0.0)
    table = _gaps(H0, H1, mask)
    assert np.array_equal(np.isinf(table.g), table.flagged)
    rows = list(table.rows())
    assert rows[0][0] == 0 and len(rows) == table.d_q0


def test_g1_drops_with_interaction():
    tables = {}
    for delta in (0.5, 2.0):
        s, mask, H0, H1 = _setup(14, delta)
        tables[delta] = _gaps(H0, H1, mask)
    assert tables[2.0].g[1] < tables[0.5].g[1] / 5


def test_filter_wide_is_identity():
    s, mask, H0, _ = _setup(10)
    q = diagonalize_sector(H0, mask, 1)
    out = filtered_initial_state(q, FilterSpec("ground", sigma=1e6, seed=4), s)
    raw = random_sector_state(q.dim, 4)
    np.testing.assert_allclose(out[q.indices], raw / np.linalg.norm(raw), atol=1e-12)
    assert np.count_nonzero(np.delete(out, q.indices)) == 0


def test_filter_narrow_selects_ground_state():
    s, mask, H0, _ = _setup(10)
    q = diagonalize_sector(H0, mask, 1)
    assert q.energies[1] - q.energies[0] > 1e-3
    out = filtered_initial_state(q, FilterSpec("ground", sigma=1e-6, seed=1), s)
    ground = q.embed(np.eye(q.dim)[:, 0], s.dim)
    assert abs(np.vdot(ground, out)) > 0.999999


def test_filter_energy_variance():
    s, mask, H0, _ = _setup(12)
    q = diagonalize_sector(H0, mask, 1)
    sigma = 0.1
    psi = filtered_initial_state(q, FilterSpec("ground", sigma=sigma, seed=0), s)
    h = H0 @ psi
    var = np.vdot(h, h).real - np.vdot(psi, h).real ** 2
    assert var <= sigma**2 / 2


def test_filter_mid_and_explicit_energy():
    s, mask, H0, _ = _setup(10)
    q = diagonalize_sector(H0, mask, 1)
    mid = filtered_initial_state(q, FilterSpec("mid", sigma=0.1), s)
    explicit = filtered_initial_state(q, FilterSpec(float(q.energies[alpha_mid(q.dim + 1) - 1]), 0.1), s)
    np.testing.assert_allclose(mid, explicit, atol=1e-14)


def test_filter_errors():
    s, mask, H0, _ = _setup(8)
    q = diagonalize_sector(H0, mask, 1)
    with pytest.raises(FilterAnnihilatedError):
        filtered_initial_state(q, FilterSpec(1e3, sigma=0.01), s)
    with pytest.raises(ValueError):
        FilterSpec(sigma=0.0)
    with pytest.raises(ValueError):
        FilterSpec("top")
    with pytest.raises(ValueError):
        filtered_initial_state(diagonalize_sector(H0, mask, 2), FilterSpec(), s)


@given(st.sampled_from([4, 6, 8, 10, 12]), st.integers(0, 1000), st.data())
@settings(max_examples=25, deadline=None)
def test_filtered_state_never_triggers_detector(n, seed, data):
    s, mask, H0, _ = _setup(n)
    q = diagonalize_sector(H0, mask, 1)
    p_site = data.draw(st.integers(1, n // 2 - 1))
    q_site = data.draw(st.integers(p_site + 1, n // 2))
    P, _ = detector_masks(s, p_site, q_site)
    psi = filtered_initial_state(q, FilterSpec("ground", 0.5, seed), s)
    assert np.linalg.norm(P.apply(psi)) == 0
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-14)
