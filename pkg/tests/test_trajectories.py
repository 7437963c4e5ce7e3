import numpy as np
import pytest

from qmbdp.detection import free_dynamics, single_shot_probability
from qmbdp.operators import expectation, observable_diag
from qmbdp.system import ChainSystem, DetectionConfig
from qmbdp.trajectories import (
    _run_batch,
    run_trajectory,
    summarize,
    trajectory_ensemble,
    trajectory_seed,
)


def test_seed_derivation_is_stable():
    assert trajectory_seed(0, 3) == trajectory_seed(0, 3)
    assert trajectory_seed(0, 3) != trajectory_seed(0, 4)
    assert trajectory_seed(1, 3) != trajectory_seed(0, 3)
    assert 0 <= trajectory_seed(5, 0) < 2**63


def test_ensemble_deterministic():
    cfg = DetectionConfig(n_sites=8, p=3, q=4, n_steps=60).with_delta(0.5)
    a, sa = trajectory_ensemble(cfg, 6, master_seed=11)
    b, sb = trajectory_ensemble(cfg, 6, master_seed=11)
    assert a == b and sa == sb
    c, _ = trajectory_ensemble(cfg, 6, master_seed=12)
    assert [r.click_steps for r in a] != [r.click_steps for r in c]


def test_single_trajectory_matches_ensemble_of_one():
    cfg = DetectionConfig(n_sites=8, p=3, q=4, n_steps=80).with_delta(0.7)
    recs, summary = trajectory_ensemble(cfg, 1, master_seed=4)
    assert recs[0] == run_trajectory(cfg, trajectory_seed(4, 0))
    assert summary.n_traj == 1


def test_batching_does_not_change_records():
    cfg = DetectionConfig(n_sites=8, p=3, q=4, n_steps=40).with_delta(0.5)
    recs, _ = trajectory_ensemble(cfg, 5, master_seed=2)
    for i, r in enumerate(recs):
        assert r == run_trajectory(cfg, trajectory_seed(2, i))


def test_zero_signal_probability_never_clicks(frozen_four_site):
    s, params, H, P, Q, psi = frozen_four_site
    cfg = DetectionConfig(n_sites=4, p=1, q=2, n_steps=200, params=params)
    rec = run_trajectory(cfg, 123, psi0=psi)
    assert rec.clicks == 0 and rec.click_steps == [] and rec.aborted is None


def test_norm_after_every_step():
    cfg = DetectionConfig(n_sites=8, p=3, q=4, n_steps=100).with_delta(0.5)
    sys_ = ChainSystem(cfg)
    worst = []
    _run_batch(sys_, sys_.psi0, [1, 2, 3], cfg.n_steps,
               record_states=lambda k, psi: worst.append(np.abs(np.linalg.norm(psi, axis=0) - 1).max()))
    assert max(worst) < 1e-10


def test_without_projection_matches_free_dynamics():
    cfg = DetectionConfig(n_sites=8, p=3, q=4, n_steps=25).with_delta(1.2)
    sys_ = ChainSystem(cfg)
    nr = observable_diag(sys_.sector, "NR")
    got = {}
    _run_batch(sys_, sys_.psi0, [0], cfg.n_steps, project=False,
               record_states=lambda k, psi: got.__setitem__(k, expectation(nr, psi[:, 0])))
    steps = [5, 10, 25]
    ref = free_dynamics(cfg, [k * cfg.tau for k in steps], system=sys_)["NR"]
    np.testing.assert_allclose([got[k] for k in steps], ref, atol=1e-9)


def test_first_step_click_rate_matches_single_shot():
    cfg = DetectionConfig(n_sites=8, p=3, q=4, n_steps=1).with_delta(0.5)
    sys_ = ChainSystem(cfg)
    p = single_shot_probability(cfg, cfg.tau, system=sys_)
    M = 400
    recs, _ = trajectory_ensemble(cfg, M, master_seed=9, system=sys_)
    frac = np.mean([r.clicks for r in recs])
    assert abs(frac - p) <= 3 * np.sqrt(p * (1 - p) / M) + 1 / M


def test_summarize():
    cfg = DetectionConfig(n_sites=8, p=3, q=4, n_steps=50).with_delta(0.5)
    recs, s = trajectory_ensemble(cfg, 4, master_seed=0)
    c = [r.clicks for r in recs]
    assert s == summarize(recs)
    assert s.min_clicks == min(c) and s.max_clicks == max(c)
    assert s.mean_clicks == pytest.approx(np.mean(c))
    assert s.p_no_click == pytest.approx(np.mean(np.array(c) == 0))
    with pytest.raises(ValueError):
        trajectory_ensemble(cfg, 0)
