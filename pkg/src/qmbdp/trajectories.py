"""Single-run Monte Carlo of two stroboscopic particle detectors.

Each step evolves the state by ``tau``, clicks with probability
``a = <n_p n_q>`` (drawing ``r`` uniform on [0, 1) and clicking iff
``r <= a``), projects onto the observed outcome and renormalises.  A run
reports the number of clicks ``C``.

Trajectories of an ensemble are independent but share the propagator, so
they are advanced together as the columns of one ``(D, M)`` array in fixed
chunks; per-trajectory random streams come from ``(master_seed, index)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .propagator import evolve
from .system import ChainSystem, DetectionConfig

log = logging.getLogger(__name__)

ABORT_NORM = 1e-14
CHUNK = 64


@dataclass
class TrajectoryRecord:
    seed: int
    n_steps: int
    clicks: int
    click_steps: list[int] = field(default_factory=list)
    final_norm: float = 1.0
    aborted: str | None = None


@dataclass
class EnsembleSummary:
    n_traj: int
    mean_clicks: float
    min_clicks: int
    max_clicks: int
    p_no_click: float
    n_aborted: int


def trajectory_seed(master_seed: int, index: int) -> int:
    """Deterministic 63-bit seed for trajectory ``index`` of an ensemble."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _column_sq_norms(x: np.ndarray) -> np.ndarray:
    # reduce each column as a contiguous row so the result does not depend on
    # how many trajectories share the batch
    xt = np.ascontiguousarray(x.T)
    return (xt.real**2 + xt.imag**2).sum(axis=1)


def _run_batch(system: ChainSystem, psi0: np.ndarray, seeds, n_steps: int,
               project: bool = True, record_states=None):
    M = len(seeds)
    rngs = [np.random.default_rng(s) for s in seeds]
    p_rows = system.P.values.astype(bool)
    psi = np.repeat(np.asarray(psi0, dtype=complex)[:, None], M, axis=1)
    psi /= np.sqrt(_column_sq_norms(psi))
    clicks = [[] for _ in range(M)]
    alive = np.ones(M, dtype=bool)
    aborted: list[str | None] = [None] * M
    plan = system.plan
    for step in range(1, n_steps + 1):
        psi = evolve(plan, psi)
        a = _column_sq_norms(psi[p_rows])
        r = np.array([rng.random() for rng in rngs])
        hit = (r <= a) & alive
        if project:
            keep = np.where(hit[None, :], p_rows[:, None], ~p_rows[:, None])
            psi *= keep
            norms = np.sqrt(_column_sq_norms(psi))
            bad = alive & (norms < ABORT_NORM)
            for j in np.flatnonzero(bad):
                aborted[j] = (
                    f"step {step}: projected norm {norms[j]:.1e} after "
                    f"{'click' if hit[j] else 'no click'} with a={a[j]:.3e}"
                )
                log.warning("trajectory seed %d aborted at %s", seeds[j], aborted[j])
            alive &= ~bad
            norms[~alive] = 1.0
            psi[:, ~alive] = 0.0
            psi /= norms
        for j in np.flatnonzero(hit):
            clicks[j].append(step)
        if record_states is not None:
            record_states(step, psi)
    final = np.sqrt(_column_sq_norms(psi))
    return [
        TrajectoryRecord(int(seeds[j]), n_steps, len(clicks[j]), clicks[j], float(final[j]), aborted[j])
        for j in range(M)
    ]


def run_trajectory(config: DetectionConfig, seed: int, system: ChainSystem | None = None,
                   psi0=None, project: bool = True) -> TrajectoryRecord:
    """One experimental run of ``config.n_steps`` measurements from the filtered state."""
    system = system or ChainSystem(config)
    psi0 = system.psi0 if psi0 is None else psi0
    return _run_batch(system, psi0, [seed], config.n_steps, project)[0]


def trajectory_ensemble(config: DetectionConfig, n_traj: int, master_seed: int = 0,
                        system: ChainSystem | None = None, psi0=None):
    """``n_traj`` reproducible runs and their click-count summary."""
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    system = system or ChainSystem(config)
    psi0 = system.psi0 if psi0 is None else psi0
    seeds = [trajectory_seed(master_seed, i) for i in range(n_traj)]
    records: list[TrajectoryRecord] = []
    for lo in range(0, n_traj, CHUNK):
        records += _run_batch(system, psi0, seeds[lo : lo + CHUNK], config.n_steps)
    return records, summarize(records)


def summarize(records) -> EnsembleSummary:
    ok = [r for r in records if r.aborted is None]
    c = np.array([r.clicks for r in ok]) if ok else np.zeros(0, dtype=int)
    return EnsembleSummary(
        n_traj=len(records),
        mean_clicks=float(c.mean()) if c.size else float("nan"),
        min_clicks=int(c.min()) if c.size else 0,
        max_clicks=int(c.max()) if c.size else 0,
        p_no_click=float(np.mean(c == 0)) if c.size else float("nan"),
        n_aborted=len(records) - len(ok),
    )
