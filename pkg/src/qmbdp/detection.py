"""No-detection probability under stroboscopic projective measurement.

One step is ``M_Q = Q exp(-i H tau) Q``.  For an initial state inside the Q
subspace, ``R_k = || M_Q^k psi(0) ||^2`` is the probability that the first
``k`` measurements all miss the signal ``P = n_p n_q``; ``T_k = 1 - R_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operators import DiagonalMask, expectation, observable_diag, projector_mask
from .propagator import ChebyshevPlan, evolve
from .system import ChainSystem, DetectionConfig

LOG_FLOOR = math.log(1e-290)


def apply_mq(plan: ChebyshevPlan, Q: DiagonalMask, psi: np.ndarray) -> np.ndarray:
    """``Q exp(-i H tau) Q psi``, unnormalised."""
    if psi.shape[0] != len(Q.values):
        raise ValueError("state and projector dimensions differ")
    return Q.apply(evolve(plan, Q.apply(psi)))


@dataclass
class DetectionSeries:
    """``log R_k`` for ``k = 0 .. n``; ``R`` is clamped below ``exp(LOG_FLOOR)``."""

    log_r: np.ndarray
    config: DetectionConfig | None = field(default=None, repr=False)

    @property
    def R(self) -> np.ndarray:
        return np.exp(np.maximum(self.log_r, LOG_FLOOR))

    @property
    def T(self) -> np.ndarray:
        return 1.0 - self.R

    @property
    def log10_r(self) -> np.ndarray:
        return self.log_r / math.log(10)

    @property
    def r_final(self) -> float:
        return float(self.R[-1])

    @property
    def log10_r_final(self) -> float:
        return float(self.log10_r[-1])


class InitialStateError(ValueError):
    pass


def measured_series(plan, Q: DiagonalMask, psi0: np.ndarray, n_steps: int) -> np.ndarray:
    """``log R_k`` for ``k = 0..n_steps`` from the running state.

    The state is renormalised after each step and the log of its squared
    norm accumulated, so arbitrarily small ``R_k`` cannot underflow.
    """
    leak = np.linalg.norm(psi0 - Q.apply(psi0))
    if leak > 1e-12:
        raise InitialStateError(
            f"initial state has weight {leak:.2e} in the signal subspace; "
            "R_n assumes a state inside Q"
        )
    log_r = np.empty(n_steps + 1)
    norm0 = np.linalg.norm(psi0)
    psi = psi0 / norm0
    log_r[0] = 2 * math.log(norm0)
    for k in range(1, n_steps + 1):
        psi = apply_mq(plan, Q, psi)
        nrm = np.linalg.norm(psi)
        if nrm == 0.0:
            log_r[k:] = -np.inf
            break
        log_r[k] = log_r[k - 1] + 2 * math.log(nrm)
        psi /= nrm
    return log_r


def no_detection_series(config: DetectionConfig, system: ChainSystem | None = None,
                        psi0: np.ndarray | None = None) -> DetectionSeries:
    system = system or ChainSystem(config)
    psi0 = system.psi0 if psi0 is None else psi0
    return DetectionSeries(measured_series(system.plan, system.Q, psi0, config.n_steps), config)


def rn_sweep(config: DetectionConfig, deltas) -> dict[float, DetectionSeries]:
    return {float(d): no_detection_series(config.with_delta(d)) for d in deltas}


def free_dynamics(config: DetectionConfig, times, observables=("NR",),
                  system: ChainSystem | None = None, psi0=None, max_dt: float = 10.0):
    """Expectation values under unmeasured evolution at ascending ``times``.

    ``observables`` entries are ``"NR"``, an int site label, or a ``(p, q)``
    tuple for the joint occupation ``n_p n_q``.  Returns ``{name: array}``.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ValueError("times must be non-negative and ascending")
    system = system or ChainSystem(config)
    psi = (system.psi0 if psi0 is None else psi0).astype(complex)
    diags = {}
    for obs in observables:
        if isinstance(obs, tuple):
            diags[f"n{obs[0]}n{obs[1]}"] = projector_mask(system.sector, obs).values.astype(float)
        else:
            name = "NR" if obs in ("NR", "right") else f"n{obs}"
            diags[name] = observable_diag(system.sector, obs)
    out = {name: np.empty(times.size) for name in diags}
    t_now = 0.0
    plans = {}
    for i, t in enumerate(times):
        dt = t - t_now
        if dt > 0:
            n = max(1, math.ceil(dt / max_dt - 1e-12))
            h = dt / n
            if h not in plans:
                plans[h] = system.plan_for(h)
            for _ in range(n):
                psi = evolve(plans[h], psi)
            t_now = t
        for name, d in diags.items():
            out[name][i] = expectation(d, psi)
    return out


def single_shot_probability(config: DetectionConfig, t: float, system=None, psi0=None) -> float:
    """``<n_p n_q>`` at time ``t`` without intermediate measurements."""
    res = free_dynamics(config, [t], [(config.p, config.q)], system=system, psi0=psi0)
    return float(res[f"n{config.p}n{config.q}"][0])


def transition_point(sweep: dict, eps: float = 1e-5):
    """Smallest grid ``Delta`` with ``R_n > eps``; ``None`` if no point qualifies."""
    for delta in sorted(sweep):
        if sweep[delta] > eps:
            return delta
    return None


def decay_slope(log_r: np.ndarray, fraction: float = 0.25) -> float:
    """Least-squares slope of ``log R_k`` over the final ``fraction`` of steps."""
    n = len(log_r) - 1
    start = n - max(2, int(n * fraction))
    k = np.arange(start, n + 1)
    return float(np.polyfit(k, log_r[start:], 1)[0])
