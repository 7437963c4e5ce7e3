"""Run configuration and the operators prepared from it."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache

import numpy as np

from .fock import FockSector, half_filling, right_count
from .operators import HamiltonianParams, build_h0, build_h1, build_hamiltonian, detector_masks
from .propagator import DEFAULT_TOL, ChebyshevPlan, make_plan
from .spectra import FilterSpec, diagonalize_sector, filtered_initial_state


@dataclass(frozen=True)
class DetectionConfig:
    """Everything that defines one measured run (energies in units of J)."""

    n_sites: int = 14
    p: int = 3
    q: int = 5
    tau: float = 2.0
    n_steps: int = 1000
    params: HamiltonianParams = field(default_factory=HamiltonianParams)
    filter: FilterSpec = field(default_factory=FilterSpec)
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        half = self.n_sites // 2
        if not 1 <= self.p < self.q <= half:
            raise ValueError(
                f"detector sites must satisfy 1 <= p < q <= N/2 = {half}, got p={self.p}, q={self.q}"
            )
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")

    def with_delta(self, delta: float) -> "DetectionConfig":
        return replace(self, params=replace(self.params, delta=float(delta)))


@lru_cache(maxsize=8)
def _sector(n_sites: int) -> FockSector:
    return half_filling(n_sites)


class ChainSystem:
    """Sector, Hamiltonians, detector projectors and propagator for a config.

    Heavy pieces are built lazily and cached on the instance.
    """

    def __init__(self, config: DetectionConfig):
        self.config = config
        self.sector = _sector(config.n_sites)
        self.P, self.Q = detector_masks(self.sector, config.p, config.q)

    @cached_property
    def right(self):
        return right_count(self.sector)

    @cached_property
    def H(self):
        return build_hamiltonian(self.sector, self.config.params)

    @cached_property
    def H0(self):
        return build_h0(self.sector, self.config.params)

    @cached_property
    def H1(self):
        return build_h1(self.sector, self.config.params)

    @cached_property
    def plan(self) -> ChebyshevPlan:
        return make_plan(self.H, self.config.tau, self.config.tol)

    def plan_for(self, tau: float) -> ChebyshevPlan:
        if tau == self.config.tau:
            return self.plan
        return make_plan(self.H, tau, self.config.tol)

    @cached_property
    def q_sys(self):
        return diagonalize_sector(self.H0, self.right, 1)

    def initial_state(self, spec: FilterSpec | None = None) -> np.ndarray:
        return filtered_initial_state(self.q_sys, spec or self.config.filter, self.sector)

    @cached_property
    def psi0(self) -> np.ndarray:
        return self.initial_state()
