"""Leading eigenvalue ``exp(-lambda_1 + i theta_1)`` of ``M_Q(tau)`` by restarted Arnoldi.

``M_Q`` is only available as an action on vectors, is non-normal, and near
the transition its dominant eigenvalues crowd the unit circle.  The decay
rate is therefore taken from the leaked weight of the Ritz vector ``y``:
for ``y`` in the Q subspace and ``U`` unitary,

    || M_Q y ||^2 = || y ||^2 - || P U y ||^2,

which resolves ``lambda_1`` far below ``1 - |mu|`` machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .detection import apply_mq
from .operators import DiagonalMask
from .propagator import ChebyshevPlan, evolve

BREAKDOWN = 1e-14


@dataclass(frozen=True)
class SpectralEstimate:
    lambda1: float
    theta1: float
    krylov_dim: int
    restarts: int
    residual: float
    converged: bool

    @property
    def eigenvalue(self) -> complex:
        return complex(math.exp(-self.lambda1) * np.exp(1j * self.theta1))

    @property
    def magnitude(self) -> float:
        return math.exp(-self.lambda1)


def _extend(apply, V, Hm, start: int, m: int) -> int:
    """Grow a Krylov decomposition from ``start`` to ``m`` columns in place.

    Returns the number of columns built; fewer than ``m`` means breakdown
    (an invariant subspace was found).
    """
    for j in range(start, m):
        w = apply(V[:, j])
        # classical Gram-Schmidt, applied twice
        for _ in range(2):
            h = V[:, : j + 1].conj().T @ w
            w = w - V[:, : j + 1] @ h
            Hm[: j + 1, j] += h
        beta = np.linalg.norm(w)
        Hm[j + 1, j] = beta
        if beta < BREAKDOWN:
            return j + 1
        V[:, j + 1] = w / beta
    return m


def arnoldi_leading(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    m: int = 30,
    max_restarts: int = 50,
    tol: float = 1e-8,
    seed: int = 0,
    start_mask: DiagonalMask | None = None,
    leak: Callable[[np.ndarray], float] | None = None,
    keep: int | None = None,
) -> SpectralEstimate:
    """Largest-magnitude eigenvalue of the operator ``apply``.

    Each restart keeps the ``keep`` largest-magnitude Ritz vectors
    (orthonormalised) and extends the Krylov decomposition back to ``m``
    columns.  ``keep=1`` is the plain restart with the leading Ritz vector,
    which can lock onto a subdominant eigenpair when many eigenvalues sit
    close to the unit circle.

    Parameters
    ----------
    apply : callable
        One application of the operator to a ``(dim,)`` complex vector.
    m : int
        Krylov dimension (at least 10, capped at ``dim``).
    tol : float
        Stop when the Ritz residual of the leading pair falls below ``tol``,
        or its magnitude moves by less than ``tol * 1e-3`` between restarts.
    start_mask : DiagonalMask, optional
        Zero the random start vector outside this subspace.
    leak : callable, optional
        ``y -> ||P U y||^2 / ||y||^2``; when given, ``lambda_1`` is computed
        from the Ritz vector through the leakage identity instead of from
        the Ritz value's modulus.
    keep : int, optional
        Ritz vectors retained per restart, default ``m // 2``.
    """
    if m < 10 and dim >= 10:
        raise ValueError("Krylov dimension must be at least 10")
    m = min(m, dim)
    keep = max(1, min(keep if keep is not None else m // 2, m - 1))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    if start_mask is not None:
        v = start_mask.apply(v)
    V = np.zeros((dim, m + 1), dtype=complex)
    Hm = np.zeros((m + 1, m), dtype=complex)
    V[:, 0] = v / np.linalg.norm(v)
    start = 0
    prev_mag = None
    converged = False
    restarts = 0
    while True:
        k = _extend(apply, V, Hm, start, m)
        w, S = np.linalg.eig(Hm[:k, :k])
        order = np.argsort(-np.abs(w), kind="stable")
        mu, s = w[order[0]], S[:, order[0]] / np.linalg.norm(S[:, order[0]])
        y = V[:, :k] @ s
        y /= np.linalg.norm(y)
        residual = float(abs(Hm[k, k - 1]) * abs(s[-1]))
        mag = abs(mu)
        if k < m or residual < tol:
            converged = True
            break
        if prev_mag is not None and abs(mag - prev_mag) < tol * 1e-3:
            converged = True
            break
        if restarts >= max_restarts:
            break
        prev_mag = mag
        restarts += 1
        # thick restart: A V Z = V Z G + f (e_m^T Z), Z orthonormal basis of kept Ritz vectors
        Z, _ = np.linalg.qr(S[:, order[:keep]])
        G = Z.conj().T @ Hm[:m, :m] @ Z
        tail = Hm[m, m - 1] * Z[m - 1, :]
        Vk = V[:, :m] @ Z
        f = V[:, m].copy()
        V[:] = 0
        Hm[:] = 0
        V[:, :keep] = Vk
        V[:, keep] = f
        Hm[:keep, :keep] = G
        Hm[keep, :keep] = tail
        start = keep
    if leak is not None:
        lam = max(-0.5 * math.log1p(-min(leak(y), 1.0)), 0.0)
    else:
        lam = -math.log(mag) if mag > 0 else math.inf
    return SpectralEstimate(lam, float(np.angle(mu)), m, restarts, residual, converged)


def mq_leading(plan: ChebyshevPlan, P: DiagonalMask, Q: DiagonalMask, **kwargs) -> SpectralEstimate:
    """:func:`arnoldi_leading` on ``M_Q = Q exp(-i H tau) Q`` with the leakage identity."""

    def apply(x):
        return apply_mq(plan, Q, x)

    def leak(y):
        u = evolve(plan, Q.apply(y))
        return float(np.linalg.norm(P.apply(u)) ** 2 / np.linalg.norm(y) ** 2)

    return arnoldi_leading(apply, plan.dim, start_mask=Q, leak=leak, **kwargs)


def dense_mq(U: np.ndarray, Q: DiagonalMask) -> np.ndarray:
    """``M_Q`` restricted to the Q subspace, from an explicit propagator."""
    q = Q.values.astype(bool)
    return U[np.ix_(q, q)]


def dense_leading(U: np.ndarray, Q: DiagonalMask):
    """Dense reference ``(lambda_1, theta_1)``; the modulus goes through the leakage identity."""
    q = Q.values.astype(bool)
    M = U[np.ix_(q, q)]
    w, V = np.linalg.eig(M)
    i = int(np.argmax(np.abs(w)))
    v = V[:, i] / np.linalg.norm(V[:, i])
    leaked = np.linalg.norm(U[np.ix_(~q, q)] @ v) ** 2
    return -0.5 * math.log1p(-leaked), float(np.angle(w[i]))


@dataclass(frozen=True)
class ZenoRow:
    tau: float
    lambda1: float
    variance: float

    @property
    def scaled(self) -> float:
        """``lambda_1 / tau^2``."""
        return self.lambda1 / self.tau**2

    @property
    def predicted(self) -> float:
        """Leading-order ``lambda / tau^2 = variance / 2``."""
        return self.variance / 2

    @property
    def ratio(self) -> float:
        return self.scaled / self.predicted if self.predicted > 0 else math.nan


def qhq_variances(H, Q: DiagonalMask):
    """Eigenpairs of ``Q H Q`` on the Q subspace and the variance of H in each."""
    Hd = H.toarray() if hasattr(H, "toarray") else np.asarray(H)
    if Hd.shape[0] > 5000:
        raise ValueError("dense Zeno check limited to D <= 5000")
    q = Q.values.astype(bool)
    E, W = np.linalg.eigh(Hd[np.ix_(q, q)])
    full = np.zeros((Hd.shape[0], W.shape[1]))
    full[q] = W
    HW = Hd @ full
    var = np.einsum("ij,ij->j", HW, HW) - E**2
    return E, np.maximum(var, 0.0)


def zeno_check(H, Q: DiagonalMask, taus) -> list[ZenoRow]:
    """Compare ``lambda_1(tau)`` at small ``tau`` with the minimal ``Q H Q`` variance.

    ``lambda_1`` comes from a dense eigensolve of ``M_Q``; to leading order
    it equals ``tau^2 * var / 2`` for the ``Q H Q`` eigenvector of smallest
    variance.
    """
    from .propagator import dense_propagator

    _, var = qhq_variances(H, Q)
    vmin = float(var.min())
    rows = []
    for tau in taus:
        lam, _ = dense_leading(dense_propagator(H, tau), Q)
        rows.append(ZenoRow(float(tau), lam, vmin))
    return rows
