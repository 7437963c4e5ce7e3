"""Chebyshev propagation ``psi -> exp(-i H tau) psi`` for sparse Hermitian H.

The spectrum is mapped onto ``[-1, 1]`` with ``H = c + h X``, after which

    exp(-i H tau) = exp(-i b) sum_k (2 - delta_k0) (-i)^k J_k(a) T_k(X),

``a = h tau``, ``b = c tau``.  ``T_k(X) psi`` follows the three-term
recurrence, so only two work vectors are live at any time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp

DEFAULT_TOL = 1e-12
DENSE_ORACLE_CAP = 5000

_BIG = 1e250


def spectral_bounds(op, margin: float = 0.01) -> tuple[float, float]:
    """Gershgorin interval of a Hermitian matrix, widened by ``margin`` of its width.

    A zero-width interval (e.g. a multiple of the identity) is widened by
    ``margin`` in absolute units instead.
    """
    A = sp.csr_matrix(op)
    diag = A.diagonal().real
    radius = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    lo = float(np.min(diag - radius))
    hi = float(np.max(diag + radius))
    pad = margin * (hi - lo) if hi > lo else margin
    return lo - pad, hi + pad


def bessel_j_all(kmax: int, x: float) -> np.ndarray:
    """``J_0(x) .. J_kmax(x)`` by Miller's downward recurrence.

    The unnormalised sequence is started far above ``max(kmax, x)`` and
    normalised with ``J_0 + 2 sum_k J_2k = 1``.
    """
    if kmax < 0:
        raise ValueError("Bessel order must be non-negative")
    if x < 0:
        raise ValueError("argument must be non-negative")
    out = np.zeros(kmax + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    top = max(kmax, math.ceil(x))
    start = top + 30 + int(math.sqrt(40.0 * top))
    start += start % 2
    vals = np.zeros(start + 2)
    j_next, j_cur = 0.0, 1e-300
    norm = 0.0
    two_over_x = 2.0 / x
    for k in range(start, 0, -1):
        j_prev = k * two_over_x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        vals[k - 1] = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        if abs(j_cur) > _BIG:
            j_cur /= _BIG
            j_next /= _BIG
            norm /= _BIG
            vals[k - 1 :] /= _BIG
    norm += vals[0]
    out[:] = vals[: kmax + 1] / norm
    return out


def bessel_j(k: int, x: float) -> float:
    """Bessel function of the first kind ``J_k(x)`` for integer ``k >= 0``."""
    return float(bessel_j_all(k, x)[k])


@numba.njit(cache=True, fastmath=False)
def _cheb_step(indptr, indices, data, cur, prev, out, coeff):
    # prev <- 2 X cur - prev ; out += coeff * prev   (rows independent)
    n = cur.shape[0]
    for i in range(n):
        acc = 0j
        for jj in range(indptr[i], indptr[i + 1]):
            acc += data[jj] * cur[indices[jj]]
        val = 2.0 * acc - prev[i]
        prev[i] = val
        out[i] += coeff * val


@numba.njit(cache=True, fastmath=False)
def _cheb_first(indptr, indices, data, psi, cur, out, c0, c1):
    # cur <- X psi ; out <- c0 psi + c1 cur
    n = psi.shape[0]
    for i in range(n):
        acc = 0j
        for jj in range(indptr[i], indptr[i + 1]):
            acc += data[jj] * psi[indices[jj]]
        cur[i] = acc
        out[i] = c0 * psi[i] + c1 * acc


@numba.njit(cache=True, fastmath=False)
def _cheb_step_block(indptr, indices, data, cur, prev, out, coeff):
    n, m = cur.shape
    acc = np.empty(m, dtype=np.complex128)
    for i in range(n):
        acc[:] = 0j
        for jj in range(indptr[i], indptr[i + 1]):
            a = data[jj]
            row = cur[indices[jj]]
            for c in range(m):
                acc[c] += a * row[c]
        for c in range(m):
            val = 2.0 * acc[c] - prev[i, c]
            prev[i, c] = val
            out[i, c] += coeff * val


@numba.njit(cache=True, fastmath=False)
def _cheb_first_block(indptr, indices, data, psi, cur, out, c0, c1):
    n, m = psi.shape
    for i in range(n):
        for c in range(m):
            cur[i, c] = 0j
        for jj in range(indptr[i], indptr[i + 1]):
            a = data[jj]
            row = psi[indices[jj]]
            for c in range(m):
                cur[i, c] += a * row[c]
        for c in range(m):
            out[i, c] = c0 * psi[i, c] + c1 * cur[i, c]


@dataclass(frozen=True, eq=False)
class ChebyshevPlan:
    """Coefficients and rescaled operator for one ``(H, tau)`` pair."""

    e_min: float
    e_max: float
    tau: float
    tol: float
    coeffs: np.ndarray = field(repr=False)
    scaled: sp.csr_matrix = field(repr=False)

    @property
    def a(self) -> float:
        return self.tau * (self.e_max - self.e_min) / 2

    @property
    def b(self) -> float:
        return self.tau * (self.e_max + self.e_min) / 2

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def dim(self) -> int:
        return self.scaled.shape[0]


def chebyshev_order(a: float, tol: float) -> tuple[int, np.ndarray]:
    """Truncation order ``K >= a`` with ``2 sum_{k>=K} |J_k(a)| < tol`` and ``J_0..J_K``."""
    if a == 0.0:
        return 0, np.ones(1)
    extra = 40 + int(20 * a ** (1 / 3))
    while True:
        kmax = math.ceil(a) + extra
        jk = bessel_j_all(kmax, a)
        tail = 2.0 * np.cumsum(np.abs(jk)[::-1])[::-1]
        ok = np.flatnonzero(tail < tol)
        if ok.size and ok[0] < kmax - 5:
            K = max(int(ok[0]), math.ceil(a))
            return K, jk[: K + 1]
        extra *= 2


def make_plan(op, tau: float, tol: float = DEFAULT_TOL, bounds=None) -> ChebyshevPlan:
    """Build the propagator for ``exp(-i op tau)`` accurate to ``tol`` per application."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if not tol >= 1e-15:
        raise ValueError(
            f"tolerance {tol:g} is below what double precision can deliver (>= 1e-15)"
        )
    A = sp.csr_matrix(op)
    e_min, e_max = bounds if bounds is not None else spectral_bounds(A)
    center = (e_max + e_min) / 2
    half = (e_max - e_min) / 2
    a = tau * half
    K, jk = chebyshev_order(a, tol)
    k = np.arange(K + 1)
    coeffs = (2.0 - (k == 0)) * (-1j) ** k * jk * np.exp(-1j * tau * center)
    scaled = sp.csr_matrix((A - center * sp.identity(A.shape[0], format="csr")) / half)
    scaled.sort_indices()
    return ChebyshevPlan(e_min, e_max, tau, tol, coeffs, scaled)


def evolve(plan: ChebyshevPlan, psi: np.ndarray) -> np.ndarray:
    """Apply ``exp(-i H tau)`` to ``psi`` (shape ``(D,)`` or ``(D, k)``)."""
    if psi.shape[0] != plan.dim:
        raise ValueError(f"state has dimension {psi.shape[0]}, plan expects {plan.dim}")
    c = plan.coeffs
    psi = np.ascontiguousarray(psi, dtype=complex)
    if plan.order == 0:
        return c[0] * psi
    X = plan.scaled
    if X.dtype.kind == "c":
        raise TypeError("the rescaled operator must be real")
    args = (X.indptr, X.indices, np.asarray(X.data, dtype=float))
    block = psi.ndim == 2
    first = _cheb_first_block if block else _cheb_first
    step = _cheb_step_block if block else _cheb_step
    prev = psi.copy()
    cur = np.empty_like(psi)
    out = np.empty_like(psi)
    first(*args, prev, cur, out, c[0], c[1])
    for k in range(2, plan.order + 1):
        # after the step, ``prev`` holds T_k psi and becomes the new ``cur``
        step(*args, cur, prev, out, c[k])
        prev, cur = cur, prev
    return out


def dense_evolve_oracle(op, psi: np.ndarray, tau: float) -> np.ndarray:
    """Exact ``exp(-i op tau) psi`` from a full eigendecomposition (``D <= 5000``)."""
    D = op.shape[0]
    if D > DENSE_ORACLE_CAP:
        raise ValueError(f"dense oracle limited to D <= {DENSE_ORACLE_CAP}, got {D}")
    dense = op.toarray() if sp.issparse(op) else np.asarray(op)
    w, V = np.linalg.eigh(dense)
    return V @ (np.exp(-1j * w * tau) * (V.conj().T @ psi))


def dense_propagator(op, tau: float) -> np.ndarray:
    """Full ``exp(-i op tau)`` matrix; test oracle only."""
    D = op.shape[0]
    if D > DENSE_ORACLE_CAP:
        raise ValueError(f"dense oracle limited to D <= {DENSE_ORACLE_CAP}, got {D}")
    dense = op.toarray() if sp.issparse(op) else np.asarray(op)
    w, V = np.linalg.eigh(dense)
    return (V * np.exp(-1j * w * tau)) @ V.conj().T
