"""FIR closed-loop map synthesis for state-feedback LQR.

Achievable maps satisfy, for a horizon ``T``,

    Phi_x(1) = I
    Phi_x(k + 1) = A Phi_x(k) + B Phi_u(k),    k = 1..T-1
    0 = A Phi_x(T) + B Phi_u(T)

and the problem separates over the columns of ``(Phi_x, Phi_u)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, InfeasibleError
from .lti import FirTransferMatrix, LtiSystem, fir_vstack
from .sparsity import SparsityMask


__all__ = [
    "ClosedLoopMaps",
    "LqrWeights",
    "achievability_residual",
    "synthesize_clmaps",
    "controller_to_clmaps",
    "lqr_cost",
    "dare_optimal_cost",
    "RANK_RTOL",
]

#: Relative singular-value tolerance for rank decisions.
RANK_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class ClosedLoopMaps:
    """Strictly proper maps from disturbance to state and input.

    ``tail`` records the norm of the first dropped term when the maps are a
    truncation of an infinite response (zero for synthesized FIR maps).
    """

    phi_x: FirTransferMatrix
    phi_u: FirTransferMatrix
    tail: float = 0.0

    def __post_init__(self):
        if self.phi_x.start != 1 or self.phi_u.start != 1:
            raise ValueError("closed-loop maps must be strictly proper (start = 1)")
        if self.phi_x.horizon != self.phi_u.horizon:
            raise DimensionError("phi_x and phi_u horizons differ")
        if self.phi_x.rows != self.phi_x.cols or self.phi_u.cols != self.phi_x.cols:
            raise DimensionError("phi_x must be n x n and phi_u m x n")

    @property
    def n(self) -> int:
        return self.phi_x.rows

    @property
    def m(self) -> int:
        return self.phi_u.rows

    @property
    def T(self) -> int:
        return self.phi_x.horizon

    def stacked(self) -> FirTransferMatrix:
        """``[Phi_x; Phi_u]`` as one ``(n + m) x n`` map."""
        return fir_vstack(self.phi_x, self.phi_u)


@dataclass(frozen=True, eq=False)
class LqrWeights:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for name, W in (("Q", Q), ("R", R)):
            if W.shape[0] != W.shape[1]:
                raise DimensionError(f"{name} must be square")
            if np.max(np.abs(W - W.T), initial=0.0) > 1e-12:
                raise ValueError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @classmethod
    def identity(cls, n: int, m: int) -> "LqrWeights":
        return cls(np.eye(n), np.eye(m))


def _check_dims(sys: LtiSystem, cl: ClosedLoopMaps):
    if cl.n != sys.n or cl.m != sys.m:
        raise DimensionError(
            f"maps are for n={cl.n}, m={cl.m}; system has n={sys.n}, m={sys.m}")


def achievability_defects(sys: LtiSystem, cl: ClosedLoopMaps) -> np.ndarray:
    """Stack of the ``T + 1`` defect matrices of the achievability recursion."""
    _check_dims(sys, cl)
    X, U = cl.phi_x.coeffs, cl.phi_u.coeffs
    T = cl.T
    out = np.empty((T + 1, sys.n, sys.n))
    out[0] = X[0] - np.eye(sys.n)
    AXBU = np.einsum("ab,kbc->kac", sys.A, X) + np.einsum("ab,kbc->kac", sys.B, U)
    out[1:T] = X[1:] - AXBU[:-1]
    out[T] = AXBU[-1]
    return out


def achievability_residual(sys: LtiSystem, cl: ClosedLoopMaps) -> float:
    """Root-sum-square of all achievability defects (zero iff achievable)."""
    return float(np.sqrt(np.sum(achievability_defects(sys, cl) ** 2)))


def _achievability_constraints(sys: LtiSystem, T: int) -> np.ndarray:
    """Matrix ``C`` with ``C v = [e_j; 0]`` for one column ``v = [x_1..x_T, u_1..u_T]``."""
    n, m = sys.n, sys.m
    C = np.zeros((n * (T + 1), (n + m) * T))
    xo, uo = 0, n * T
    C[:n, :n] = np.eye(n)
    for k in range(1, T + 1):
        rows = slice(n * k, n * (k + 1))
        # row block k: x_{k+1} - A x_k - B u_k  (closure drops x_{T+1})
        sign = -1.0 if k < T else 1.0
        C[rows, xo + n * (k - 1):xo + n * k] = sign * sys.A
        C[rows, uo + m * (k - 1):uo + m * k] = sign * sys.B
        if k < T:
            C[rows, xo + n * k:xo + n * (k + 1)] = np.eye(n)
    return C


def numerical_rank(M: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0


def _solve_eq_qp(H: np.ndarray, C: np.ndarray, d: np.ndarray,
                 rtol: float = RANK_RTOL) -> np.ndarray:
    """Minimize ``v' H v`` subject to ``C v = d`` through the KKT system.

    Dependent constraint rows are removed with an SVD first so the saddle
    matrix is nonsingular whenever ``H`` is positive definite on ``null(C)``.
    """
    U, s, Vt = np.linalg.svd(C, full_matrices=False)
    r = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    Cr = s[:r, None] * Vt[:r]
    dr = U[:, :r].T @ d
    nv = C.shape[1]
    K = np.block([[2 * H, Cr.T], [Cr, np.zeros((r, r))]])
    rhs = np.concatenate([np.zeros(nv), dr])
    try:
        sol = scipy.linalg.solve(K, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:nv]


def synthesize_clmaps(sys: LtiSystem, T: int, w: LqrWeights | None = None,
                      mask: SparsityMask | None = None) -> ClosedLoopMaps:
    """LQR-optimal achievable FIR closed-loop maps of horizon ``T``.

    Minimizes ``sum_k ||Q^{1/2} Phi_x(k)||_F^2 + ||R^{1/2} Phi_u(k)||_F^2``
    column by column.  With a ``mask`` (patterns for ``Phi_x`` in
    ``patterns_R`` and for ``Phi_u`` in ``patterns_M``) masked entries are
    fixed to exactly zero.

    Raises
    ------
    InfeasibleError
        If some column's constraints have no solution on the free entries,
        decided by comparing ``rank(C)`` and ``rank([C | d])``.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    n, m = sys.n, sys.m
    w = w if w is not None else LqrWeights.identity(n, m)
    if w.Q.shape != (n, n) or w.R.shape != (m, m):
        raise DimensionError("weight dimensions do not match the system")
    if mask is not None:
        if mask.n != n or mask.m != m:
            raise DimensionError("mask dimensions do not match the system")
        mask = mask.extended(T)

    C = _achievability_constraints(sys, T)
    H = scipy.linalg.block_diag(*([w.Q] * T + [w.R] * T))
    X = np.zeros((T, n, n))
    U = np.zeros((T, m, n))
    for j in range(n):
        d = np.zeros(C.shape[0])
        d[j] = 1.0
        if mask is None:
            free = np.ones(C.shape[1], bool)
        else:
            free = np.concatenate([mask.patterns_R[:, :, j].ravel(),
                                   mask.patterns_M[:, :, j].ravel()])
        Cf = C[:, free]
        r = numerical_rank(Cf)
        r_aug = numerical_rank(np.column_stack([Cf, d]))
        if r != r_aug:
            raise InfeasibleError(
                f"closed-loop constraints infeasible for column {j} "
                f"(rank {r} vs augmented {r_aug})", r, r_aug)
        v = np.zeros(C.shape[1])
        v[free] = _solve_eq_qp(H[np.ix_(free, free)], Cf, d)
        X[:, :, j] = v[:n * T].reshape(T, n)
        U[:, :, j] = v[n * T:].reshape(T, m)
    return ClosedLoopMaps(FirTransferMatrix(X, 1), FirTransferMatrix(U, 1))


def controller_to_clmaps(K, sys: LtiSystem, T: int) -> ClosedLoopMaps:
    """Truncated closed-loop response of the static gain ``u = K x``.

    ``Phi_x(k) = (A + B K)^{k-1}`` and ``Phi_u(k) = K (A + B K)^{k-1}``;
    the Frobenius norm of ``(A + B K)^T`` is stored as ``tail``.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (sys.m, sys.n):
        raise DimensionError(f"K must be {sys.m} x {sys.n}")
    Acl = sys.A + sys.B @ K
    X = np.empty((T, sys.n, sys.n))
    P = np.eye(sys.n)
    for k in range(T):
        X[k] = P
        P = Acl @ P
    U = np.einsum("ab,kbc->kac", K, X)
    return ClosedLoopMaps(FirTransferMatrix(X, 1), FirTransferMatrix(U, 1),
                          tail=float(np.linalg.norm(P)))


def lqr_cost(cl: ClosedLoopMaps, w: LqrWeights) -> float:
    """H2 cost ``sum_k tr(Phi_x' Q Phi_x) + tr(Phi_u' R Phi_u)``."""
    X, U = cl.phi_x.coeffs, cl.phi_u.coeffs
    return float(np.einsum("kij,il,klj->", X, w.Q, X) + np.einsum("kij,il,klj->", U, w.R, U))


def dare_optimal_cost(sys: LtiSystem, w: LqrWeights, rtol: float = 1e-12,
                      max_iter: int = 100_000) -> float:
    """``trace(P)`` for the stabilizing DARE solution, by Riccati iteration.

    Starts from ``P = Q`` and iterates
    ``P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA`` until the relative change
    in Frobenius norm drops below ``rtol``.
    """
    A, B, Q, R = sys.A, sys.B, w.Q, w.R
    P = Q.copy()
    for _ in range(max_iter):
        BtPA = B.T @ P @ A
        P_next = Q + A.T @ P @ A - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA)
        P_next = 0.5 * (P_next + P_next.T)
        if not np.isfinite(P_next).all():
            break
        delta, size = np.linalg.norm(P_next - P), np.linalg.norm(P_next)
        if not np.isfinite(size):
            break
        P = P_next
        if delta <= rtol * max(size, 1e-300):
            return float(np.trace(P))
    raise RuntimeError("Riccati iteration did not converge; is (A, B) stabilizable?")
