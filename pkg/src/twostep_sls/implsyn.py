"""Implementation matrices for given closed-loop maps.

For a controller ``(R_c, M_c)`` with ``R_c(1) = I`` define

    Delta_c = [zI - A, -B] [R_c; M_c],     Delta = Delta_c - I.

``(R_c, M_c)`` implements ``(Phi_x, Phi_u)`` exactly iff
``[R_c; M_c] = [Phi_x; Phi_u] Delta_c``.  Everything here works one state
column at a time on the free vector

    v = [R_c(2..T_c)[:, j]; M_c(1..T_c)[:, j]]

through the affine maps ``error = F v - G[:, j]`` and
``Delta(1..T_c)[:, j] = D v + d_j``.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clsyn import RANK_RTOL, ClosedLoopMaps, numerical_rank
from .exceptions import DimensionError, InfeasibleError, TailError, UnstableError
from .lti import (FirTransferMatrix, LtiSystem, fir_inverse_checked,
                  fir_inverse_truncated, fir_multiply, fir_subtract, fir_vstack,
                  norm_h2)
from .sparsity import SparsityMask


__all__ = [
    "ImplementationMatrices",
    "ImplementationConstraints",
    "FeasibilityReport",
    "SynthesisDiagnostics",
    "compute_delta_c",
    "constraint_residual",
    "build_F_G",
    "check_feasibility",
    "solve_exact",
    "synthesize_implementation",
    "synthesize_with_delta_bound",
    "lambda_schedule",
    "implemented_maps",
    "closed_loop_difference",
    "implied_controller",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ImplementationMatrices:
    r_c: FirTransferMatrix
    m_c: FirTransferMatrix

    def __post_init__(self):
        if self.r_c.start != 1 or self.m_c.start != 1:
            raise ValueError("implementation matrices must be strictly proper")
        if self.r_c.horizon != self.m_c.horizon:
            raise DimensionError("r_c and m_c horizons differ")
        if self.r_c.rows != self.r_c.cols or self.m_c.cols != self.r_c.cols:
            raise DimensionError("r_c must be n x n and m_c m x n")
        if not np.array_equal(self.r_c.coeffs[0], np.eye(self.r_c.rows)):
            raise ValueError("R_c(1) must be the identity")

    @classmethod
    def from_clmaps(cls, cl: ClosedLoopMaps) -> "ImplementationMatrices":
        """Use the closed-loop maps as their own implementation."""
        X = np.array(cl.phi_x.coeffs)
        X[0] = np.eye(cl.n)
        return cls(FirTransferMatrix(X, 1), cl.phi_u)

    @property
    def n(self) -> int:
        return self.r_c.rows

    @property
    def m(self) -> int:
        return self.m_c.rows

    @property
    def T_c(self) -> int:
        return self.r_c.horizon

    def stacked(self) -> FirTransferMatrix:
        return fir_vstack(self.r_c, self.m_c)


@dataclass(frozen=True, eq=False)
class ImplementationConstraints:
    """``F v = G[:, j]`` for every state column ``j``, plus the ``Delta`` map.

    ``F`` has ``(T + T_c)(n + m)`` rows (spectral index major, state rows
    before input rows) and ``(T_c - 1) n + T_c m`` columns.
    """

    F: np.ndarray
    G: np.ndarray
    D: np.ndarray
    d: np.ndarray
    n: int
    m: int
    T: int
    T_c: int

    @property
    def n_free(self) -> int:
        return self.F.shape[1]

    def unpack(self, V: np.ndarray) -> ImplementationMatrices:
        """Columns of ``V`` (one per state) back into ``(R_c, M_c)``."""
        n, m, T_c = self.n, self.m, self.T_c
        R = np.zeros((T_c, n, n))
        R[0] = np.eye(n)
        R[1:] = V[:(T_c - 1) * n].reshape(T_c - 1, n, n)
        M = V[(T_c - 1) * n:].reshape(T_c, m, n)
        return ImplementationMatrices(FirTransferMatrix(R, 1), FirTransferMatrix(M, 1))

    def free_entries(self, mask: SparsityMask | None, j: int) -> np.ndarray:
        """Boolean selector over ``v`` for column ``j`` of a mask."""
        if mask is None:
            return np.ones(self.n_free, bool)
        if mask.n != self.n or mask.m != self.m:
            raise DimensionError("mask dimensions do not match the system")
        mask = mask.extended(self.T_c)
        return np.concatenate([mask.patterns_R[1:, :, j].ravel(),
                               mask.patterns_M[:, :, j].ravel()])


@dataclass(frozen=True)
class FeasibilityReport:
    rank_F: int
    rank_FG: int
    feasible: bool
    nullity: int
    solution_dim: int


@dataclass
class SynthesisDiagnostics:
    objective: float
    eq_residual: float
    delta_norm: float
    iterations: int
    converged: bool
    lam: float
    l1_weight: float
    column_iterations: list = field(default_factory=list)
    history: list = field(default_factory=list)

    def to_text(self) -> str:
        """Key-value block, one ``key = value`` per line."""
        keys = ["objective", "eq_residual", "delta_norm", "iterations", "converged",
                "lam", "l1_weight"]
        return "\n".join(f"{k} = {getattr(self, k)}" for k in keys) + "\n"


def _check_system(sys: LtiSystem, n: int, m: int):
    if sys.n != n or sys.m != m:
        raise DimensionError(f"system is n={sys.n}, m={sys.m}; expected n={n}, m={m}")


def compute_delta_c(sys: LtiSystem, impl: ImplementationMatrices) -> FirTransferMatrix:
    """``Delta_c = [zI - A, -B][R_c; M_c]`` on spectral indices ``0..T_c``."""
    _check_system(sys, impl.n, impl.m)
    R, M = impl.r_c.coeffs, impl.m_c.coeffs
    T_c = impl.T_c
    out = np.zeros((T_c + 1, impl.n, impl.n))
    out[0] = R[0]
    out[1:] = -(np.einsum("ab,kbc->kac", sys.A, R) + np.einsum("ab,kbc->kac", sys.B, M))
    out[1:T_c] += R[1:]
    return FirTransferMatrix(out, start=0)


def constraint_error(cl: ClosedLoopMaps, impl: ImplementationMatrices,
                     sys: LtiSystem) -> FirTransferMatrix:
    """``[R_c; M_c] - [Phi_x; Phi_u] Delta_c`` on indices ``1..T + T_c``."""
    if cl.n != impl.n or cl.m != impl.m:
        raise DimensionError("closed-loop maps and implementation differ in size")
    prod = fir_multiply(cl.stacked(), compute_delta_c(sys, impl))
    return fir_subtract(impl.stacked(), prod).truncate(cl.T + impl.T_c)


def constraint_residual(cl: ClosedLoopMaps, impl: ImplementationMatrices,
                        sys: LtiSystem) -> float:
    """H2 norm of the implementation constraint error (zero iff exact)."""
    return norm_h2(constraint_error(cl, impl, sys))


def build_F_G(sys: LtiSystem, cl: ClosedLoopMaps, T_c: int) -> ImplementationConstraints:
    """Assemble the block system ``F v = G`` for implementation order ``T_c``.

    Works over the full column ``y = [r_1..r_Tc, m_1..m_Tc]``:
    ``Delta_c = Dy y`` and ``error = (P - Tphi Dy) y``, then moves the
    fixed ``r_1 = e_j`` block to the right-hand side.
    """
    if T_c < 1:
        raise ValueError("T_c must be at least 1")
    _check_system(sys, cl.n, cl.m)
    n, m, T = cl.n, cl.m, cl.T
    p = n + m
    ny = T_c * p
    ro = lambda i: (i - 1) * n              # offset of r_i in y
    mo = lambda i: T_c * n + (i - 1) * m    # offset of m_i in y

    # Delta_c(i) blocks, i = 0..T_c
    Dy = np.zeros(((T_c + 1) * n, ny))
    Dy[:n, ro(1):ro(1) + n] = np.eye(n)
    for i in range(1, T_c + 1):
        rows = slice(i * n, (i + 1) * n)
        if i < T_c:
            Dy[rows, ro(i + 1):ro(i + 1) + n] = np.eye(n)
        Dy[rows, ro(i):ro(i) + n] = -sys.A
        Dy[rows, mo(i):mo(i) + m] = -sys.B

    # selection of [r_k; m_k] into error block k, k = 1..T+T_c
    nk = T + T_c
    P = np.zeros((nk * p, ny))
    for k in range(1, T_c + 1):
        P[(k - 1) * p:(k - 1) * p + n, ro(k):ro(k) + n] = np.eye(n)
        P[(k - 1) * p + n:k * p, mo(k):mo(k) + m] = np.eye(m)

    # block Toeplitz multiplication by [Phi_x; Phi_u]
    Phi = cl.stacked()
    Tphi = np.zeros((nk * p, (T_c + 1) * n))
    for k in range(1, nk + 1):
        for i in range(0, T_c + 1):
            s = k - i
            if 1 <= s <= T:
                Tphi[(k - 1) * p:k * p, i * n:(i + 1) * n] = Phi[s]

    L = P - Tphi @ Dy
    free = np.ones(ny, bool)
    free[ro(1):ro(1) + n] = False
    # v ordering is r_2..r_Tc then m_1..m_Tc, which matches y with r_1 removed
    F = L[:, free]
    G = -L[:, ~free]
    D = Dy[n:, free]
    d = Dy[n:, ~free]
    return ImplementationConstraints(F, G, D, d, n, m, T, T_c)


def check_feasibility(F, G, rtol: float = RANK_RTOL) -> FeasibilityReport:
    """Rouché-Capelli test of ``F v = G`` (``G`` may hold several columns).

    The solution set, if non-empty, has dimension ``nullity(F)`` per column
    of ``G``.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    G = np.asarray(G, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    if F.shape[0] != G.shape[0]:
        raise DimensionError("F and G row counts differ")
    rank_F = numerical_rank(F, rtol)
    rank_FG = numerical_rank(np.hstack([F, G]), rtol)
    nullity = F.shape[1] - rank_F
    return FeasibilityReport(rank_F, rank_FG, rank_F == rank_FG, nullity,
                             nullity * G.shape[1])


def solve_exact(cons: ImplementationConstraints,
                mask: SparsityMask | None = None) -> ImplementationMatrices:
    """Minimum-norm exact implementation, with masked entries fixed at zero.

    Raises
    ------
    InfeasibleError
        If any column's masked system is inconsistent.
    """
    if mask is not None:
        if mask.n != cons.n or mask.m != cons.m:
            raise DimensionError("mask dimensions do not match the system")
        mask.extended(cons.T_c).require_identity()
    V = np.zeros((cons.n_free, cons.n))
    for j in range(cons.n):
        free = cons.free_entries(mask, j)
        Ff = cons.F[:, free]
        rep = check_feasibility(Ff, cons.G[:, j])
        if not rep.feasible:
            raise InfeasibleError(
                f"no exact implementation for column {j} "
                f"(rank {rep.rank_F} vs augmented {rep.rank_FG})", rep.rank_F, rep.rank_FG)
        V[free, j] = np.linalg.lstsq(Ff, cons.G[:, j], rcond=RANK_RTOL)[0]
    return cons.unpack(V)


# -- relaxed synthesis --------------------------------------------------------

def _soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _power_iteration(H: np.ndarray, iters: int = 100, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric PSD matrix."""
    if H.shape[0] == 0:
        return 0.0
    x = np.random.default_rng(seed).standard_normal(H.shape[0])
    lam = 0.0
    for _ in range(iters):
        y = H @ x
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        x = y / nrm
        lam_new = x @ H @ x
        if abs(lam_new - lam) <= 1e-10 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return float(lam)


@dataclass
class _ColumnResult:
    v: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: list


def _polish(H, b, weights, x, total):
    """KKT-certified minimizer on the support of ``x`` with its signs held fixed.

    Takes the least-squares Newton step on the support (``H`` may be
    singular there).  Returns ``(x, f)`` only if the candidate is stationary
    on the support, keeps the signs of penalized entries, satisfies the subgradient bound on the
    zero entries and does not raise the objective; otherwise ``None``.
    """
    S = x != 0
    if not S.any():
        return None
    sgn = np.sign(x[S])
    HS = H[np.ix_(S, S)]
    rhs = -(b[S] + weights[S] * sgn)
    step = np.linalg.lstsq(HS, rhs - HS @ x[S], rcond=None)[0]
    xs = x[S] + step
    scale = max(np.abs(b).max(initial=0.0), np.abs(H).max(initial=0.0), 1.0)
    if (not np.isfinite(xs).all() or np.any((np.sign(xs) != sgn) & (weights[S] > 0))
            or np.abs(HS @ xs - rhs).max() > 1e-10 * scale):
        return None
    cand = np.zeros_like(x)
    cand[S] = xs
    g = H @ cand + b
    if np.any(np.abs(g[~S]) > weights[~S] + 1e-10 * scale):
        return None
    f = total(cand)
    return (cand, f) if f <= total(x) else None


def _solve_column(H, b, c, weights, x0, rtol, max_iter, window=10, keep_history=False,
                  polish_every=50):
    """Monotone FISTA with adaptive restart for ``0.5 x'Hx + b'x + c + sum w|x|``.

    The step is ``1/L`` with ``L`` from power iteration; if the sufficient
    decrease test fails ``L`` is doubled (backtracking).  Every
    ``polish_every`` iterations, and at the end, an exact solve on the current
    support is attempted; a KKT-certified result ends the iteration
    (see :func:`_polish`).
    """
    def smooth(x):
        return 0.5 * x @ (H @ x) + b @ x + c

    def total(x):
        return smooth(x) + weights @ np.abs(x)

    L = 1.01 * _power_iteration(H)
    x = x0.copy()
    if L <= 0 or x.size == 0:
        f = total(x)
        return _ColumnResult(x, f, 0, True, [f])
    y, t = x.copy(), 1.0
    f = total(x)
    hist = [f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gy = H @ y + b
        sy = smooth(y)
        while True:
            z = _soft_threshold(y - gy / L, weights / L)
            dz = z - y
            if smooth(z) <= sy + gy @ dz + 0.5 * L * (dz @ dz) + 1e-12 * max(abs(sy), 1.0):
                break
            L *= 2.0
        fz = total(z)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if fz <= f:
            x_new, f_new = z, fz
            y = x_new + ((t - 1.0) / t_next) * (x_new - x)
            # restart momentum when it points uphill
            if (y - x_new) @ (x_new - x) < 0:
                t_next = 1.0
        else:
            x_new, f_new = x, f
            y, t_next = x.copy(), 1.0
        x, f, t = x_new, f_new, t_next
        hist.append(f)
        if it % polish_every == 0:
            polished = _polish(H, b, weights, x, total)
            if polished is not None:
                x, f = polished
                hist.append(f)
                return _ColumnResult(x, f, it, True, hist if keep_history else [])
        if len(hist) > window:
            prev = hist[-1 - window]
            if prev - f <= rtol * window * max(abs(f), 1e-300):
                converged = True
                break
    polished = _polish(H, b, weights, x, total)
    if polished is not None:
        x, f = polished
        hist.append(f)
    return _ColumnResult(x, f, it, converged, hist if keep_history else [])


def _quadratic_terms(cons: ImplementationConstraints, j: int, free: np.ndarray, lam: float):
    """Hessian, linear term and constant of ``||F v - G_j||^2 + lam ||D v + d_j||^2``."""
    F = cons.F[:, free]
    D = cons.D[:, free]
    g = cons.G[:, j]
    dj = cons.d[:, j]
    H = 2.0 * (F.T @ F + lam * D.T @ D)
    b = 2.0 * (-F.T @ g + lam * D.T @ dj)
    c = g @ g + lam * dj @ dj
    return H, b, c


def _entry_weights(cons: ImplementationConstraints, j: int, l1_weight: float, penalties):
    """Per-entry l1 weights over ``v`` for column ``j``."""
    w = np.full(cons.n_free, float(l1_weight))
    if penalties is not None:
        for wr, wm, scale in penalties:
            wr = np.asarray(wr, dtype=float)
            wm = np.asarray(wm, dtype=float)
            idx_r = np.minimum(np.arange(1, cons.T_c), wr.shape[0] - 1)
            idx_m = np.minimum(np.arange(cons.T_c), wm.shape[0] - 1)
            w += scale * np.concatenate([wr[idx_r, :, j].ravel(), wm[idx_m, :, j].ravel()])
    return w


def synthesize_implementation(sys: LtiSystem, cl: ClosedLoopMaps, T_c: int,
                              mask: SparsityMask | None = None, lam: float = 0.0,
                              l1_weight: float = 0.0, penalties=None,
                              rtol: float = 1e-9, max_iter: int = 20_000,
                              init: ImplementationMatrices | None = None,
                              workers: int = 1, keep_history: bool = False):
    """Regularized implementation synthesis by proximal gradient.

    Minimizes, independently for every state column,

        ||[R_c; M_c] - [Phi_x; Phi_u] Delta_c||_H2^2 + lam ||Delta||_H2^2
            + sum of weighted |entries| of R_c(2..T_c), M_c

    over the entries allowed by ``mask``; forbidden entries are exactly zero.

    Parameters
    ----------
    penalties : iterable of (weights_R, weights_M, scale), optional
        Extra weighted l1 terms, e.g. from
        :func:`~twostep_sls.sparsity.delay_penalty_weights`.  Weight arrays
        are indexed ``[k - 1, row, col]``.
    init : ImplementationMatrices, optional
        Starting point; default is ``R_c = I z^-1``, ``M_c = 0``.
    workers : int
        Number of threads for the independent column problems.

    Returns
    -------
    impl : ImplementationMatrices
    delta_c : FirTransferMatrix
    diagnostics : SynthesisDiagnostics
        ``converged`` is ``False`` (and a warning is issued) when some column
        hit ``max_iter``; the best iterate is returned regardless.
    """
    if lam < 0 or l1_weight < 0:
        raise ValueError("lam and l1_weight must be non-negative")
    if mask is not None:
        mask.extended(T_c).require_identity()
    cons = build_F_G(sys, cl, T_c)
    penalties = list(penalties) if penalties is not None else None
    if init is not None:
        if init.T_c != T_c or init.n != cons.n or init.m != cons.m:
            raise DimensionError("init has the wrong shape")
        V0 = np.concatenate([init.r_c.coeffs[1:].reshape(-1, cons.n),
                             init.m_c.coeffs.reshape(-1, cons.n)])
    else:
        V0 = np.zeros((cons.n_free, cons.n))

    def column(j):
        free = cons.free_entries(mask, j)
        H, b, c = _quadratic_terms(cons, j, free, lam)
        w = _entry_weights(cons, j, l1_weight, penalties)[free]
        return free, _solve_column(H, b, c, w, V0[free, j], rtol, max_iter,
                                   keep_history=keep_history)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(column, range(cons.n)))
        log.debug("solved %d columns on %d threads", cons.n, workers)
    else:
        results = [column(j) for j in range(cons.n)]

    V = np.zeros((cons.n_free, cons.n))
    for j, (free, res) in enumerate(results):
        V[free, j] = res.v
    impl = cons.unpack(V)
    delta_c = compute_delta_c(sys, impl)
    err = cons.F @ V - cons.G
    delta = cons.D @ V + cons.d
    converged = all(r.converged for _, r in results)
    l1_term = sum(_entry_weights(cons, j, l1_weight, penalties) @ np.abs(V[:, j])
                  for j in range(cons.n))
    diag = SynthesisDiagnostics(
        # evaluated from the residuals, so it cannot round below zero
        objective=float(np.sum(err ** 2) + lam * np.sum(delta ** 2) + l1_term),
        eq_residual=float(np.linalg.norm(err)),
        delta_norm=float(np.linalg.norm(delta)),
        iterations=max(r.iterations for _, r in results),
        converged=converged, lam=lam, l1_weight=l1_weight,
        column_iterations=[r.iterations for _, r in results])
    if keep_history:
        diag.history = [r.history for _, r in results]
    if not converged:
        warnings.warn(f"proximal gradient hit max_iter={max_iter}; returning best iterate",
                      RuntimeWarning, stacklevel=2)
    return impl, delta_c, diag


def synthesize_with_delta_bound(sys: LtiSystem, cl: ClosedLoopMaps, T_c: int,
                                gamma: float, mask: SparsityMask | None = None,
                                lam_min: float = 1e-4, lam_max: float = 1e6,
                                log_tol: float = 1e-3, **kwargs):
    """Relaxed synthesis with the hard bound ``||Delta||_H2 <= gamma``.

    The squared-norm bound is handled through its Lagrange multiplier: ``lam``
    is raised tenfold from ``lam_min`` until the bound holds, then the
    smallest such ``lam`` is located by bisection on ``log10(lam)`` to
    ``log_tol``.  Each solve is warm-started from the previous one.

    Raises
    ------
    InfeasibleError
        If even ``lam_max`` leaves ``||Delta||_H2 > gamma``.
    """
    out = synthesize_implementation(sys, cl, T_c, mask, lam=0.0, **kwargs)
    if out[2].delta_norm <= gamma:
        return out
    hi = np.log10(lam_min)
    while True:
        best = synthesize_implementation(sys, cl, T_c, mask, lam=10.0 ** hi,
                                         init=out[0], **kwargs)
        if best[2].delta_norm <= gamma:
            break
        if hi >= np.log10(lam_max):
            raise InfeasibleError(f"||Delta|| <= {gamma} not reached with lam={lam_max:g}")
        out, hi = best, min(hi + 1.0, np.log10(lam_max))
    lo = hi - 1.0
    while hi - lo > log_tol:
        mid = 0.5 * (lo + hi)
        cand = synthesize_implementation(sys, cl, T_c, mask, lam=10.0 ** mid,
                                         init=best[0], **kwargs)
        if cand[2].delta_norm <= gamma:
            hi, best = mid, cand
        else:
            lo = mid
    return best


def lambda_schedule(sys: LtiSystem, cl: ClosedLoopMaps, T_c: int,
                    mask: SparsityMask | None = None, start_lambda: float = 0.01,
                    factor: float = 10.0, checker=None, max_escalations: int = 8,
                    **kwargs):
    """Increase ``lam`` geometrically until the implementation passes ``checker``.

    ``checker(sys, impl)`` returns truthy for a stable implementation; the
    default runs the distributed norm-power certificate on the internal
    dynamics.  Tries ``start_lambda * factor**k`` for ``k = 0..max_escalations``.

    Returns
    -------
    (ImplementationMatrices, float)
        The first accepted implementation and its ``lam``.
    """
    if factor <= 1:
        raise ValueError("factor must exceed 1")
    if checker is None:
        from .stability import certify_implementation
        checker = certify_implementation
    lam = start_lambda
    for k in range(max_escalations + 1):
        lam = start_lambda * factor ** k
        impl, _, _ = synthesize_implementation(sys, cl, T_c, mask, lam=lam, **kwargs)
        if checker(sys, impl):
            return impl, lam
        log.info("lambda %.3g failed the stability check; escalating", lam)
    raise UnstableError(
        f"no certified implementation after {max_escalations} escalations (last lam={lam:g})")


# -- implemented maps ----------------------------------------------------------

def implemented_maps(sys: LtiSystem, impl: ImplementationMatrices,
                     eval_horizon: int, tail_tol: float = 1e-8) -> ClosedLoopMaps:
    """``[R_c; M_c] Delta_c^{-1}`` on spectral indices ``1..eval_horizon``.

    Raises :class:`~twostep_sls.exceptions.TailError` if ``Delta_c^{-1}``
    has not decayed below ``tail_tol`` by ``eval_horizon``.
    """
    inv = fir_inverse_checked(compute_delta_c(sys, impl), eval_horizon, tail_tol)
    prod = fir_multiply(impl.stacked(), inv).truncate(eval_horizon)
    return ClosedLoopMaps(FirTransferMatrix(prod.coeffs[:, :impl.n], 1),
                          FirTransferMatrix(prod.coeffs[:, impl.n:], 1))


def closed_loop_difference(cl: ClosedLoopMaps, impl: ImplementationMatrices,
                           sys: LtiSystem, eval_horizon: int | None = None,
                           tail_tol: float = 1e-8) -> tuple[float, float]:
    """Relative H2 distance between implemented and desired maps.

    Returns ``(||Phi~_x - Phi_x|| / ||Phi_x||, ||Phi~_u - Phi_u|| / ||Phi_u||)``.
    Without ``eval_horizon`` the horizon starts at ``4 (T + T_c)`` and doubles
    up to ``40 (T + T_c)`` until ``Delta_c^{-1}`` has decayed.
    """
    if eval_horizon is not None:
        H = max(eval_horizon, cl.T)
        got = implemented_maps(sys, impl, H, tail_tol)
    else:
        H, cap = 4 * (cl.T + impl.T_c), 40 * (cl.T + impl.T_c)
        while True:
            try:
                got = implemented_maps(sys, impl, H, tail_tol)
                break
            except TailError:
                if H >= cap:
                    raise
                H = min(2 * H, cap)
    dx = np.linalg.norm(got.phi_x.coeffs - cl.phi_x.padded(1, H))
    du = np.linalg.norm(got.phi_u.coeffs - cl.phi_u.padded(1, H))
    nx, nu = norm_h2(cl.phi_x), norm_h2(cl.phi_u)
    return (float(dx / nx) if nx > 0 else float(dx),
            float(du / nu) if nu > 0 else float(du))


def implied_controller(cl: ClosedLoopMaps, horizon: int) -> FirTransferMatrix:
    """Truncated ``K = Phi_u Phi_x^{-1}`` (proper, starting at ``z^0``)."""
    zx = FirTransferMatrix(cl.phi_x.coeffs, start=0)
    zu = FirTransferMatrix(cl.phi_u.coeffs, start=0)
    return fir_multiply(zu, fir_inverse_truncated(zx, horizon)).truncate(horizon)
