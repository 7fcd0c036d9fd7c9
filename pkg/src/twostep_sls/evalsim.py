"""Time-domain simulation of implemented controllers and their LQR cost.

The controller runs

    delta_t = x_t - sum_{k=2}^{T_c} R_c(k) delta_{t-k+1}
    u_t     = sum_{k=1}^{T_c} M_c(k) delta_{t-k+1}

against ``x_{t+1} = A x_t + B u_t + w_t`` from zero state and zero history.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .clsyn import ClosedLoopMaps, LqrWeights, dare_optimal_cost, lqr_cost
from .exceptions import DimensionError, TailError, UnstableError
from .implsyn import ImplementationMatrices
from .lti import FirTransferMatrix, LtiSystem
from .stability import build_internal_dynamics


__all__ = [
    "Trajectory",
    "simulate_controller",
    "empirical_clmaps",
    "normalized_lqr_cost",
    "implementation_cost",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Signals at ``t = 0..horizon-1``; row ``t`` of each array is time ``t``."""

    x: np.ndarray
    u: np.ndarray
    delta_hat: np.ndarray

    @property
    def horizon(self) -> int:
        return self.x.shape[0]

    def to_csv(self, path):
        n, m = self.x.shape[1], self.u.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"x{i + 1}" for i in range(n)]
                            + [f"u{i + 1}" for i in range(m)])
            for t in range(self.horizon):
                writer.writerow([t] + [repr(float(v)) for v in self.x[t]]
                                + [repr(float(v)) for v in self.u[t]])


def _run(sys: LtiSystem, impl: ImplementationMatrices, W: np.ndarray):
    """Simulate several disturbance channels at once; ``W`` is ``(H, n, c)``."""
    H, n, c = W.shape
    R, M = impl.r_c.coeffs, impl.m_c.coeffs
    T_c = impl.T_c
    X = np.zeros((H, n, c))
    U = np.zeros((H, sys.m, c))
    D = np.zeros((H, n, c))
    x = np.zeros((n, c))
    for t in range(H):
        X[t] = x
        d = x.copy()
        for k in range(2, min(T_c, t + 1) + 1):
            d -= R[k - 1] @ D[t - k + 1]
        D[t] = d
        u = np.zeros((sys.m, c))
        for k in range(1, min(T_c, t + 1) + 1):
            u += M[k - 1] @ D[t - k + 1]
        U[t] = u
        x = sys.A @ x + sys.B @ u + W[t]
    return X, U, D


def simulate_controller(sys: LtiSystem, impl: ImplementationMatrices, w,
                        horizon: int | None = None) -> Trajectory:
    """Closed-loop response to the disturbance sequence ``w`` (``horizon x n``)."""
    if impl.n != sys.n or impl.m != sys.m:
        raise DimensionError("implementation does not match the system")
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if horizon is None:
        horizon = w.shape[0]
    if w.shape != (horizon, sys.n):
        raise DimensionError(f"w must have shape ({horizon}, {sys.n}), got {w.shape}")
    X, U, D = _run(sys, impl, w[:, :, None])
    return Trajectory(X[:, :, 0], U[:, :, 0], D[:, :, 0])


def empirical_clmaps(sys: LtiSystem, impl: ImplementationMatrices,
                     horizon: int) -> ClosedLoopMaps:
    """Closed-loop maps measured from unit impulses on every state channel.

    ``Phi~_x(k)`` is the state ``k`` steps after the impulse.  The Frobenius
    norm of the last stored coefficient pair is kept as ``tail``.
    """
    if impl.n != sys.n or impl.m != sys.m:
        raise DimensionError("implementation does not match the system")
    W = np.zeros((horizon + 1, sys.n, sys.n))
    W[0] = np.eye(sys.n)
    X, U, _ = _run(sys, impl, W)
    tail = float(np.sqrt(np.sum(X[-1] ** 2) + np.sum(U[-1] ** 2)))
    return ClosedLoopMaps(FirTransferMatrix(X[1:], 1), FirTransferMatrix(U[1:], 1), tail=tail)


def implementation_cost(sys: LtiSystem, impl: ImplementationMatrices, w: LqrWeights,
                        horizon: int | None = None, T: int | None = None,
                        tail_tol: float = 1e-8) -> float:
    """Unnormalized H2/LQR cost of the implemented closed loop.

    Without ``horizon`` the simulation starts at ``4 (T + T_c)`` steps and
    doubles up to ``40 (T + T_c)`` until the response tail drops below
    ``tail_tol``.

    Raises
    ------
    UnstableError
        If the internal dynamics have spectral radius ``>= 1``.
    TailError
        If the response has not decayed within the horizon cap.
    """
    rho = build_internal_dynamics(sys, impl).spectral_radius()
    if rho >= 1.0:
        raise UnstableError(f"internal dynamics unstable (spectral radius {rho:.4f})")
    if horizon is not None:
        cl = empirical_clmaps(sys, impl, horizon)
        if cl.tail >= tail_tol:
            raise TailError(f"response tail {cl.tail:.2e} at horizon {horizon}")
        return lqr_cost(cl, w)
    base = (T if T is not None else impl.T_c) + impl.T_c
    H, cap = 4 * base, 40 * base
    while True:
        cl = empirical_clmaps(sys, impl, H)
        if cl.tail < tail_tol:
            return lqr_cost(cl, w)
        if H >= cap:
            raise TailError(f"response tail {cl.tail:.2e} still above {tail_tol} at horizon {H}")
        H = min(2 * H, cap)


def normalized_lqr_cost(sys: LtiSystem, impl: ImplementationMatrices, w: LqrWeights,
                        horizon: int | None = None, T: int | None = None) -> float:
    """Implemented LQR cost divided by the optimal infinite-horizon cost."""
    return implementation_cost(sys, impl, w, horizon, T) / dare_optimal_cost(sys, w)
