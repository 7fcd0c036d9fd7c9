"""Discrete-time LTI systems and FIR transfer-matrix algebra.

A :class:`FirTransferMatrix` stores the spectral components ``X(k)`` of

    X(z) = sum_{k=start}^{horizon} X(k) z^{-k}

as a dense array of shape ``(horizon - start + 1, rows, cols)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, TailError


__all__ = [
    "LtiSystem",
    "FirTransferMatrix",
    "fir_add",
    "fir_subtract",
    "fir_scale",
    "fir_multiply",
    "fir_inverse_truncated",
    "fir_inverse_checked",
    "fir_vstack",
    "identity_map",
    "zero_map",
    "norm_h2",
    "norm_l1",
    "norm_one_to_one",
    "spectral_radius",
    "DimensionError",
    "TailError",
]


@dataclass(frozen=True)
class LtiSystem:
    """State-feedback plant ``x[t+1] = A x[t] + B u[t] + w[t]``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise DimensionError(f"A must be square and non-empty, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0] or B.shape[1] < 1:
            raise DimensionError(
                f"B must have {A.shape[0]} rows and at least one column, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class FirTransferMatrix:
    """Finite impulse response transfer matrix.

    Parameters
    ----------
    coeffs : array_like, shape (horizon - start + 1, rows, cols)
        Spectral components ordered from ``z^{-start}`` to ``z^{-horizon}``.
    start : int
        Exponent of the first stored term (0 or 1 in practice).
    """

    coeffs: np.ndarray
    start: int = 1

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3 or c.shape[0] < 1 or c.shape[1] < 1 or c.shape[2] < 1:
            raise DimensionError(f"coeffs must be a non-empty 3-d stack, got {c.shape}")
        if self.start < 0:
            raise ValueError("start must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "start", int(self.start))

    @property
    def rows(self) -> int:
        return self.coeffs.shape[1]

    @property
    def cols(self) -> int:
        return self.coeffs.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[1:]

    @property
    def horizon(self) -> int:
        return self.start + self.coeffs.shape[0] - 1

    def __getitem__(self, k: int) -> np.ndarray:
        """Spectral component ``X(k)``; zero outside ``start..horizon``."""
        if self.start <= k <= self.horizon:
            return self.coeffs[k - self.start]
        return np.zeros(self.shape)

    def padded(self, start: int, horizon: int) -> np.ndarray:
        """Coefficients on ``start..horizon`` with zeros outside the support."""
        out = np.zeros((horizon - start + 1,) + self.shape)
        lo, hi = max(start, self.start), min(horizon, self.horizon)
        if lo <= hi:
            out[lo - start:hi - start + 1] = self.coeffs[lo - self.start:hi - self.start + 1]
        return out

    def truncate(self, horizon: int) -> "FirTransferMatrix":
        return FirTransferMatrix(self.padded(self.start, horizon), self.start)

    def column(self, j: int) -> "FirTransferMatrix":
        return FirTransferMatrix(self.coeffs[:, :, j:j + 1], self.start)

    def evaluate(self, z: complex) -> np.ndarray:
        """Evaluate ``X(z)`` at a complex point."""
        powers = z ** -np.arange(self.start, self.horizon + 1, dtype=float)
        return np.tensordot(powers, self.coeffs, axes=1)

    def __add__(self, other):
        return fir_add(self, other)

    def __sub__(self, other):
        return fir_subtract(self, other)

    def __matmul__(self, other):
        return fir_multiply(self, other)

    def __repr__(self):
        return (f"FirTransferMatrix(rows={self.rows}, cols={self.cols}, "
                f"start={self.start}, horizon={self.horizon})")


def identity_map(n: int) -> FirTransferMatrix:
    """The constant identity ``I z^0``."""
    return FirTransferMatrix(np.eye(n)[None], start=0)


def zero_map(rows: int, cols: int, start: int = 1, horizon: int = 1) -> FirTransferMatrix:
    return FirTransferMatrix(np.zeros((horizon - start + 1, rows, cols)), start)


def fir_add(X: FirTransferMatrix, Y: FirTransferMatrix) -> FirTransferMatrix:
    if X.shape != Y.shape:
        raise DimensionError(f"cannot add {X.shape} and {Y.shape} transfer matrices")
    start, horizon = min(X.start, Y.start), max(X.horizon, Y.horizon)
    return FirTransferMatrix(X.padded(start, horizon) + Y.padded(start, horizon), start)


def fir_scale(X: FirTransferMatrix, alpha: float) -> FirTransferMatrix:
    return FirTransferMatrix(alpha * X.coeffs, X.start)


def fir_subtract(X: FirTransferMatrix, Y: FirTransferMatrix) -> FirTransferMatrix:
    return fir_add(X, fir_scale(Y, -1.0))


def fir_multiply(X: FirTransferMatrix, Y: FirTransferMatrix) -> FirTransferMatrix:
    """Spectral convolution ``Z(k) = sum_j X(j) Y(k - j)``."""
    if X.cols != Y.rows:
        raise DimensionError(f"cannot multiply {X.shape} by {Y.shape}")
    nx, ny = X.coeffs.shape[0], Y.coeffs.shape[0]
    out = np.zeros((nx + ny - 1, X.rows, Y.cols))
    for i in range(nx):
        # out[i + j] += X[i] @ Y[j] for all j at once
        out[i:i + ny] += np.einsum("ab,jbc->jac", X.coeffs[i], Y.coeffs)
    return FirTransferMatrix(out, X.start + Y.start)


def fir_vstack(X: FirTransferMatrix, Y: FirTransferMatrix) -> FirTransferMatrix:
    """Stack ``[X; Y]`` row-wise over the union of their supports."""
    if X.cols != Y.cols:
        raise DimensionError("column counts differ")
    start, horizon = min(X.start, Y.start), max(X.horizon, Y.horizon)
    return FirTransferMatrix(
        np.concatenate([X.padded(start, horizon), Y.padded(start, horizon)], axis=1), start)


def fir_inverse_truncated(X: FirTransferMatrix, out_horizon: int) -> FirTransferMatrix:
    """Causal inverse of a proper FIR matrix, truncated after ``out_horizon`` terms.

    Uses the recursion ``Y(0) = X(0)^{-1}`` and
    ``Y(k) = -X(0)^{-1} sum_{j=1}^{k} X(j) Y(k - j)``.
    """
    if X.start != 0:
        raise ValueError("truncated inverse needs a map with a z^0 term (start = 0)")
    if X.rows != X.cols:
        raise DimensionError("only square transfer matrices are invertible")
    if out_horizon < 0:
        raise ValueError("out_horizon must be non-negative")
    X0 = X.coeffs[0]
    if not np.isfinite(X0).all() or np.linalg.cond(X0) > 1e14:
        raise np.linalg.LinAlgError("leading coefficient is singular")
    lu = scipy.linalg.lu_factor(X0)
    n = X.rows
    Y = np.zeros((out_horizon + 1, n, n))
    Y[0] = scipy.linalg.lu_solve(lu, np.eye(n))
    for k in range(1, out_horizon + 1):
        jmax = min(k, X.horizon)
        acc = np.einsum("jab,jbc->ac", X.coeffs[1:jmax + 1], Y[k - 1::-1][:jmax])
        Y[k] = -scipy.linalg.lu_solve(lu, acc)
    return FirTransferMatrix(Y, start=0)


def fir_inverse_checked(X: FirTransferMatrix, out_horizon: int,
                        tail_tol: float = 1e-8) -> FirTransferMatrix:
    """Truncated inverse that refuses to drop a non-negligible tail.

    The Frobenius norm of the last computed coefficient must be below
    ``tail_tol``; otherwise :class:`TailError` is raised.
    """
    Y = fir_inverse_truncated(X, out_horizon)
    tail = np.linalg.norm(Y.coeffs[-1])
    if not np.isfinite(tail) or tail >= tail_tol:
        raise TailError(
            f"inverse has not decayed by z^-{out_horizon} (tail norm {tail:.3e})")
    return Y


def norm_h2(X: FirTransferMatrix) -> float:
    """Square root of the summed squared Frobenius norms of all coefficients."""
    return float(np.sqrt(np.sum(X.coeffs ** 2)))


def norm_l1(X: FirTransferMatrix) -> float:
    """Induced l-inf to l-inf gain of the impulse response (max absolute row sum)."""
    return float(np.max(np.abs(X.coeffs).sum(axis=(0, 2))))


def norm_one_to_one(M) -> float:
    """Induced 1-to-1 matrix norm: the largest absolute column sum."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return float(np.max(np.abs(M).sum(axis=0)))


def spectral_radius(M) -> float:
    """Largest eigenvalue magnitude from a dense eigen-decomposition.

    Accuracy is that of LAPACK ``geev``; for defective (e.g. nilpotent)
    matrices the returned value can be of order ``eps**(1/k)`` for a
    Jordan block of size ``k``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"spectral radius needs a square matrix, got {M.shape}")
    return float(np.max(np.abs(scipy.linalg.eigvals(M))))
