"""Internal stability of implemented controllers.

The controller's internal signal obeys ``z[t+1] = A_z z[t]`` with the
block-companion matrix

    A_z = [[0, I, 0, ..., 0],
           ...
           [0, 0, ..., 0, I],
           [-Delta_c(T_c), ..., -Delta_c(1)]]

Stability can be certified directly from eigenvalues, through the small-gain
condition ``||Delta|| < 1`` or by finding some ``k`` with ``||A_z^k||_1 < 1``.
The last test only needs column sums, so it splits across processors that
each own a block of columns of ``A_z^k``.
"""

from __future__ import annotations

import csv
import enum
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .implsyn import ImplementationMatrices, compute_delta_c
from .lti import FirTransferMatrix, LtiSystem, norm_l1, spectral_radius


__all__ = [
    "InternalDynamics",
    "Verdict",
    "CheckOutcome",
    "build_internal_dynamics",
    "small_gain_check",
    "norm_power_certify",
    "distributed_stability_check",
    "certify_implementation",
    "trace_to_csv",
    "DEFAULT_TRANSIENT_BOUND",
    "DEFAULT_MAX_ITER",
]

DEFAULT_TRANSIENT_BOUND = 1e4
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class InternalDynamics:
    A_z: np.ndarray
    n: int
    T_c: int

    def spectral_radius(self) -> float:
        return spectral_radius(self.A_z)


class Verdict(str, enum.Enum):
    CERTIFIED = "Certified"
    LARGE_TRANSIENT = "LargeTransient"
    MAX_ITERATIONS = "MaxIterations"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class CheckOutcome:
    verdict: Verdict
    iterations: int
    final_norm: float

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED


def build_internal_dynamics(sys: LtiSystem, impl: ImplementationMatrices,
                            zero_tol: float = 0.0) -> InternalDynamics:
    """Block-companion internal dynamics of an implementation.

    Parameters
    ----------
    zero_tol : float
        Entries of ``Delta_c(1..T_c)`` with magnitude ``<= zero_tol`` are
        treated as exact zeros.  Eigenvalues of a nilpotent companion matrix
        move by roughly ``eps**(1/T_c)`` under round-off, so an exact
        implementation needs ``zero_tol`` of order ``1e-12`` to show its
        analytic spectral radius of zero.
    """
    dc = compute_delta_c(sys, impl).coeffs
    n, T_c = impl.n, impl.T_c
    N = n * T_c
    A_z = np.zeros((N, N))
    A_z[:N - n, n:] = np.eye(N - n)
    for k in range(1, T_c + 1):
        block = dc[k]
        if zero_tol > 0:
            block = np.where(np.abs(block) <= zero_tol, 0.0, block)
        A_z[N - n:, (T_c - k) * n:(T_c - k + 1) * n] = -block
    return InternalDynamics(A_z, n, T_c)


def small_gain_check(delta: FirTransferMatrix) -> bool:
    """Sufficient test ``||Delta||_{l-inf induced} < 1`` for internal stability."""
    if delta.start < 1 and np.any(delta[0]):
        raise ValueError("Delta must be strictly proper")
    return norm_l1(delta) < 1.0


# Both helpers work on contiguous copies of single columns so the floating
# point operation order, and hence every bit, is independent of the partition.

def _column_norm(X: np.ndarray) -> float:
    if not X.size:
        return 0.0
    return float(max(np.abs(np.ascontiguousarray(X[:, c])).sum() for c in range(X.shape[1])))


def _advance(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``A @ X`` one column at a time."""
    out = np.empty_like(X)
    for c in range(X.shape[1]):
        out[:, c] = A @ np.ascontiguousarray(X[:, c])
    return out


def _verdict(norm: float, k: int, M: float, k_max: int):
    if norm < 1.0:
        return Verdict.CERTIFIED
    if norm > M:
        return Verdict.LARGE_TRANSIENT
    if k >= k_max:
        return Verdict.MAX_ITERATIONS
    return None


def norm_power_certify(A, M: float = DEFAULT_TRANSIENT_BOUND,
                       k_max: int = DEFAULT_MAX_ITER) -> CheckOutcome:
    """Search ``k = 1..k_max`` for ``||A^k||_1 < 1``.

    Stops early with ``LargeTransient`` once ``||A^k||_1 > M``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    P = A.copy()
    k = 1
    while True:
        norm = _column_norm(P)
        verdict = _verdict(norm, k, M, k_max)
        if verdict is not None:
            return CheckOutcome(verdict, k, norm)
        P = _advance(A, P)
        k += 1


def partition_columns(N: int, processors: int) -> list[range]:
    """Contiguous column blocks; the last processor takes the remainder."""
    if not 1 <= processors <= N:
        raise ValueError(f"need 1 <= processors <= {N}")
    size = N // processors
    bounds = [i * size for i in range(processors)] + [N]
    return [range(bounds[i], bounds[i + 1]) for i in range(processors)]


@dataclass
class _Processor:
    cols: range
    block: np.ndarray
    macs: int = 0

    def step(self, A: np.ndarray):
        self.block = _advance(A, self.block)
        self.macs += A.shape[0] * A.shape[1] * self.block.shape[1]

    def local_norm(self) -> float:
        return _column_norm(self.block)


def distributed_stability_check(dyn, processors: int = 1,
                                M: float = DEFAULT_TRANSIENT_BOUND,
                                k_max: int = DEFAULT_MAX_ITER, concurrent: bool = False):
    """Simulate the column-distributed norm-power certificate.

    Each simulated processor keeps ``A_z`` and a contiguous block of columns
    of ``A_z^k``.  A round is: every processor multiplies its block by
    ``A_z`` (skipped for ``k = 1``), computes its largest column sum, then a
    max-reduce (the consensus step) decides termination.

    Parameters
    ----------
    dyn : InternalDynamics or array_like
    concurrent : bool
        Run the multiply phase of each round on a thread pool.

    Returns
    -------
    outcome : CheckOutcome
        Identical to :func:`norm_power_certify` on the same matrix.
    trace : list of dict
        One entry per round with ``k``, ``global_norm``, ``verdict`` (the
        verdict so far, ``"Running"`` before termination) and per-processor
        multiply-accumulate counts ``macs``.
    """
    A = dyn.A_z if isinstance(dyn, InternalDynamics) else np.atleast_2d(np.asarray(dyn, float))
    procs = [_Processor(cols, A[:, cols.start:cols.stop].copy())
             for cols in partition_columns(A.shape[0], processors)]
    pool = ThreadPoolExecutor(max_workers=processors) if concurrent else None
    trace = []
    k = 1
    try:
        while True:
            if k > 1:
                before = [p.macs for p in procs]
                if pool is not None:
                    list(pool.map(lambda p: p.step(A), procs))
                else:
                    for p in procs:
                        p.step(A)
                macs = [p.macs - b for p, b in zip(procs, before)]
            else:
                macs = [0] * len(procs)
            # barrier, then consensus
            norm = max(p.local_norm() for p in procs)
            verdict = _verdict(norm, k, M, k_max)
            trace.append({"k": k, "global_norm": norm,
                          "verdict": str(verdict) if verdict else "Running", "macs": macs})
            if verdict is not None:
                return CheckOutcome(verdict, k, norm), trace
            k += 1
    finally:
        if pool is not None:
            pool.shutdown()


def trace_to_csv(trace, path=None) -> str:
    """Write ``k,global_norm,verdict_so_far`` rows; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "global_norm", "verdict_so_far"])
    for row in trace:
        writer.writerow([row["k"], repr(row["global_norm"]), row["verdict"]])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def certify_implementation(sys: LtiSystem, impl: ImplementationMatrices,
                           M: float = DEFAULT_TRANSIENT_BOUND,
                           k_max: int = DEFAULT_MAX_ITER) -> bool:
    """``True`` when the norm-power test certifies the internal dynamics."""
    outcome, _ = distributed_stability_check(build_internal_dynamics(sys, impl),
                                             processors=1, M=M, k_max=k_max)
    return outcome.certified
