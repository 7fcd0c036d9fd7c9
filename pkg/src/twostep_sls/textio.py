"""Plain-text storage of matrices and FIR transfer matrices.

A file is a sequence of blocks.  A matrix block is a header line
``rows cols`` followed by ``rows`` lines of ``cols`` numbers.  An FIR block
has the header ``rows cols start horizon`` followed by the coefficients
``X(start) .. X(horizon)``, each written as ``rows`` lines (row-major).
Blank lines and lines starting with ``#`` are ignored.  Numbers are written
with 17 significant digits so values survive a round trip exactly.

Composite objects are stored as consecutive blocks:

===================  =====================================
object               blocks
===================  =====================================
LtiSystem            matrix A, matrix B
LqrWeights           matrix Q, matrix R
ClosedLoopMaps       FIR Phi_x, FIR Phi_u
ImplementationMats   FIR R_c, FIR M_c
SparsityMask         FIR of 0/1 for R_c, FIR of 0/1 for M_c
===================  =====================================
"""

from __future__ import annotations

import os

import numpy as np

from .clsyn import ClosedLoopMaps, LqrWeights
from .implsyn import ImplementationMatrices
from .lti import FirTransferMatrix, LtiSystem
from .sparsity import SparsityMask


__all__ = [
    "format_matrix",
    "format_fir",
    "parse_blocks",
    "read_blocks",
    "write_blocks",
    "save_system",
    "load_system",
    "save_weights",
    "load_weights",
    "save_clmaps",
    "load_clmaps",
    "save_implementation",
    "load_implementation",
    "save_mask",
    "load_mask",
]


def _fmt(x) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return format(float(x), ".17g")


def _rows(M: np.ndarray) -> list[str]:
    return [" ".join(_fmt(v) for v in row) for row in M]


def format_matrix(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "\n".join([f"{M.shape[0]} {M.shape[1]}"] + _rows(M)) + "\n"


def format_fir(X: FirTransferMatrix) -> str:
    lines = [f"{X.rows} {X.cols} {X.start} {X.horizon}"]
    for C in X.coeffs:
        lines.extend(_rows(C))
    return "\n".join(lines) + "\n"


def parse_blocks(text: str) -> list:
    """Parse matrix and FIR blocks; returns arrays and :class:`FirTransferMatrix` objects."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    out, i = [], 0
    while i < len(lines):
        header = lines[i].split()
        try:
            dims = [int(h) for h in header]
        except ValueError:
            raise ValueError(f"bad block header: {lines[i]!r}") from None
        if len(dims) == 2:
            rows, cols = dims
            count = rows
        elif len(dims) == 4:
            rows, cols, start, horizon = dims
            if horizon < start:
                raise ValueError(f"horizon {horizon} before start {start}")
            count = rows * (horizon - start + 1)
        else:
            raise ValueError(f"header needs 2 or 4 integers: {lines[i]!r}")
        body = lines[i + 1:i + 1 + count]
        if len(body) != count:
            raise ValueError("file ends inside a block")
        data = np.array([[float(v) for v in ln.split()] for ln in body], dtype=float)
        if data.shape != (count, cols):
            raise ValueError(f"block rows must have {cols} entries")
        if len(dims) == 2:
            out.append(data)
        else:
            out.append(FirTransferMatrix(data.reshape(-1, rows, cols), start))
        i += 1 + count
    return out


def read_blocks(path: str | os.PathLike) -> list:
    with open(path) as fh:
        return parse_blocks(fh.read())


def write_blocks(path: str | os.PathLike, blocks, comment: str | None = None):
    parts = [f"# {ln}\n" for ln in comment.splitlines()] if comment else []
    for b in blocks:
        parts.append(format_fir(b) if isinstance(b, FirTransferMatrix) else format_matrix(b))
    with open(path, "w") as fh:
        fh.write("".join(parts))


def _expect(blocks, kinds, what):
    if len(blocks) != len(kinds) or not all(isinstance(b, k) for b, k in zip(blocks, kinds)):
        raise ValueError(f"{what} file must hold {len(kinds)} blocks of the right kind")
    return blocks


def save_system(path, sys: LtiSystem):
    write_blocks(path, [sys.A, sys.B], "LtiSystem: A then B")


def load_system(path) -> LtiSystem:
    A, B = _expect(read_blocks(path), [np.ndarray, np.ndarray], "system")
    return LtiSystem(A, B)


def save_weights(path, w: LqrWeights):
    write_blocks(path, [w.Q, w.R], "LqrWeights: Q then R")


def load_weights(path) -> LqrWeights:
    Q, R = _expect(read_blocks(path), [np.ndarray, np.ndarray], "weights")
    return LqrWeights(Q, R)


def save_clmaps(path, cl: ClosedLoopMaps):
    write_blocks(path, [cl.phi_x, cl.phi_u], "ClosedLoopMaps: Phi_x then Phi_u")


def load_clmaps(path) -> ClosedLoopMaps:
    X, U = _expect(read_blocks(path), [FirTransferMatrix] * 2, "closed-loop maps")
    return ClosedLoopMaps(X, U)


def save_implementation(path, impl: ImplementationMatrices):
    write_blocks(path, [impl.r_c, impl.m_c], "ImplementationMatrices: R_c then M_c")


def load_implementation(path) -> ImplementationMatrices:
    R, M = _expect(read_blocks(path), [FirTransferMatrix] * 2, "implementation")
    return ImplementationMatrices(R, M)


def save_mask(path, mask: SparsityMask):
    write_blocks(path, [FirTransferMatrix(mask.patterns_R.astype(float), 1),
                        FirTransferMatrix(mask.patterns_M.astype(float), 1)],
                 "SparsityMask: 0/1 support of R_c then M_c, k = 1..horizon")


def load_mask(path) -> SparsityMask:
    R, M = _expect(read_blocks(path), [FirTransferMatrix] * 2, "mask")
    if R.start != 1 or M.start != 1:
        raise ValueError("mask blocks must start at k = 1")
    for X in (R, M):
        if not np.isin(X.coeffs, (0.0, 1.0)).all():
            raise ValueError("mask entries must be 0 or 1")
    return SparsityMask(R.coeffs == 1.0, M.coeffs == 1.0)
