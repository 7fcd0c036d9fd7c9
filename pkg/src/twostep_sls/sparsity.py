"""Network topologies, locality/delay support masks and penalty weights.

Masks and weights are indexed by spectral component ``k = 1..horizon``;
array axis 0 holds ``k - 1``.  Constraints on ``B M_c`` are expressed as
row patterns on ``M_c`` via the node each actuator drives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exceptions import DimensionError


__all__ = [
    "Topology",
    "SparsityMask",
    "MaskError",
    "chain_topology",
    "actuator_nodes_from_B",
    "full_mask",
    "locality_mask",
    "delay_mask",
    "intersect",
    "delay_penalty_weights",
    "locality_penalty_weights",
]


class MaskError(ValueError):
    """Raised for masks that cannot host a valid implementation."""


@dataclass(frozen=True, eq=False)
class Topology:
    """Hop distances between nodes and the node driven by each actuator.

    Node indices are zero-based internally.
    """

    dist: np.ndarray
    node_of_actuator: tuple[int, ...]

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=int)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DimensionError("dist must be square")
        if (d < 0).any() or (np.diag(d) != 0).any() or (d != d.T).any():
            raise ValueError("dist must be symmetric, non-negative, zero on the diagonal")
        nodes = tuple(int(a) for a in self.node_of_actuator)
        if any(not 0 <= a < d.shape[0] for a in nodes):
            raise ValueError("actuator node out of range")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "node_of_actuator", nodes)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def m(self) -> int:
        return len(self.node_of_actuator)

    @property
    def actuator_dist(self) -> np.ndarray:
        """``(m, n)`` distances from each actuator's node to every node."""
        return self.dist[list(self.node_of_actuator), :]


@dataclass(frozen=True, eq=False)
class SparsityMask:
    """Allowed supports of ``R_c(k)`` and ``M_c(k)`` for ``k = 1..horizon``.

    ``patterns_R`` has shape ``(horizon, n, n)`` and ``patterns_M`` has
    shape ``(horizon, m, n)``; ``True`` marks a free entry.
    """

    patterns_R: np.ndarray
    patterns_M: np.ndarray

    def __post_init__(self):
        pr = np.asarray(self.patterns_R, dtype=bool)
        pm = np.asarray(self.patterns_M, dtype=bool)
        if pr.ndim != 3 or pm.ndim != 3 or pr.shape[0] != pm.shape[0]:
            raise DimensionError("patterns must be 3-d stacks with equal horizons")
        if pr.shape[1] != pr.shape[2] or pm.shape[2] != pr.shape[2]:
            raise DimensionError("pattern shapes must be (H, n, n) and (H, m, n)")
        pr.setflags(write=False)
        pm.setflags(write=False)
        object.__setattr__(self, "patterns_R", pr)
        object.__setattr__(self, "patterns_M", pm)

    @property
    def horizon(self) -> int:
        return self.patterns_R.shape[0]

    @property
    def n(self) -> int:
        return self.patterns_R.shape[1]

    @property
    def m(self) -> int:
        return self.patterns_M.shape[1]

    def admits_identity(self) -> bool:
        """Whether ``R_c(1) = I`` lies inside the support."""
        return bool(np.diag(self.patterns_R[0]).all())

    def require_identity(self):
        if not self.admits_identity():
            raise MaskError("mask forbids a diagonal entry of R_c(1), so R_c(1) = I is impossible")

    def extended(self, horizon: int) -> "SparsityMask":
        """Mask over a different horizon; extra indices repeat the last pattern."""
        idx = np.minimum(np.arange(horizon), self.horizon - 1)
        return SparsityMask(self.patterns_R[idx], self.patterns_M[idx])

    def __eq__(self, other):
        if not isinstance(other, SparsityMask):
            return NotImplemented
        return (self.patterns_R.shape == other.patterns_R.shape
                and self.patterns_M.shape == other.patterns_M.shape
                and bool((self.patterns_R == other.patterns_R).all())
                and bool((self.patterns_M == other.patterns_M).all()))


def chain_topology(n: int, actuated_nodes) -> Topology:
    """Chain of ``n`` nodes with ``dist(i, j) = |i - j|``.

    ``actuated_nodes`` are one-based node labels, one per input channel.
    """
    if n < 1:
        raise ValueError("n must be positive")
    nodes = [int(a) for a in actuated_nodes]
    bad = [a for a in nodes if not 1 <= a <= n]
    if bad:
        raise ValueError(f"actuator nodes {bad} outside 1..{n}")
    idx = np.arange(n)
    return Topology(np.abs(idx[:, None] - idx[None, :]), tuple(a - 1 for a in nodes))


def actuator_nodes_from_B(B) -> tuple[int, ...]:
    """Zero-based node of each column of ``B``; each column must touch one node."""
    B = np.asarray(B, dtype=float)
    nodes = []
    for a in range(B.shape[1]):
        support = np.flatnonzero(B[:, a])
        if support.size != 1:
            raise MaskError(
                f"column {a} of B acts on {support.size} nodes; masks need exactly one")
        nodes.append(int(support[0]))
    return tuple(nodes)


def full_mask(n: int, m: int, horizon: int) -> SparsityMask:
    return SparsityMask(np.ones((horizon, n, n), bool), np.ones((horizon, m, n), bool))


def locality_mask(topo: Topology, l: int, horizon: int) -> SparsityMask:
    """Entries may only couple nodes within ``l`` hops, at every ``k``."""
    if l < 0 or horizon < 1:
        raise ValueError("need l >= 0 and horizon >= 1")
    pr = np.broadcast_to(topo.dist <= l, (horizon, topo.n, topo.n))
    pm = np.broadcast_to(topo.actuator_dist <= l, (horizon, topo.m, topo.n))
    return SparsityMask(pr.copy(), pm.copy())


def communication_delay(dist: np.ndarray, comm_speed) -> np.ndarray:
    """Delay ``ceil(dist / comm_speed)`` in whole time steps."""
    speed = Fraction(comm_speed).limit_denominator(10**6)
    if speed <= 0:
        raise ValueError("comm_speed must be positive")
    return np.vectorize(lambda d: math.ceil(Fraction(int(d)) / speed), otypes=[int])(dist)


def delay_mask(topo: Topology, comm_speed, horizon: int) -> SparsityMask:
    """Component ``k`` may use node ``j``'s information only once ``k >= d(i, j)``."""
    if horizon < 1:
        raise ValueError("horizon must be positive")
    k = np.arange(1, horizon + 1)[:, None, None]
    pr = k >= communication_delay(topo.dist, comm_speed)[None]
    pm = k >= communication_delay(topo.actuator_dist, comm_speed)[None]
    return SparsityMask(pr, pm)


def intersect(a: SparsityMask, b: SparsityMask) -> SparsityMask:
    if a.patterns_R.shape != b.patterns_R.shape or a.patterns_M.shape != b.patterns_M.shape:
        raise DimensionError("masks have different horizons or dimensions")
    return SparsityMask(a.patterns_R & b.patterns_R, a.patterns_M & b.patterns_M)


def delay_penalty_weights(topo: Topology, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Weights ``exp(dist(i, j) - k)`` for ``R_c`` and ``M_c`` entries."""
    k = np.arange(1, horizon + 1)[:, None, None]
    return np.exp(topo.dist[None] - k), np.exp(topo.actuator_dist[None] - k)


def locality_penalty_weights(topo: Topology, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Weights ``exp(dist(i, j))``, constant over ``k``."""
    wr = np.broadcast_to(np.exp(topo.dist.astype(float)), (horizon, topo.n, topo.n)).copy()
    wm = np.broadcast_to(np.exp(topo.actuator_dist.astype(float)), (horizon, topo.m, topo.n)).copy()
    return wr, wm
