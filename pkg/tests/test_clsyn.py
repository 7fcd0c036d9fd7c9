import numpy as np
import pytest
from scipy.optimize import brentq

from twostep_sls.clsyn import (ClosedLoopMaps, LqrWeights, achievability_residual,
                               controller_to_clmaps, dare_optimal_cost, lqr_cost,
                               synthesize_clmaps)
from twostep_sls.exceptions import InfeasibleError
from twostep_sls.lti import FirTransferMatrix, LtiSystem, spectral_radius
from twostep_sls.sparsity import chain_topology, delay_mask, intersect, locality_mask

from conftest import random_system


def deadbeat_pair():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    B = np.array([[0.0], [1.0]])
    C = np.hstack([B, A @ B])
    K = -np.array([[0.0, 1.0]]) @ np.linalg.inv(C) @ A @ A     # Ackermann with poles at 0
    return LtiSystem(A, B), K


def scalar_dare(a, b, q, r):
    f = lambda p: q + a * a * p - (a * b * p) ** 2 / (r + b * b * p) - p
    return brentq(f, q, 1e6, xtol=1e-15)


def test_scalar_dare_oracle():
    p = scalar_dare(0.5, 1.0, 1.0, 1.0)
    sys = LtiSystem(np.array([[0.5]]), np.array([[1.0]]))
    assert dare_optimal_cost(sys, LqrWeights.identity(1, 1)) == pytest.approx(p, abs=1e-10)
    # closed form for b = q = r = 1: p^2 - a^2 p - 1 = 0
    assert p == pytest.approx((0.25 + np.sqrt(0.0625 + 4)) / 2, abs=1e-12)


def test_dare_zero_A():
    sys = LtiSystem(np.zeros((3, 3)), np.ones((3, 1)))
    Q = np.diag([1.0, 2.0, 3.0])
    assert dare_optimal_cost(sys, LqrWeights(Q, np.eye(1))) == pytest.approx(6.0, abs=1e-12)


def test_dare_unstabilizable_raises():
    sys = LtiSystem(np.diag([2.0, 0.5]), np.array([[0.0], [1.0]]))
    with pytest.raises(RuntimeError):
        dare_optimal_cost(sys, LqrWeights.identity(2, 1), max_iter=2000)


def test_scalar_synthesis_matches_dare():
    sys = LtiSystem(np.array([[0.5]]), np.array([[1.0]]))
    w = LqrWeights.identity(1, 1)
    cl = synthesize_clmaps(sys, 30, w)
    assert lqr_cost(cl, w) == pytest.approx(scalar_dare(0.5, 1.0, 1.0, 1.0), abs=1e-6)


def test_achievability_examples():
    sys, K = deadbeat_pair()
    cl = controller_to_clmaps(K, sys, 3)
    assert cl.tail == 0.0
    assert achievability_residual(sys, cl) < 1e-10
    zero = LtiSystem(np.zeros((2, 2)), np.zeros((2, 1)))
    trivial = ClosedLoopMaps(FirTransferMatrix(np.eye(2)[None], 1),
                             FirTransferMatrix(np.zeros((1, 1, 2)), 1))
    assert achievability_residual(zero, trivial) == 0.0
    eps = 1e-3
    X = np.eye(2)[None].copy()
    X[0, 0, 1] = eps
    bumped = ClosedLoopMaps(FirTransferMatrix(X, 1), trivial.phi_u)
    assert achievability_residual(zero, bumped) == pytest.approx(eps, rel=1e-12)


def test_controller_to_clmaps(rng):
    sys = random_system(rng, 3, 2)
    cl = controller_to_clmaps(np.zeros((2, 3)), sys, 4)
    for k in range(1, 5):
        np.testing.assert_allclose(cl.phi_x[k], np.linalg.matrix_power(sys.A, k - 1))
    assert not cl.phi_u.coeffs.any()
    K = 0.1 * rng.standard_normal((2, 3))
    cl = controller_to_clmaps(K, sys, 60)
    Acl = sys.A + sys.B @ K
    assert cl.tail == pytest.approx(np.linalg.norm(np.linalg.matrix_power(Acl, 60)))
    # only the closure defect remains, and it is the tail carried through A + BK
    assert achievability_residual(sys, cl) <= 1e-9 + np.linalg.norm(Acl, 2) * cl.tail


def test_lqr_cost_examples(rng):
    w = LqrWeights.identity(2, 1)
    cl = ClosedLoopMaps(FirTransferMatrix(np.eye(2)[None], 1),
                        FirTransferMatrix(np.zeros((1, 1, 2)), 1))
    assert lqr_cost(cl, w) == 2.0
    zero = ClosedLoopMaps(FirTransferMatrix(np.zeros((3, 2, 2)), 1),
                          FirTransferMatrix(np.zeros((3, 1, 2)), 1))
    assert lqr_cost(zero, w) == 0.0


def test_lqr_cost_matches_simulation(rng):
    sys = random_system(rng, 3, 2, radius=0.8)
    K = 0.2 * rng.standard_normal((2, 3))
    Q = np.diag([1.0, 2.0, 0.5])
    R = np.array([[2.0, 0.3], [0.3, 1.0]])
    w = LqrWeights(Q, R)
    T = 15
    cl = controller_to_clmaps(K, sys, T)
    total = 0.0
    for j in range(3):
        x = np.eye(3)[:, j]
        for _ in range(T):
            u = K @ x
            total += x @ Q @ x + u @ R @ u
            x = sys.A @ x + sys.B @ u
    assert lqr_cost(cl, w) == pytest.approx(total, rel=1e-9)


def test_chain_unconstrained(chain_sys, chain_weights, chain_cl):
    assert achievability_residual(chain_sys, chain_cl) < 1e-8
    ratio = lqr_cost(chain_cl, chain_weights) / dare_optimal_cost(chain_sys, chain_weights)
    assert ratio == pytest.approx(1.001, abs=5e-4)


def test_chain_constrained_infeasible(chain_sys, chain_weights):
    topo = chain_topology(10, [3, 6, 10])
    mask = intersect(locality_mask(topo, 1, 20), delay_mask(topo, 1, 20))
    with pytest.raises(InfeasibleError) as info:
        synthesize_clmaps(chain_sys, 20, chain_weights, mask)
    assert info.value.rank < info.value.rank_augmented


def test_cost_monotone_in_T(chain_sys, chain_weights):
    costs = [lqr_cost(synthesize_clmaps(chain_sys, T, chain_weights), chain_weights)
             for T in (5, 10, 20)]
    assert costs[0] >= costs[1] >= costs[2]


def gain_then_deadbeat(K, sys, T):
    """Achievable horizon-``T`` maps: ``u = K x`` for ``T - n`` steps, then steer to 0."""
    n, m = sys.n, sys.m
    head = controller_to_clmaps(K, sys, T - n)
    X = np.zeros((T, n, n))
    U = np.zeros((T, m, n))
    X[:T - n], U[:T - n] = head.phi_x.coeffs, head.phi_u.coeffs
    x_start = (sys.A + sys.B @ K) @ X[T - n - 1]
    # x_T+1 = A^n x + sum_i A^(n-1-i) B u_i = 0, minimum-norm inputs
    C = np.hstack([np.linalg.matrix_power(sys.A, n - 1 - i) @ sys.B for i in range(n)])
    V = -np.linalg.pinv(C) @ np.linalg.matrix_power(sys.A, n) @ x_start
    x = x_start
    for i in range(n):
        X[T - n + i], U[T - n + i] = x, V[i * m:(i + 1) * m]
        x = sys.A @ x + sys.B @ U[T - n + i]
    return ClosedLoopMaps(FirTransferMatrix(X, 1), FirTransferMatrix(U, 1))


def test_optimal_against_random_gains(rng):
    sys = random_system(rng, 3, 2, radius=0.7)
    w = LqrWeights.identity(3, 2)
    T = 8
    best = lqr_cost(synthesize_clmaps(sys, T, w), w)
    found = 0
    while found < 10:
        K = 0.3 * rng.standard_normal((2, 3))
        if spectral_radius(sys.A + sys.B @ K) >= 1:
            continue
        found += 1
        cl = gain_then_deadbeat(K, sys, T)
        assert achievability_residual(sys, cl) < 1e-9
        assert best <= lqr_cost(cl, w) + 1e-9


def test_masked_synthesis_exact_zeros(rng):
    # fully actuated chain, so a locality-1 pattern is feasible
    n = 4
    sys = LtiSystem(0.5 * (np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)), np.eye(n))
    topo = chain_topology(n, range(1, n + 1))
    mask = locality_mask(topo, 1, 3)
    cl = synthesize_clmaps(sys, 3, LqrWeights.identity(n, n), mask)
    assert not cl.phi_x.coeffs[~mask.patterns_R].any()
    assert not cl.phi_u.coeffs[~mask.patterns_M].any()
    assert achievability_residual(sys, cl) < 1e-10
