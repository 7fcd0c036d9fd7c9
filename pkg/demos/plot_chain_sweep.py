"""
Low-order implementations of an LQR controller
===============================================

A 10-node chain with actuators at nodes 3, 6 and 10.  We synthesize the
FIR closed-loop maps once, then look for implementations of increasing
order T_c that approximately realize them.  Run from the repository root;
the figure is written to ``chain_sweep.svg``.
"""

import numpy as np

from twostep_sls.bench import build_chain_system
from twostep_sls.clsyn import LqrWeights, dare_optimal_cost, lqr_cost, synthesize_clmaps
from twostep_sls.implsyn import (ImplementationMatrices, closed_loop_difference,
                                 synthesize_implementation)
from twostep_sls.lti import norm_l1
from twostep_sls.stability import build_internal_dynamics

sys = build_chain_system()
w = LqrWeights.identity(sys.n, sys.m)
print("open-loop spectral radius:", max(abs(np.linalg.eigvals(sys.A))))

# step 1: closed-loop maps with a 20-step FIR horizon
cl = synthesize_clmaps(sys, 20, w)
print("FIR cost / infinite-horizon optimum: %.4f" % (lqr_cost(cl, w) / dare_optimal_cost(sys, w)))

# the maps implement themselves, but with a dense, high-gain controller
original = ImplementationMatrices.from_clmaps(cl)
print("L1 norm of the original implementation: %.3f" % norm_l1(original.stacked()))

# step 2: one implementation per order
orders = np.arange(2, 26)
dx, du, rho, l1 = [], [], [], []
for T_c in orders:
    impl, _, _ = synthesize_implementation(sys, cl, T_c, lam=0.1, l1_weight=0.01)
    a, b = closed_loop_difference(cl, impl, sys)
    dx.append(a)
    du.append(b)
    rho.append(build_internal_dynamics(sys, impl).spectral_radius())
    l1.append(norm_l1(impl.stacked()))

print("T_c = 2: relative differences %.3f (state) and %.3f (input)" % (dx[0], du[0]))
print("largest internal spectral radius: %.3f" % max(rho))

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

fig, ax = plt.subplots(1, 3, figsize=(11, 3))
ax[0].plot(orders, dx, "o-", label="state map")
ax[0].plot(orders, du, "s-", label="input map")
ax[0].set_title("relative H2 difference")
ax[0].legend()
ax[1].plot(orders, rho, "o-")
ax[1].set_title("spectral radius of A_z")
ax[2].plot(orders, l1, "o-")
ax[2].axhline(norm_l1(original.stacked()), color="k", ls="--")
ax[2].set_title("L1 norm")
for a in ax:
    a.set_xlabel("T_c")
fig.tight_layout()
fig.savefig("chain_sweep.svg")
