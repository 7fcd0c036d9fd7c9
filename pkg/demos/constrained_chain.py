"""
Local controllers with communication delay
==========================================

Each node may only use information from its two neighbours, and
information travels one hop per time step.  Imposing that directly on the
closed-loop maps leaves no feasible solution.  Imposing it on the
implementation instead works, and even a second-order controller loses
little performance.
"""

from twostep_sls.bench import build_chain_system
from twostep_sls.clsyn import LqrWeights, dare_optimal_cost, synthesize_clmaps
from twostep_sls.evalsim import implementation_cost
from twostep_sls.exceptions import InfeasibleError
from twostep_sls.implsyn import lambda_schedule
from twostep_sls.lti import norm_l1
from twostep_sls.sparsity import chain_topology, delay_mask, intersect, locality_mask
from twostep_sls.stability import build_internal_dynamics, distributed_stability_check

sys = build_chain_system()
w = LqrWeights.identity(sys.n, sys.m)
topo = chain_topology(10, [3, 6, 10])
J = dare_optimal_cost(sys, w)


def mask(h):
    return intersect(locality_mask(topo, 1, h), delay_mask(topo, 1, h))


try:
    synthesize_clmaps(sys, 20, w, mask(20))
except InfeasibleError as err:
    print("constrained closed-loop synthesis:", err)

cl = synthesize_clmaps(sys, 20, w)

for T_c in (20, 2):
    # start with a small penalty on Delta and raise it until stability is certified
    impl, lam = lambda_schedule(sys, cl, T_c, mask(T_c), start_lambda=0.1,
                                l1_weight=0.01)
    dyn = build_internal_dynamics(sys, impl)
    outcome, trace = distributed_stability_check(dyn, processors=5)
    print("T_c = %2d  lambda = %g  cost = %.4f  rho = %.3f  L1 = %.3f  %s after %d rounds"
          % (T_c, lam, implementation_cost(sys, impl, w, T=20) / J, dyn.spectral_radius(),
             norm_l1(impl.stacked()), outcome.verdict, outcome.iterations))

# the certificate only needs column sums, so each of the 5 simulated
# processors touches its own block of A_z^k
print("per-processor work in the last round:", trace[-1]["macs"])
