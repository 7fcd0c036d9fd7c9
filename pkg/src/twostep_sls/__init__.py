"""Two-step controller synthesis: closed-loop maps first, implementation second.

Step 1 synthesizes FIR closed-loop maps ``(Phi_x, Phi_u)`` for a
state-feedback LTI plant; step 2 searches for implementation matrices
``(R_c, M_c)`` that respect controller sparsity (locality, communication
delay) while approximately realizing those maps, and certifies the internal
stability of the result.
"""

from .clsyn import (ClosedLoopMaps, LqrWeights, achievability_residual, controller_to_clmaps,
                    dare_optimal_cost, lqr_cost, synthesize_clmaps)
from .evalsim import (Trajectory, empirical_clmaps, implementation_cost, normalized_lqr_cost,
                      simulate_controller)
from .exceptions import DimensionError, InfeasibleError, TailError, UnstableError
from .implsyn import (FeasibilityReport, ImplementationConstraints, ImplementationMatrices,
                      SynthesisDiagnostics, build_F_G, check_feasibility, closed_loop_difference,
                      compute_delta_c, constraint_residual, implemented_maps, implied_controller,
                      lambda_schedule, solve_exact, synthesize_implementation,
                      synthesize_with_delta_bound)
from .lti import (FirTransferMatrix, LtiSystem, fir_add, fir_inverse_checked,
                  fir_inverse_truncated, fir_multiply, fir_subtract, fir_vstack, identity_map,
                  norm_h2, norm_l1, norm_one_to_one, spectral_radius, zero_map)
from .sparsity import (MaskError, SparsityMask, Topology, chain_topology, delay_mask,
                       delay_penalty_weights, full_mask, intersect, locality_mask,
                       locality_penalty_weights)
from .stability import (CheckOutcome, InternalDynamics, Verdict, build_internal_dynamics,
                        distributed_stability_check, norm_power_certify, small_gain_check)

__version__ = "0.1.0"
