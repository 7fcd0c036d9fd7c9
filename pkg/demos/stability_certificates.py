"""
Certifying internal stability by matrix powers
==============================================

A matrix is stable if some power has induced 1-norm below one.  The test
can stop in three ways, illustrated here on small matrices.
"""

import numpy as np

from twostep_sls.stability import distributed_stability_check, norm_power_certify

# large first power, but nilpotent
print(norm_power_certify(np.array([[0.0, 2.0], [0.0, 0.0]])))

# the 1-norm of a rotation power never drops below one
c, s = np.cos(0.3), np.sin(0.3)
print(norm_power_certify(np.array([[c, -s], [s, c]]), k_max=50))

# growth beyond the transient bound
print(norm_power_certify(2 * np.eye(2), M=10))

# the distributed version gives the same answer for any split of the columns
rng = np.random.default_rng(0)
A = rng.standard_normal((12, 12))
A *= 0.9 / max(abs(np.linalg.eigvals(A)))
for p in (1, 3, 7):
    outcome, trace = distributed_stability_check(A, processors=p)
    print(p, "processors:", outcome.verdict, outcome.iterations, [r["macs"] for r in trace[1:2]])
