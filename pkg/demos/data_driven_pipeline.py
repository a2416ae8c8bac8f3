"""From degradation trajectories to a certified policy.

Simulates a small fleet from a hidden ground-truth kernel, estimates the
degradation model from the observed paths, sizes a KL ambiguity set from the
transition counts, and checks the robust certificate against the truth.
"""

import numpy as np

from remplan.ambiguity import KLAmbiguity, kl_radius_from_counts
from remplan.estimate import count_transitions, degrade_kernel, mle_kernel
from remplan.model import ModelSpec
from remplan.solver import evaluate_policy, robust_value_iteration
from remplan.synthetic import random_ifr_slice, simulate_trajectories

rng = np.random.default_rng(7)
truth_slice = random_ifr_slice(rng, 7)
truth = degrade_kernel(truth_slice, rho=0.07, k_max=10)
model = ModelSpec.from_affine(7, 10, 3.0, 0.5, 0.5, 2.0, 0.5, 0.9)

# ten units observed until absorption in the failed state
fleet = simulate_trajectories(truth_slice, 10, seed=21)
counts = count_transitions(fleet)
print(f"observed {int(counts.n.sum())} transitions over {len(fleet)} units")

estimated = degrade_kernel(mle_kernel(counts), rho=0.07, k_max=10)
radii = kl_radius_from_counts(counts, alpha=0.05)
theta = np.tile(radii[:, None], (1, 11))
print("per-state KL radii at 95% confidence:")
print("  " + "  ".join("inf" if not np.isfinite(r) else f"{r:.3f}"
                       for r in radii))

nominal_sol = robust_value_iteration(model, KLAmbiguity(estimated, 0.0))
robust_sol = robust_value_iteration(model, KLAmbiguity(estimated, theta))

# The certificate is the in-sample worst-case value; the realized value is
# what the policy earns under the (hidden) truth.
for name, sol in (("nominal", nominal_sol), ("robust", robust_sol)):
    realized = evaluate_policy(sol.policy, truth, model)[0, 0]
    certified = sol.values[0, 0]
    honest = "holds" if realized >= certified - 1e-9 else "is broken"
    print(f"{name:8s} certificate {certified:7.3f}  "
          f"realized {realized:7.3f}  -> certificate {honest}")
