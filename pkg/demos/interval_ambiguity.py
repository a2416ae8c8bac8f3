"""Bootstrap interval (box) ambiguity sets.

Resamples a fleet's trajectories to get bootstrap kernels, turns per-entry
quantiles into interval bounds at several confidence levels, and shows how
the boxes nest and what they cost in certified value.
"""

import numpy as np

from remplan.ambiguity import check_bound_conditions, interval_from_bootstrap
from remplan.estimate import bootstrap_kernels
from remplan.model import ModelSpec
from remplan.solver import extract_control_limits, robust_value_iteration
from remplan.synthetic import random_ifr_slice, simulate_trajectories

rng = np.random.default_rng(13)
truth_slice = random_ifr_slice(rng, 5)
model = ModelSpec.from_affine(5, 6, 3.0, 0.5, 0.8, 2.0, 0.5, 0.88)

fleet = simulate_trajectories(truth_slice, 12, seed=3)
boots = bootstrap_kernels(fleet, 60, seed=3)
print(f"{len(boots)} bootstrap kernels from {len(fleet)} units")

# Lower alpha keeps more of the bootstrap distribution inside the box, so the
# boxes widen as alpha falls; a shared bootstrap set makes them nest exactly.
prev = None
for alpha in (0.5, 0.2, 0.05):
    amb = interval_from_bootstrap(boots, alpha=alpha, k_max=6, rho=0.07,
                                  ensure_feasible=True, source_seed=3)
    width = float(np.mean(amb.upper - amb.lower))
    sol = robust_value_iteration(model, amb)
    nested = (prev is None
              or bool(np.all(amb.lower <= prev.lower + 1e-12)
                      and np.all(amb.upper >= prev.upper - 1e-12)))
    bc = check_bound_conditions(amb)
    cl = extract_control_limits(sol)
    print(f"alpha = {alpha:4.2f}: mean width {width:.3f}, "
          f"V(0,0) = {sol.values[0, 0]:7.3f}, nests previous: {nested}, "
          f"bound conditions pass: {bc.all_pass}, "
          f"policy still control-limit: {cl.is_control_limit}")
    prev = amb

# The sufficient bound conditions are demanding and raw bootstrap boxes
# rarely meet them, yet the solved policies above keep their threshold shape.
# The conditions certify structure in advance; they are not necessary.
