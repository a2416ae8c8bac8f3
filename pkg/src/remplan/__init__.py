"""Robust planning of remanufacture/scrap decisions under degradation
uncertainty: kernel estimation from trajectories, KL and interval ambiguity
sets, exact robust value iteration, control-limit policy extraction, and the
data-driven evaluation experiments.
"""

from .model import (Action, StateSpace, RewardModel, ModelSpec, Kernel,
                    StructureReport, validate_kernel_slice, tail_sums,
                    check_ifr, check_dominance, check_assumptions)
from .ingest import (SensorTable, TrajectorySet, load_sensor_table,
                     extract_health_indicator, discretize)
from .estimate import (CountMatrix, count_transitions, mle_kernel,
                       worsen_slice, degrade_kernel, bootstrap_kernels)
from .ambiguity import (KLAmbiguity, IntervalAmbiguity, BoundConditionReport,
                        kl_divergence, kl_radius_from_counts, tighten_bounds,
                        interval_from_bootstrap, check_bound_conditions)
from .inner import (InnerResult, kl_inner, interval_inner_greedy,
                    interval_inner_dual)
from .solver import (Solution, ControlLimits, stopping_threshold, q_values,
                     robust_value_iteration, extract_control_limits,
                     evaluate_policy, check_theorem2_condition)
from .synthetic import (shifted_shape_slice, geometric_ifr_slice,
                        random_ifr_slice, simulate_trajectories,
                        kernels_from_units)
from .experiments import (ExperimentConfig, ExperimentReport, ViolationRanges,
                          ViolationSummary, reliability, out_of_sample_eval,
                          impact_experiment, select_psi_validation,
                          select_psi_reliability, violation_study)

__version__ = "0.1.0"

__all__ = [
    "Action", "StateSpace", "RewardModel", "ModelSpec", "Kernel",
    "StructureReport", "validate_kernel_slice", "tail_sums", "check_ifr",
    "check_dominance", "check_assumptions",
    "SensorTable", "TrajectorySet", "load_sensor_table",
    "extract_health_indicator", "discretize",
    "CountMatrix", "count_transitions", "mle_kernel", "worsen_slice",
    "degrade_kernel", "bootstrap_kernels",
    "KLAmbiguity", "IntervalAmbiguity", "BoundConditionReport",
    "kl_divergence", "kl_radius_from_counts", "tighten_bounds",
    "interval_from_bootstrap", "check_bound_conditions",
    "InnerResult", "kl_inner", "interval_inner_greedy", "interval_inner_dual",
    "Solution", "ControlLimits", "stopping_threshold", "q_values",
    "robust_value_iteration", "extract_control_limits", "evaluate_policy",
    "check_theorem2_condition",
    "shifted_shape_slice", "geometric_ifr_slice", "random_ifr_slice",
    "simulate_trajectories", "kernels_from_units",
    "ExperimentConfig", "ExperimentReport", "ViolationRanges",
    "ViolationSummary", "reliability", "out_of_sample_eval",
    "impact_experiment", "select_psi_validation", "select_psi_reliability",
    "violation_study",
]
