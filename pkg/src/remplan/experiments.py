"""Data-driven planning experiments: out-of-sample evaluation, reliability of
in-sample value certificates, radius selection, and the large randomized
study of when threshold monotonicity survives without its sufficient
condition.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .ambiguity import IntervalAmbiguity, KLAmbiguity, interval_from_bootstrap
from .estimate import bootstrap_kernels, count_transitions, degrade_kernel, mle_kernel
from .ingest import TrajectorySet
from .model import Kernel, ModelSpec
from .solver import (Solution, check_theorem2_condition, evaluate_policy,
                     extract_control_limits, robust_value_iteration)
from .synthetic import kernels_from_units, random_ifr_slice, simulate_trajectories

KL_DEFAULT_GRID = tuple(round(0.1 * i, 10) for i in range(21))
INTERVAL_DEFAULT_GRID = (0.99, 0.95, 0.9, 0.8, 0.6, 0.4, 0.2, 0.1, 0.05)


@dataclass
class ExperimentConfig:
    """Sweep settings shared by the impact/reliability experiments.

    psi is the ambiguity-size knob: the KL radius itself, or the bootstrap
    confidence complement alpha for interval sets.  Grids must ascend in set
    size, which for intervals means descending alpha.
    """

    family: str = "kl"
    psi_grid: tuple = None
    train_size: int = 5
    test_size: int = 50
    replications: int = 200
    bootstrap_samples: int = 30
    split_fraction: float = 0.6
    gamma: float = 0.7
    seed: int = 0
    epsilon: float = 1e-6
    rho: float = 0.07
    k_max: int = 10
    eval_mode: str = "per-unit"    # "per-unit" | "truth"
    threads: int = 1

    def __post_init__(self):
        if self.family not in ("kl", "interval"):
            raise ValueError("family must be 'kl' or 'interval'")
        if self.psi_grid is None:
            self.psi_grid = (KL_DEFAULT_GRID if self.family == "kl"
                             else INTERVAL_DEFAULT_GRID)
        self.psi_grid = tuple(float(p) for p in self.psi_grid)
        if len(self.psi_grid) == 0:
            raise ValueError("psi_grid must be non-empty")
        diffs = np.diff(self.psi_grid)
        if self.family == "kl":
            if np.any(diffs <= 0) or self.psi_grid[0] < 0:
                raise ValueError("KL psi_grid must be non-negative ascending")
        else:
            if np.any(diffs >= 0) or not all(0 < a < 1 for a in self.psi_grid):
                raise ValueError("interval psi_grid must be alphas in (0, 1), "
                                 "descending (ambiguity ascending)")
        if self.train_size < 1 or self.test_size < 1 or self.replications < 1:
            raise ValueError("sizes and replications must be positive")
        if not (0.0 < self.split_fraction < 1.0):
            raise ValueError("split_fraction must lie in (0, 1)")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if self.eval_mode not in ("per-unit", "truth"):
            raise ValueError("eval_mode must be 'per-unit' or 'truth'")


@dataclass
class ExperimentReport:
    """Tidy per-(psi, replication) records plus sweep-level summaries."""

    config: ExperimentConfig
    records: list                      # dicts: psi, replication, in_sample, out_sample, success
    chosen_psi: float = None
    notes: list = field(default_factory=list)

    def reliability(self, psi: float) -> float:
        return reliability([r for r in self.records if r["psi"] == psi])

    def mean_in_sample(self, psi: float) -> float:
        vals = [r["in_sample"] for r in self.records if r["psi"] == psi]
        return float(np.mean(vals))

    def mean_out_of_sample(self, psi: float) -> float:
        vals = [r["out_sample"] for r in self.records if r["psi"] == psi]
        return float(np.mean(vals))

    def sorted_records(self) -> list:
        return sorted(self.records, key=lambda r: (r["psi"], r["replication"]))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("psi,replication,in_sample,out_sample,success\n")
            for r in self.sorted_records():
                fh.write(f"{r['psi']},{r['replication']},"
                         f"{r['in_sample']:.12g},{r['out_sample']:.12g},"
                         f"{int(r['success'])}\n")

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "chosen_psi": self.chosen_psi,
            "notes": list(self.notes),
            "summary": [
                {"psi": psi,
                 "mean_in_sample": self.mean_in_sample(psi),
                 "mean_out_of_sample": self.mean_out_of_sample(psi),
                 "reliability": self.reliability(psi)}
                for psi in self.config.psi_grid
            ],
            "records": self.sorted_records(),
        }


def reliability(records) -> float:
    """Empirical frequency of the in-sample certificate holding out of sample."""
    if not records:
        raise ValueError("no records")
    return float(np.mean([bool(r["success"]) for r in records]))


def out_of_sample_eval(policy, test_kernels, model: ModelSpec,
                       epsilon: float = 1e-8) -> float:
    """Mean new-item value of a fixed policy across test kernels.

    Repeated kernel objects (the ground-truth mode) are evaluated once.
    """
    if len(test_kernels) == 0:
        raise ValueError("no test kernels")
    memo = {}
    vals = []
    for kern in test_kernels:
        key = id(kern)
        if key not in memo:
            memo[key] = evaluate_policy(policy, kern, model, epsilon=epsilon)[0, 0]
        vals.append(memo[key])
    return float(np.mean(vals))


def _estimate_nominal(train: TrajectorySet, cfg: ExperimentConfig) -> Kernel:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        base = mle_kernel(count_transitions(train), warn=False)
    return degrade_kernel(base, rho=cfg.rho, k_max=cfg.k_max)


def _family_context(train: TrajectorySet, cfg: ExperimentConfig, seed: int):
    """Nominal kernel plus, for the interval family, one bootstrap kernel set
    reused across the whole psi grid so the resulting boxes are nested."""
    nominal = _estimate_nominal(train, cfg)
    boots = None
    if cfg.family == "interval":
        boots = bootstrap_kernels(train, cfg.bootstrap_samples, seed)
    return nominal, boots


def _ambiguity_at(psi: float, nominal: Kernel, boots,
                  cfg: ExperimentConfig, seed=None):
    if cfg.family == "kl":
        return KLAmbiguity(nominal, psi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return interval_from_bootstrap(boots, alpha=psi, k_max=cfg.k_max,
                                       rho=cfg.rho, ensure_feasible=True,
                                       source_seed=seed)


def _subseed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def _split_units(traj: TrajectorySet, frac: float, rng: np.random.Generator):
    n = len(traj)
    if n < 2:
        raise ValueError("need at least two units to split")
    n_fit = min(n - 1, max(1, round(frac * n)))
    perm = rng.permutation(n)
    return traj.subset(perm[:n_fit]), traj.subset(perm[n_fit:])


def impact_experiment(model: ModelSpec, cfg: ExperimentConfig,
                      true_kernel: np.ndarray = None,
                      trajectories: TrajectorySet = None) -> ExperimentReport:
    """Sweep psi across replications, recording in-sample certificates and
    out-of-sample means.

    Synthetic mode (true_kernel given): every replication simulates fresh
    train/test units from the true base slice; eval_mode 'truth' scores
    policies under the true kernel itself, 'per-unit' under kernels estimated
    from each test unit's own trajectory.  Data mode (trajectories given):
    each replication draws a disjoint train/test unit split.
    """
    if (true_kernel is None) == (trajectories is None):
        raise ValueError("provide exactly one of true_kernel, trajectories")
    if trajectories is not None and cfg.eval_mode == "truth":
        raise ValueError("eval_mode 'truth' requires a true kernel")
    if trajectories is not None and len(trajectories) < cfg.train_size + cfg.test_size:
        raise ValueError("not enough units for the requested train/test split")
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)

    def one_rep(rep: int) -> list:
        parts = streams[rep].spawn(4)
        if true_kernel is not None:
            train = simulate_trajectories(true_kernel, cfg.train_size, parts[0])
            if cfg.eval_mode == "truth":
                truth = degrade_kernel(true_kernel, rho=cfg.rho, k_max=cfg.k_max)
                test_kernels = [truth] * cfg.test_size
            else:
                test = simulate_trajectories(true_kernel, cfg.test_size, parts[1])
                test_kernels = kernels_from_units(test, cfg.k_max, cfg.rho)
        else:
            rng = np.random.default_rng(parts[0])
            perm = rng.permutation(len(trajectories))
            train = trajectories.subset(perm[:cfg.train_size])
            test = trajectories.subset(
                perm[cfg.train_size:cfg.train_size + cfg.test_size])
            test_kernels = kernels_from_units(test, cfg.k_max, cfg.rho)
        boot_seed = _subseed(parts[2])
        nominal, boots = _family_context(train, cfg, boot_seed)
        out = []
        for psi in cfg.psi_grid:
            amb = _ambiguity_at(psi, nominal, boots, cfg, seed=boot_seed)
            sol = robust_value_iteration(model, amb, epsilon=cfg.epsilon)
            in_s = float(sol.values[0, 0])
            out_s = out_of_sample_eval(sol.policy, test_kernels, model)
            out.append({"psi": psi, "replication": rep, "in_sample": in_s,
                        "out_sample": out_s,
                        "success": bool(out_s + 1e-12 >= in_s)})
        return out

    records = []
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            for chunk in pool.map(one_rep, range(cfg.replications)):
                records.extend(chunk)
    else:
        for rep in range(cfg.replications):
            records.extend(one_rep(rep))
    return ExperimentReport(cfg, records)


def select_psi_validation(train: TrajectorySet, model: ModelSpec,
                          cfg: ExperimentConfig):
    """Hold-out selection: fit on a split_fraction share of units, score each
    psi on the rest (per-unit kernels), take the best (ties to the smaller
    set), then re-solve on all units at the chosen psi.

    Returns (psi_star, Solution on the full training set).
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    fit, val = _split_units(train, cfg.split_fraction, rng)
    nominal, boots = _family_context(fit, cfg, cfg.seed * 7919)
    val_kernels = kernels_from_units(val, cfg.k_max, cfg.rho)
    best_psi = None
    best_nu = -np.inf
    for psi in cfg.psi_grid:
        amb = _ambiguity_at(psi, nominal, boots, cfg)
        sol = robust_value_iteration(model, amb, epsilon=cfg.epsilon)
        nu = out_of_sample_eval(sol.policy, val_kernels, model)
        if nu > best_nu:
            best_nu = nu
            best_psi = psi
    full_nominal, full_boots = _family_context(train, cfg, cfg.seed * 7919 - 1)
    amb = _ambiguity_at(best_psi, full_nominal, full_boots, cfg)
    return best_psi, robust_value_iteration(model, amb, epsilon=cfg.epsilon)


def select_psi_reliability(train: TrajectorySet, model: ModelSpec,
                           cfg: ExperimentConfig):
    """Target-reliability selection: over bootstrap_samples unit resamples,
    count per psi how often the in-sample certificate survives a within-sample
    hold-out; pick the smallest psi reaching ceil(gamma * q) successes.

    Falls back to the largest-ambiguity psi with a warning when no grid point
    reaches the target.  Returns (psi_gamma, Solution on the full set).
    """
    q = cfg.bootstrap_samples
    streams = np.random.SeedSequence(cfg.seed).spawn(q)
    successes = np.zeros(len(cfg.psi_grid), dtype=int)
    n = len(train)
    for ss in streams:
        rng = np.random.default_rng(ss)
        sample = train.subset(rng.integers(0, n, size=n))
        fit, val = _split_units(sample, cfg.split_fraction, rng)
        nominal, boots = _family_context(fit, cfg, _subseed(ss))
        val_kernels = kernels_from_units(val, cfg.k_max, cfg.rho)
        for j, psi in enumerate(cfg.psi_grid):
            amb = _ambiguity_at(psi, nominal, boots, cfg)
            sol = robust_value_iteration(model, amb, epsilon=cfg.epsilon)
            nu = out_of_sample_eval(sol.policy, val_kernels, model)
            if nu + 1e-12 >= sol.values[0, 0]:
                successes[j] += 1
    target = math.ceil(cfg.gamma * q)
    hit = np.flatnonzero(successes >= target)
    if hit.size:
        psi_gamma = cfg.psi_grid[hit[0]]
    else:
        psi_gamma = cfg.psi_grid[-1]
        warnings.warn(
            f"no psi reached {target}/{q} hold-out successes; "
            "falling back to the largest ambiguity on the grid")
    nominal, boots = _family_context(train, cfg, cfg.seed * 104729)
    amb = _ambiguity_at(psi_gamma, nominal, boots, cfg)
    return psi_gamma, robust_value_iteration(model, amb, epsilon=cfg.epsilon)


@dataclass
class ViolationRanges:
    """Uniform sampling ranges for the randomized threshold-structure study."""

    a0: tuple = (10.0, 50.0)
    a1: tuple = (1.0, 15.0)
    a2: tuple = (1.0, 15.0)
    c_r: tuple = (0.0, 10.0)
    c_s: tuple = (0.0, 10.0)
    theta: tuple = (0.0, 2.0)
    beta: tuple = (0.01, 0.99)


@dataclass
class ViolationSummary:
    num_instances: int
    condition_violated: int
    structure_broken_given_violated: int
    structure_broken_total: int
    resampled: int

    @property
    def break_fraction_given_violated(self) -> float:
        if self.condition_violated == 0:
            return 0.0
        return self.structure_broken_given_violated / self.condition_violated


def violation_study(num_instances: int = 5000,
                    ranges: ViolationRanges = None, seed: int = 0,
                    num_conditions: int = 7, k_max: int = 10,
                    epsilon: float = 1e-4, threads: int = 1) -> ViolationSummary:
    """How often does threshold monotonicity in k break when its sufficient
    condition fails?

    Each instance draws affine rewards and costs from the ranges (rejecting
    draws whose perpetual-wait value at the worst state is not below salvage),
    pairs them with a fresh random IFR kernel, solves the KL-robust problem,
    and tallies condition versus structure violations.
    """
    ranges = ranges or ViolationRanges()
    streams = np.random.SeedSequence(seed).spawn(num_instances)
    worst = num_conditions - 1

    def one(i: int):
        rng = np.random.default_rng(streams[i])
        resamples = 0
        while True:
            a0 = rng.uniform(*ranges.a0)
            a1 = rng.uniform(*ranges.a1)
            a2 = rng.uniform(*ranges.a2)
            c_r = rng.uniform(*ranges.c_r)
            c_s = rng.uniform(*ranges.c_s)
            theta = rng.uniform(*ranges.theta)
            beta = rng.uniform(*ranges.beta)
            if (a0 - a2 * worst) / (1.0 - beta) < c_s:
                break
            resamples += 1
        model = ModelSpec.from_affine(num_conditions, k_max, a0, a1, a2,
                                      c_r, c_s, beta)
        kernel = degrade_kernel(random_ifr_slice(rng, num_conditions),
                                k_max=k_max)
        sol = robust_value_iteration(model, KLAmbiguity(kernel, theta),
                                     epsilon=epsilon)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cl = extract_control_limits(sol)
        cond_ok = bool(check_theorem2_condition(model).all())
        struct_ok = cl.is_control_limit and cl.is_monotone_in_k
        return (not cond_ok), (not struct_ok), resamples

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(num_instances)))
    else:
        results = [one(i) for i in range(num_instances)]

    cond_viol = sum(1 for c, _, _ in results if c)
    broken_total = sum(1 for _, b, _ in results if b)
    broken_given = sum(1 for c, b, _ in results if c and b)
    resampled = sum(r for _, _, r in results)
    return ViolationSummary(num_instances, cond_viol, broken_given,
                            broken_total, resampled)
