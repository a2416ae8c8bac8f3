"""Exact robust Bellman recursion on the (condition, remanufacture-count)
lattice, control-limit extraction, and fixed-policy evaluation.

Action semantics: WAIT collects reward(s, k) and moves by the worst kernel row
in the ambiguity set; REMANUFACTURE pays reman_cost and restarts at (0, k+1)
with no ambiguity; SCRAP collects salvage once and terminates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _core
from .ambiguity import IntervalAmbiguity, KLAmbiguity
from .model import Action, Kernel, ModelSpec

MAX_ITER = 10 ** 6


@dataclass
class Solution:
    values: np.ndarray        # (S+1, k_max+1)
    policy: np.ndarray        # int codes, same shape
    worst_kernel: Kernel      # wait-action worst rows at the final sweep
    iterations: int
    residual: float

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "policy": self.policy.tolist(),
            "worst_kernel": self.worst_kernel.to_dict(),
            "iterations": self.iterations,
            "residual": self.residual,
        }


def stopping_threshold(beta: float, epsilon: float) -> float:
    """Sup-norm step below which the iterate is within epsilon/2 of the fixed
    point: (1 - beta) * epsilon / (4 * beta).  Myopic beta = 0 stops after one
    sweep."""
    if beta == 0.0:
        return np.inf
    return (1.0 - beta) * epsilon / (4.0 * beta)


def _check_dims(model: ModelSpec, amb) -> None:
    if amb.num_conditions != model.num_conditions or amb.k_max != model.max_reman:
        raise ValueError(
            f"ambiguity lattice ({amb.num_conditions} conditions, k_max "
            f"{amb.k_max}) does not match model ({model.num_conditions}, "
            f"{model.max_reman})")


def q_values(s: int, k: int, values: np.ndarray, model: ModelSpec, amb) -> np.ndarray:
    """Action values at (s, k) given a value table: [wait, remanufacture, scrap].

    Remanufacture is -inf at k = max_reman, where the action is removed.
    """
    values = np.asarray(values, dtype=float)
    bv = model.beta * values[:, k]
    if isinstance(amb, KLAmbiguity):
        inner_val, _, _ = _core.kl_row_solve(
            amb.nominal.p[k, s], bv, float(amb.theta[s, k]))
    elif isinstance(amb, IntervalAmbiguity):
        inner_val, _, _ = _core.interval_row_dual(
            amb.lower[k, s], amb.upper[k, s], bv)
    else:
        raise TypeError(f"unsupported ambiguity type {type(amb).__name__}")
    w0 = model.reward[s, k] + inner_val
    if k < model.max_reman:
        w1 = -model.c_r + model.beta * values[0, k + 1]
    else:
        w1 = -np.inf
    w2 = model.c_s
    return np.array([w0, w1, w2])


def robust_value_iteration(model: ModelSpec, amb, epsilon: float = 1e-6,
                           max_iter: int = MAX_ITER) -> Solution:
    """Jacobi value iteration from V = 0 until the sup-norm step drops below
    the stopping threshold; ties in the argmax prefer the smaller action code.
    """
    _check_dims(model, amb)
    thr = stopping_threshold(model.beta, epsilon)
    r = np.ascontiguousarray(model.reward)
    if isinstance(amb, KLAmbiguity):
        V, pol, worst, iters, resid = _core.vi_kl(
            amb.nominal.p, r, amb.theta, model.beta, model.c_r, model.c_s,
            thr, max_iter)
    elif isinstance(amb, IntervalAmbiguity):
        V, pol, worst, iters, resid = _core.vi_interval(
            amb.lower, amb.upper, r, model.beta, model.c_r, model.c_s,
            thr, max_iter)
    else:
        raise TypeError(f"unsupported ambiguity type {type(amb).__name__}")
    if resid >= thr:
        raise RuntimeError(
            f"no convergence after {iters} sweeps (residual {resid:.3e}, "
            f"threshold {thr:.3e})")
    return Solution(V, pol, Kernel(worst), iters, float(resid))


@dataclass
class ControlLimits:
    """Threshold summary of a policy table.

    zeta_rm[k] is the smallest condition remanufactured at cycle k (None at or
    after k_star); zeta_scrap[k] the smallest condition scrapped (None before
    k_star, or when the row never scraps).  k_star is the first cycle whose
    row contains no remanufacture.  is_control_limit requires every row to be
    wait up to a threshold and one repeated non-wait action beyond it (an
    all-wait row qualifies vacuously).  is_monotone_in_k additionally requires
    remanufacturing never to reappear after k_star and both threshold
    sequences to be non-increasing.
    """

    k_star: int
    zeta_rm: list
    zeta_scrap: list
    is_control_limit: bool
    is_monotone_in_k: bool

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,zeta_rm,zeta_scrap\n")
            for k in range(len(self.zeta_rm)):
                rm = "" if self.zeta_rm[k] is None else str(self.zeta_rm[k])
                sc = "" if self.zeta_scrap[k] is None else str(self.zeta_scrap[k])
                fh.write(f"{k},{rm},{sc}\n")


def _row_is_single_switch(row: np.ndarray) -> bool:
    nonwait = np.flatnonzero(row != Action.WAIT)
    if nonwait.size == 0:
        return True
    t = nonwait[0]
    tail = row[t:]
    return bool(np.all(tail == tail[0]) and tail[0] != Action.WAIT)


def extract_control_limits(sol: Solution) -> ControlLimits:
    """Read thresholds off the policy table; warns when the remanufacture
    budget binds (k_star at the truncation)."""
    pol = sol.policy
    num_s, num_k = pol.shape

    single = all(_row_is_single_switch(pol[:, k]) for k in range(num_k))

    k_star = num_k - 1
    for k in range(num_k):
        if not np.any(pol[:, k] == Action.REMANUFACTURE):
            k_star = k
            break
    if k_star == num_k - 1:
        warnings.warn(
            f"k_star equals the remanufacture truncation ({k_star}); "
            "the cap may be binding")

    zeta_rm: list = [None] * num_k
    zeta_scrap: list = [None] * num_k
    for k in range(num_k):
        if k < k_star:
            idx = np.flatnonzero(pol[:, k] == Action.REMANUFACTURE)
            zeta_rm[k] = int(idx[0])
        else:
            idx = np.flatnonzero(pol[:, k] == Action.SCRAP)
            zeta_scrap[k] = int(idx[0]) if idx.size else None

    phase_ordered = not any(
        np.any(pol[:, k] == Action.REMANUFACTURE) for k in range(k_star, num_k))
    rm_seq = [z for z in zeta_rm if z is not None]
    mono_rm = all(b <= a for a, b in zip(rm_seq, rm_seq[1:]))
    sc_seq = [num_s if zeta_scrap[k] is None else zeta_scrap[k]
              for k in range(k_star, num_k)]
    mono_sc = all(b <= a for a, b in zip(sc_seq, sc_seq[1:]))

    return ControlLimits(k_star, zeta_rm, zeta_scrap, single,
                         phase_ordered and mono_rm and mono_sc)


def _check_policy(policy: np.ndarray, model: ModelSpec) -> np.ndarray:
    policy = np.asarray(policy)
    expect = (model.num_conditions, model.max_reman + 1)
    if policy.shape != expect:
        raise ValueError(f"policy must have shape {expect}")
    if not np.all(np.isin(policy, (0, 1, 2))):
        raise ValueError("policy entries must be action codes 0, 1, 2")
    if np.any(policy[:, model.max_reman] == Action.REMANUFACTURE):
        raise ValueError("remanufacture is not available at k = max_reman")
    return policy.astype(np.int64)


def evaluate_policy(policy, kernel: Kernel, model: ModelSpec,
                    epsilon: float = 1e-10, max_iter: int = MAX_ITER) -> np.ndarray:
    """Expected discounted reward of a fixed policy under a fixed kernel,
    by Jacobi iteration to successive sup-norm epsilon."""
    pol = _check_policy(policy, model)
    if kernel.num_conditions != model.num_conditions or kernel.k_max != model.max_reman:
        raise ValueError("kernel does not match the model lattice")
    r = np.ascontiguousarray(model.reward)
    return _core.eval_policy(pol, kernel.p, r, model.beta, model.c_r,
                             model.c_s, epsilon, max_iter)


def check_theorem2_condition(model: ModelSpec) -> np.ndarray:
    """Sufficient-condition table for thresholds monotone in k:
    holds[s, k] iff beta*r(0,0)/(1-beta) - beta*c_s <= r(s,k) - r(s,k+1).

    Shape (S+1, max_reman): entry k compares cycles k and k+1.  The condition
    is restrictive; violating it does not itself break the structure.
    """
    r = model.reward
    lhs = model.beta * r[0, 0] / (1.0 - model.beta) - model.beta * model.c_s
    rhs = r[:, :-1] - r[:, 1:]
    return lhs <= rhs
