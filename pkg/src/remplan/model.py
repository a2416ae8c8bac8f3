"""Model primitives: condition/usage state lattice, rewards, degradation kernels,
and the stochastic-ordering checks that the control-limit theory rests on.

Conventions used throughout the package: condition states are 0..S with larger
meaning worse and S absorbing (failed); k counts completed remanufacture cycles
and is truncated at max_reman; degradation is irreversible, so every kernel row
is upper triangular in the condition index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

ROW_SUM_TOL = 1e-12
ORDER_TOL = 1e-12


class Action(IntEnum):
    WAIT = 0
    REMANUFACTURE = 1
    SCRAP = 2


@dataclass(frozen=True)
class StateSpace:
    """Rectangular lattice of (condition, remanufacture-count) pairs."""

    num_conditions: int   # S + 1 condition states, 0..S
    max_reman: int        # k truncated at this count; remanufacture removed there

    def __post_init__(self):
        if self.num_conditions < 2:
            raise ValueError("need at least two condition states")
        if self.max_reman < 0:
            raise ValueError("max_reman must be >= 0")

    @property
    def worst(self) -> int:
        return self.num_conditions - 1

    def actions(self, s: int, k: int) -> tuple[Action, ...]:
        if k >= self.max_reman:
            return (Action.WAIT, Action.SCRAP)
        return (Action.WAIT, Action.REMANUFACTURE, Action.SCRAP)


class RewardModel:
    """Per-period economics on the lattice.

    reward(s, k) = gain(s, k) - env_cost(s, k), stored as dense tables of shape
    (num_conditions, max_reman + 1).  Affine inputs (a0 - a1*k - a2*s) are
    accepted and expanded; tables are the canonical internal form.
    """

    def __init__(self, gain, env_cost, reman_cost, salvage, discount):
        gain = np.asarray(gain, dtype=float)
        env_cost = np.asarray(env_cost, dtype=float)
        if gain.ndim != 2 or gain.shape != env_cost.shape:
            raise ValueError("gain and env_cost must be 2-D tables of equal shape")
        if not np.all(np.isfinite(gain)) or not np.all(np.isfinite(env_cost)):
            raise ValueError("reward tables must be finite")
        if not (0.0 <= discount < 1.0):
            raise ValueError("discount must lie in [0, 1)")
        if not (np.isfinite(reman_cost) and np.isfinite(salvage)):
            raise ValueError("reman_cost and salvage must be finite")
        self.gain = gain
        self.env_cost = env_cost
        self.reman_cost = float(reman_cost)
        self.salvage = float(salvage)
        self.discount = float(discount)

    @property
    def reward(self) -> np.ndarray:
        return self.gain - self.env_cost


class ModelSpec:
    """Complete planning instance: state space plus economics.

    The affine constructor keeps its coefficients so serialization round-trips;
    otherwise only the tables are stored.
    """

    def __init__(self, space: StateSpace, rewards: RewardModel, _affine=None):
        expect = (space.num_conditions, space.max_reman + 1)
        if rewards.gain.shape != expect:
            raise ValueError(
                f"reward tables have shape {rewards.gain.shape}, expected {expect}"
            )
        self.space = space
        self.rewards = rewards
        self._affine = _affine

    # -- convenience accessors used all over the solver -----------------------
    @property
    def num_conditions(self) -> int:
        return self.space.num_conditions

    @property
    def max_reman(self) -> int:
        return self.space.max_reman

    @property
    def reward(self) -> np.ndarray:
        return self.rewards.reward

    @property
    def beta(self) -> float:
        return self.rewards.discount

    @property
    def c_r(self) -> float:
        return self.rewards.reman_cost

    @property
    def c_s(self) -> float:
        return self.rewards.salvage

    @classmethod
    def from_tables(cls, gain, env_cost, reman_cost, salvage, discount,
                    max_reman=None):
        gain = np.asarray(gain, dtype=float)
        if max_reman is None:
            max_reman = gain.shape[1] - 1
        space = StateSpace(gain.shape[0], max_reman)
        return cls(space, RewardModel(gain, env_cost, reman_cost, salvage, discount))

    @classmethod
    def from_affine(cls, num_conditions, max_reman, a0, a1, a2,
                    reman_cost, salvage, discount):
        """reward(s, k) = a0 - a1*k - a2*s, booked entirely as gain."""
        s = np.arange(num_conditions)[:, None]
        k = np.arange(max_reman + 1)[None, :]
        gain = a0 - a1 * k - a2 * s
        env = np.zeros_like(gain, dtype=float)
        space = StateSpace(num_conditions, max_reman)
        rm = RewardModel(gain.astype(float), env, reman_cost, salvage, discount)
        return cls(space, rm, _affine=(float(a0), float(a1), float(a2)))

    def to_dict(self) -> dict:
        if self._affine is not None:
            a0, a1, a2 = self._affine
            reward = {"kind": "affine", "a0": a0, "a1": a1, "a2": a2}
        else:
            reward = {
                "kind": "table",
                "gain": self.rewards.gain.tolist(),
                "env_cost": self.rewards.env_cost.tolist(),
            }
        return {
            "states": self.num_conditions,
            "k_max": self.max_reman,
            "beta": self.beta,
            "c_r": self.c_r,
            "c_s": self.c_s,
            "reward": reward,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        reward = d["reward"]
        if reward["kind"] == "affine":
            return cls.from_affine(
                d["states"], d["k_max"], reward["a0"], reward["a1"], reward["a2"],
                d["c_r"], d["c_s"], d["beta"])
        if reward["kind"] == "table":
            gain = np.asarray(reward["gain"], dtype=float)
            env = np.asarray(reward["env_cost"], dtype=float)
            space = StateSpace(d["states"], d["k_max"])
            rm = RewardModel(gain, env, d["c_r"], d["c_s"], d["beta"])
            return cls(space, rm)
        raise ValueError(f"unknown reward kind {reward['kind']!r}")


def validate_kernel_slice(p: np.ndarray, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate one per-k transition matrix; refuses to renormalize."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("kernel slice must be a square matrix")
    if not np.all(np.isfinite(p)):
        raise ValueError("kernel entries must be finite")
    if np.any(p < -tol) or np.any(p > 1.0 + tol):
        bad = np.argwhere((p < -tol) | (p > 1.0 + tol))[0]
        raise ValueError(f"probability out of [0, 1] at row {bad[0]}, col {bad[1]}")
    sums = p.sum(axis=1)
    off = np.abs(sums - 1.0)
    if np.any(off > tol):
        s = int(np.argmax(off))
        raise ValueError(
            f"row {s} sums to {sums[s]:.15f}; refusing to renormalize")
    lower = np.tril(p, k=-1)
    if np.any(np.abs(lower) > tol):
        s, sp = np.argwhere(np.abs(lower) > tol)[0]
        raise ValueError(
            f"backward transition {s}->{sp} has positive mass; "
            "kernel must be upper triangular")
    return p


class Kernel:
    """Stack of per-k transition matrices p(s'|s,k), shape (k_max+1, S+1, S+1).

    Rows must sum to one within 1e-12 and be upper triangular; anything else is
    an error, never a silent fix.
    """

    def __init__(self, p: np.ndarray):
        p = np.asarray(p, dtype=float)
        if p.ndim == 2:
            p = p[None, :, :]
        if p.ndim != 3:
            raise ValueError("kernel must be (k_max+1, S+1, S+1)")
        for k in range(p.shape[0]):
            validate_kernel_slice(p[k])
        self.p = p

    @property
    def num_conditions(self) -> int:
        return self.p.shape[1]

    @property
    def k_max(self) -> int:
        return self.p.shape[0] - 1

    def slice(self, k: int) -> np.ndarray:
        return self.p[k]

    def to_dict(self) -> dict:
        return {
            "num_conditions": self.num_conditions,
            "k_max": self.k_max,
            "p": self.p.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel":
        return cls(np.asarray(d["p"], dtype=float))


def tail_sums(p: np.ndarray) -> np.ndarray:
    """T[s, m] = sum_{s' >= m} p[s, s'] for a 2-D slice."""
    return np.cumsum(p[:, ::-1], axis=1)[:, ::-1]


def check_ifr(kernel: Kernel, k: int, tol: float = ORDER_TOL) -> bool:
    """True iff slice k is IFR: every tail sum is non-decreasing in the row."""
    t = tail_sums(kernel.slice(k))
    return bool(np.all(np.diff(t, axis=0) >= -tol))


def check_dominance(a: np.ndarray, b: np.ndarray, tol: float = ORDER_TOL) -> bool:
    """True iff slice a first-order dominates slice b (rowwise tail sums >=).

    Dominance here points toward worse condition: a's rows put at least as much
    mass on high states as b's.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("slices must have equal shape")
    return bool(np.all(tail_sums(a) - tail_sums(b) >= -tol))


@dataclass
class StructureReport:
    """Outcome of the structural checks behind the control-limit theorems."""

    is_ifr_per_k: bool
    dominance_in_k: bool
    reward_monotone: bool
    salvage_condition: bool
    violations: list = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return (self.is_ifr_per_k and self.dominance_in_k
                and self.reward_monotone and self.salvage_condition)


def check_assumptions(model: ModelSpec, kernel: Kernel,
                      tol: float = ORDER_TOL) -> StructureReport:
    """Check the degradation-ordering and economics assumptions, reporting every
    violation instead of raising; enforcement is left to call sites that need it.
    """
    if kernel.num_conditions != model.num_conditions:
        raise ValueError("kernel and model disagree on the number of conditions")
    if kernel.k_max != model.max_reman:
        raise ValueError("kernel and model disagree on max_reman")
    violations = []

    ifr_ok = True
    for k in range(kernel.k_max + 1):
        t = tail_sums(kernel.slice(k))
        bad = np.argwhere(np.diff(t, axis=0) < -tol)
        for s, m in bad:
            violations.append(("ifr", int(k), int(s), int(s) + 1, int(m)))
            ifr_ok = False

    dom_ok = True
    for k in range(kernel.k_max):
        gap = tail_sums(kernel.slice(k + 1)) - tail_sums(kernel.slice(k))
        bad = np.argwhere(gap < -tol)
        for s, m in bad:
            violations.append(("dominance_k", int(k), int(k) + 1, int(s), int(m)))
            dom_ok = False

    r = model.reward
    rew_ok = True
    bad = np.argwhere(np.diff(r, axis=0) > tol)
    for s, k in bad:
        violations.append(("reward_s", int(s), int(s) + 1, int(k)))
        rew_ok = False
    bad = np.argwhere(np.diff(r, axis=1) > tol)
    for s, k in bad:
        violations.append(("reward_k", int(s), int(k), int(k) + 1))
        rew_ok = False

    # perpetual wait in the failed state must be worth less than scrapping
    worst = model.num_conditions - 1
    salvage_ok = r[worst, 0] / (1.0 - model.beta) < model.c_s if model.beta < 1 else False
    if not salvage_ok:
        violations.append(("salvage", float(r[worst, 0] / (1.0 - model.beta)),
                           float(model.c_s)))

    return StructureReport(ifr_ok, dom_ok, rew_ok, salvage_ok, violations)
