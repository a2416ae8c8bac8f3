"""Synthetic degradation processes: guaranteed-IFR kernels, trajectory
simulation, and per-unit kernel estimates for out-of-sample evaluation.
"""

from __future__ import annotations

import warnings

import numpy as np

from .estimate import count_transitions, degrade_kernel, mle_kernel
from .ingest import TrajectorySet
from .model import Kernel


def shifted_shape_slice(shape: np.ndarray) -> np.ndarray:
    """Build an upper-triangular slice whose row s is `shape` shifted right by
    s with overflow piling on the worst state.

    Tail sums grow with the row index by construction, so the slice is IFR.
    """
    shape = np.asarray(shape, dtype=float)
    n = shape.size
    if n < 2 or abs(shape.sum() - 1.0) > 1e-9 or np.any(shape < 0):
        raise ValueError("shape must be a probability vector of length >= 2")
    p = np.zeros((n, n))
    for s in range(n):
        for i, q in enumerate(shape):
            j = min(s + i, n - 1)
            p[s, j] += q
    return p


def geometric_ifr_slice(num_states: int, advance: float) -> np.ndarray:
    """Deterministic IFR slice from a truncated geometric step distribution;
    `advance` in (0, 1) is the per-cycle probability weight of moving on."""
    if not (0.0 < advance < 1.0):
        raise ValueError("advance must lie in (0, 1)")
    i = np.arange(num_states)
    shape = (1.0 - advance) * advance ** i
    shape[-1] = advance ** (num_states - 1)
    return shifted_shape_slice(shape / shape.sum())


def random_ifr_slice(rng: np.random.Generator, num_states: int) -> np.ndarray:
    """Random IFR upper-triangular slice drawn over the whole feasible set.

    Works on tail sums T[s, m] = sum_{j >= m} p[s, j].  Rows are drawn top
    down; entry T[s, m] is uniform between the row above's tail (dominance)
    and the previous tail in the same row (monotone within the row), so any
    IFR matrix is reachable.  The worst state stays absorbing.
    """
    n = num_states
    tails = np.zeros((n, n + 1))
    tails[:, :1] = 1.0
    tails[n - 1, :] = 1.0
    tails[n - 1, n] = 0.0
    for s in range(n - 1):
        tails[s, :s + 1] = 1.0
        for m in range(s + 1, n):
            lo = tails[s - 1, m] if s > 0 else 0.0
            tails[s, m] = rng.uniform(lo, tails[s, m - 1])
    p = tails[:, :-1] - tails[:, 1:]
    p[np.abs(p) < 1e-15] = 0.0
    return p / p.sum(axis=1, keepdims=True)


def simulate_trajectories(kernel_slice: np.ndarray, num_units: int, seed,
                          max_len: int = 500) -> TrajectorySet:
    """Run units from condition 0 under the base slice until absorption at the
    worst state (inclusive) or max_len cycles."""
    p = np.asarray(kernel_slice, dtype=float)
    n = p.shape[0]
    cum = np.cumsum(p, axis=1)
    rng = np.random.default_rng(seed)
    units, states = [], []
    for u in range(1, num_units + 1):
        s = 0
        seq = [0]
        while s < n - 1 and len(seq) < max_len:
            s = int(np.searchsorted(cum[s], rng.random(), side="right"))
            s = min(s, n - 1)
            seq.append(s)
        units.append(u)
        states.append(np.asarray(seq, dtype=int))
    return TrajectorySet(units, states, n)


def kernels_from_units(trajectories: TrajectorySet, k_max: int,
                       rho: float = 0.07) -> list[Kernel]:
    """One kernel per unit, estimated from that unit's trajectory alone
    (unvisited rows default to self-absorbing), then degraded across k."""
    out = []
    for i in range(len(trajectories)):
        solo = trajectories.subset([i])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            base = mle_kernel(count_transitions(solo), warn=False)
        out.append(degrade_kernel(base, rho=rho, k_max=k_max))
    return out
