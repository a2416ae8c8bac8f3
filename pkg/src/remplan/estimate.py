"""Degradation-kernel estimation from condition trajectories.

Covers transition counting, maximum-likelihood rows, the usage-worsening
transform that generates per-remanufacture slices, and unit-level bootstrap
resampling for interval ambiguity sets.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .ingest import TrajectorySet
from .model import Kernel


@dataclass
class CountMatrix:
    """Transition counts n[s, s'] plus the number of discarded backward moves."""

    n: np.ndarray
    discarded_backward: int = 0

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=np.int64)
        if self.n.ndim != 2 or self.n.shape[0] != self.n.shape[1]:
            raise ValueError("count matrix must be square")
        if np.any(self.n < 0):
            raise ValueError("counts must be non-negative")

    @property
    def num_states(self) -> int:
        return self.n.shape[0]

    @property
    def row_totals(self) -> np.ndarray:
        return self.n.sum(axis=1)


def count_transitions(trajectories: TrajectorySet) -> CountMatrix:
    """Count consecutive-cycle transitions pooled over units.

    Backward moves (s' < s) contradict irreversible degradation; they are
    excluded from the counts and reported via discarded_backward.
    """
    m = trajectories.num_states
    n = np.zeros((m, m), dtype=np.int64)
    discarded = 0
    for seq in trajectories.states:
        src = seq[:-1]
        dst = seq[1:]
        ok = dst >= src
        discarded += int((~ok).sum())
        np.add.at(n, (src[ok], dst[ok]), 1)
    if discarded:
        warnings.warn(f"discarded {discarded} backward transitions")
    return CountMatrix(n, discarded)


def mle_kernel(counts: CountMatrix, warn: bool = True) -> np.ndarray:
    """Row-normalized counts; unvisited rows default to self-absorbing."""
    totals = counts.row_totals
    m = counts.num_states
    p = np.zeros((m, m), dtype=float)
    empty = []
    for s in range(m):
        if totals[s] == 0:
            p[s, s] = 1.0
            empty.append(s)
        else:
            p[s] = counts.n[s] / totals[s]
    if empty and warn:
        warnings.warn(f"no observed transitions from states {empty}; "
                      "rows default to self-absorbing")
    return p


def worsen_slice(p: np.ndarray, rho: float) -> np.ndarray:
    """One application of the usage-worsening shift: fraction rho of each
    entry below the worst state moves one state to the right."""
    p = np.asarray(p, dtype=float)
    q = p.copy()
    moved = rho * p[:, :-1]
    q[:, :-1] -= moved
    q[:, 1:] += moved
    return q


def degrade_kernel(base: np.ndarray, rho: float = 0.07,
                   k_max: int = 10) -> Kernel:
    """Stack per-remanufacture slices: slice k is the shift applied k times.

    The transform preserves upper-triangularity, IFR, and yields slices that
    are first-order ordered in k (later cycles degrade no slower).
    """
    if not (0.0 <= rho < 1.0):
        raise ValueError("rho must lie in [0, 1)")
    base = np.asarray(base, dtype=float)
    slices = np.empty((k_max + 1,) + base.shape)
    slices[0] = base
    for k in range(1, k_max + 1):
        slices[k] = worsen_slice(slices[k - 1], rho)
    return Kernel(slices)


def bootstrap_kernels(trajectories: TrajectorySet, num_samples: int,
                      seed: int) -> list[np.ndarray]:
    """Unit-level bootstrap: resample whole trajectories with replacement and
    re-estimate the base slice per sample.

    Each sample draws len(trajectories) units using an independent substream of
    the seeded source (stream index = sample index), so samples are reproducible
    regardless of evaluation order.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    n_units = len(trajectories)
    streams = np.random.SeedSequence(seed).spawn(num_samples)
    out = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, n_units, size=n_units)
        sample = trajectories.subset(idx)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            counts = count_transitions(sample)
        out.append(mle_kernel(counts, warn=False))
    return out
