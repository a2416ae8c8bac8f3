"""Turn run-to-failure sensor logs into discrete condition trajectories.

Input layout follows the usual turbofan degradation format: one row per
(unit, cycle) with operational settings and sensor channels.  The pipeline is
standardize -> first principal component -> seeded 1-D k-means.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class SensorTable:
    """Pooled multivariate sensor history for a fleet of units."""

    unit: np.ndarray      # int, one entry per row
    cycle: np.ndarray     # int, contiguous 1..T_u within each unit
    features: np.ndarray  # float, shape (rows, channels)

    def __post_init__(self):
        self.unit = np.asarray(self.unit, dtype=int)
        self.cycle = np.asarray(self.cycle, dtype=int)
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2 or len(self.unit) != len(self.cycle) \
                or len(self.unit) != self.features.shape[0]:
            raise ValueError("unit, cycle and features must align row-wise")
        if len(self.unit) == 0:
            raise ValueError("sensor table is empty")
        for u in np.unique(self.unit):
            c = np.sort(self.cycle[self.unit == u])
            if c[0] != 1 or np.any(np.diff(c) != 1):
                raise ValueError(
                    f"unit {u}: cycle indices must be contiguous starting at 1")

    @property
    def units(self) -> np.ndarray:
        return np.unique(self.unit)


def load_sensor_table(path, num_op_settings: int = 3,
                      include_op_settings: bool = False,
                      feature_indices=None) -> SensorTable:
    """Read `unit cycle op... sensor...` rows, whitespace- or comma-delimited.

    feature_indices selects sensor columns by 0-based position among the
    feature block (after unit/cycle and, unless included, the op settings).
    """
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",") if "," in line else line.split()
            try:
                vals = [float(x) for x in parts]
            except ValueError:
                raise ValueError(f"{path}: malformed row at line {lineno}")
            if width is None:
                width = len(vals)
                if width < 2 + num_op_settings + 1:
                    raise ValueError(
                        f"{path}: rows have {width} columns, need at least "
                        f"{2 + num_op_settings + 1}")
            elif len(vals) != width:
                raise ValueError(
                    f"{path}: inconsistent column count at line {lineno}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    unit = arr[:, 0].astype(int)
    cycle = arr[:, 1].astype(int)
    start = 2 if include_op_settings else 2 + num_op_settings
    feats = arr[:, start:]
    if feature_indices is not None:
        feats = feats[:, list(feature_indices)]
    return SensorTable(unit, cycle, feats)


def extract_health_indicator(table: SensorTable) -> dict[int, np.ndarray]:
    """Project standardized sensors onto their first principal component.

    Zero-variance channels are dropped with a warning; at least two usable
    channels are required.  The component sign is chosen so the indicator is
    higher near end of life: pooled over units, the mean over each unit's final
    5% of cycles must exceed the mean over its first 5%.
    """
    x = table.features
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    usable = std > 0.0
    if not np.all(usable):
        dropped = np.flatnonzero(~usable).tolist()
        warnings.warn(f"dropping zero-variance feature columns {dropped}")
    if usable.sum() < 2:
        raise ValueError("need at least two non-constant feature columns")
    z = (x[:, usable] - mean[usable]) / std[usable]

    cov = np.cov(z, rowvar=False)
    eigvals, eigvecs = np.linalg.eigh(cov)
    pc = eigvecs[:, -1]
    raw = z @ pc

    # sign convention: worse (higher) at end of life
    head, tail = [], []
    for u in table.units:
        mask = table.unit == u
        order = np.argsort(table.cycle[mask])
        vals = raw[mask][order]
        w = max(1, math.ceil(0.05 * len(vals)))
        head.append(vals[:w])
        tail.append(vals[-w:])
    if np.concatenate(tail).mean() < np.concatenate(head).mean():
        raw = -raw

    out = {}
    for u in table.units:
        mask = table.unit == u
        order = np.argsort(table.cycle[mask])
        out[int(u)] = raw[mask][order]
    return out


@dataclass
class TrajectorySet:
    """Ordered condition-state sequences, one per unit."""

    units: list
    states: list          # list of 1-D int arrays aligned with units
    num_states: int

    def __post_init__(self):
        if len(self.units) != len(self.states):
            raise ValueError("units and states must align")
        if len(self.units) == 0:
            raise ValueError("trajectory set is empty")
        clean = []
        for u, seq in zip(self.units, self.states):
            seq = np.asarray(seq, dtype=int)
            if seq.size == 0:
                raise ValueError(f"unit {u}: empty trajectory")
            if seq.min() < 0 or seq.max() >= self.num_states:
                raise ValueError(
                    f"unit {u}: state outside 0..{self.num_states - 1}")
            clean.append(seq)
        self.states = clean

    def __len__(self) -> int:
        return len(self.units)

    def subset(self, idx) -> "TrajectorySet":
        return TrajectorySet([self.units[i] for i in idx],
                             [self.states[i] for i in idx], self.num_states)

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("unit,cycle,state\n")
            for u, seq in zip(self.units, self.states):
                for t, s in enumerate(seq, start=1):
                    fh.write(f"{u},{t},{int(s)}\n")

    @classmethod
    def load_csv(cls, path, num_states=None) -> "TrajectorySet":
        per_unit: dict[int, list] = {}
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if lineno == 1 and line.lower().replace(" ", "") == "unit,cycle,state":
                    continue
                parts = line.split(",")
                try:
                    u, t, s = int(parts[0]), int(parts[1]), int(parts[2])
                except (ValueError, IndexError):
                    raise ValueError(f"{path}: malformed row at line {lineno}")
                per_unit.setdefault(u, []).append((t, s))
        units, states = [], []
        for u in sorted(per_unit):
            rows = sorted(per_unit[u])
            cycles = [t for t, _ in rows]
            if cycles[0] != 1 or any(b - a != 1 for a, b in zip(cycles, cycles[1:])):
                raise ValueError(f"{path}: unit {u} cycles not contiguous from 1")
            units.append(u)
            states.append(np.asarray([s for _, s in rows], dtype=int))
        if num_states is None:
            num_states = int(max(seq.max() for seq in states)) + 1
        return cls(units, states, num_states)


def _kmeans_1d(values: np.ndarray, k: int, seed: int, max_iter: int = 100):
    """Lloyd's algorithm with k-means++ seeding on a 1-D sample.

    Stops when assignments are stable; an emptied cluster keeps its center.
    Returns (labels, centers) with centers in internal (unsorted) order.
    """
    rng = np.random.default_rng(seed)
    n = values.size
    centers = np.empty(k)
    centers[0] = values[rng.integers(n)]
    d2 = (values - centers[0]) ** 2
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = values[rng.integers(n)]
        else:
            centers[j] = values[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, (values - centers[j]) ** 2)

    labels = np.full(n, -1, dtype=int)
    for _ in range(max_iter):
        dist = np.abs(values[:, None] - centers[None, :])
        new_labels = np.argmin(dist, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            mask = labels == j
            if mask.any():
                centers[j] = values[mask].mean()
    return labels, centers


def discretize(indicator: dict[int, np.ndarray], num_states: int = 7,
               seed: int = 42) -> TrajectorySet:
    """Cluster pooled indicator values into ordered condition states.

    States are relabeled so cluster centers ascend: state 0 is healthiest,
    num_states - 1 worst.
    """
    if num_states < 2:
        raise ValueError("num_states must be >= 2")
    if not indicator:
        raise ValueError("empty indicator")
    units = sorted(indicator)
    pooled = np.concatenate([np.asarray(indicator[u], dtype=float)
                             for u in units])
    if np.unique(pooled).size < num_states:
        raise ValueError("fewer distinct indicator values than requested states")

    labels, centers = _kmeans_1d(pooled, num_states, seed)
    order = np.argsort(centers)
    relabel = np.empty_like(order)
    relabel[order] = np.arange(num_states)
    labels = relabel[labels]

    out_states = []
    pos = 0
    for u in units:
        m = len(indicator[u])
        out_states.append(labels[pos:pos + m].astype(int))
        pos += m
    return TrajectorySet(units, out_states, num_states)
