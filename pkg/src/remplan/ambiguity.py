"""Data-driven ambiguity sets for the robust recursion.

Two families: per-row KL balls around a nominal kernel with statistically
calibrated radii, and entrywise interval boxes from bootstrap percentile
bounds with effective (simplex-aware) tightening.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .estimate import CountMatrix, degrade_kernel
from .model import Kernel

FEAS_TOL = 1e-12
ORDER_TOL = 1e-12


class KLAmbiguity:
    """Per-row KL balls: for each (s, k) the set of rows q with
    KL(q || nominal row) <= theta(s, k).

    theta may be a scalar (broadcast) or a table of shape (S+1, k_max+1);
    +inf marks a row unconstrained beyond the nominal's support.
    """

    def __init__(self, nominal: Kernel, theta):
        self.nominal = nominal
        t = np.asarray(theta, dtype=float)
        shape = (nominal.num_conditions, nominal.k_max + 1)
        if t.ndim == 0:
            t = np.full(shape, float(t))
        if t.shape != shape:
            raise ValueError(f"theta table must have shape {shape}")
        if np.any(np.isnan(t)) or np.any(t < 0.0):
            raise ValueError("theta must be >= 0 (NaN not allowed)")
        self.theta = t

    @property
    def num_conditions(self) -> int:
        return self.nominal.num_conditions

    @property
    def k_max(self) -> int:
        return self.nominal.k_max

    def to_dict(self) -> dict:
        return {"nominal": self.nominal.to_dict(), "theta": self.theta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KLAmbiguity":
        theta = d["theta"]
        return cls(Kernel.from_dict(d["nominal"]), np.asarray(theta, dtype=float)
                   if not np.isscalar(theta) else theta)


class IntervalAmbiguity:
    """Entrywise boxes lower <= p <= upper intersected with the simplex."""

    def __init__(self, lower, upper, alpha=None, source_seed=None):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.ndim == 2:
            lower = lower[None]
        if upper.ndim == 2:
            upper = upper[None]
        if lower.shape != upper.shape or lower.ndim != 3 \
                or lower.shape[1] != lower.shape[2]:
            raise ValueError("lower/upper must be matching (k+1, S+1, S+1) stacks")
        if np.any(lower < -FEAS_TOL) or np.any(upper > 1.0 + FEAS_TOL):
            raise ValueError("bounds must lie in [0, 1]")
        if np.any(upper - lower < -FEAS_TOL):
            raise ValueError("need lower <= upper entrywise")
        for k in range(lower.shape[0]):
            tri_l = np.tril(lower[k], k=-1)
            tri_u = np.tril(upper[k], k=-1)
            if np.any(np.abs(tri_l) > FEAS_TOL) or np.any(np.abs(tri_u) > FEAS_TOL):
                raise ValueError(
                    f"bounds must be zero below the diagonal (slice k={k})")
        ls = lower.sum(axis=2)
        us = upper.sum(axis=2)
        if np.any(ls > 1.0 + FEAS_TOL) or np.any(us < 1.0 - FEAS_TOL):
            k, s = np.argwhere((ls > 1.0 + FEAS_TOL) | (us < 1.0 - FEAS_TOL))[0]
            raise ValueError(
                f"infeasible bounds at s={s}, k={k}: "
                f"sum(lower)={ls[k, s]:.6f}, sum(upper)={us[k, s]:.6f}")
        self.lower = lower
        self.upper = upper
        self.alpha = alpha
        self.source_seed = source_seed

    @property
    def num_conditions(self) -> int:
        return self.lower.shape[1]

    @property
    def k_max(self) -> int:
        return self.lower.shape[0] - 1

    def to_dict(self) -> dict:
        return {
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "alpha": self.alpha,
            "source_seed": self.source_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IntervalAmbiguity":
        return cls(np.asarray(d["lower"], dtype=float),
                   np.asarray(d["upper"], dtype=float),
                   d.get("alpha"), d.get("source_seed"))


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats; 0*log(0/.) = 0, positive mass off q's support -> inf."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("p and q must have equal length")
    pos = p > 0.0
    if np.any(q[pos] <= 0.0):
        return float("inf")
    return float(np.sum(p[pos] * np.log(p[pos] / q[pos])))


def kl_radius_from_counts(counts: CountMatrix, alpha: float) -> np.ndarray:
    """Per-row KL radius chi2_{m-1, 1-alpha} / (2 N_s).

    Rows with no observations get +inf (unconstrained) and a warning.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    m = counts.num_states
    quantile = stats.chi2.ppf(1.0 - alpha, df=m - 1)
    totals = counts.row_totals
    theta = np.full(m, np.inf)
    visited = totals > 0
    theta[visited] = quantile / (2.0 * totals[visited])
    if np.any(~visited):
        warnings.warn(
            f"states {np.flatnonzero(~visited).tolist()} have no observations; "
            "their KL radius is +inf")
    return theta


def tighten_bounds(raw: IntervalAmbiguity) -> IntervalAmbiguity:
    """Effective bounds: clip each entry's range to what the simplex allows
    given the other entries' bounds.

    The result gives the exact per-entry extremes of the feasible polytope, so
    applying it twice changes nothing.
    """
    lower, upper = raw.lower, raw.upper
    ls = lower.sum(axis=2, keepdims=True)
    us = upper.sum(axis=2, keepdims=True)
    new_upper = np.minimum(upper, 1.0 - (ls - lower))
    new_lower = np.maximum(lower, 1.0 - (us - upper))
    # guard against float fuzz flipping the order on tight rows
    new_upper = np.maximum(new_upper, new_lower)
    return IntervalAmbiguity(new_lower, new_upper, raw.alpha, raw.source_seed)


def interval_from_bootstrap(kernels, alpha: float, k_max: int = 10,
                            rho: float = 0.07, ensure_feasible: bool = False,
                            source_seed=None) -> IntervalAmbiguity:
    """Entrywise percentile box from bootstrap base slices.

    Each bootstrap slice is pushed through the usage-worsening transform first,
    then the alpha/2 and 1 - alpha/2 linear-interpolation quantiles are taken
    per entry and per k.  With ensure_feasible, any row whose percentile bounds
    exclude every distribution is widened minimally: its confidence level is
    lowered (per row) until the bounds bracket a distribution.  At level 0 the
    bounds are the sample min/max envelope, which every sample row satisfies,
    so the widening always terminates; because quantile bounds widen
    monotonically as the level drops, boxes built from one bootstrap set stay
    nested across an alpha grid even when some rows are repaired.
    """
    if len(kernels) < 2:
        raise ValueError("need at least two bootstrap kernels")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    stacks = np.stack([degrade_kernel(k, rho=rho, k_max=k_max).p
                       for k in kernels])   # (B, k+1, S+1, S+1)
    lower = np.quantile(stacks, alpha / 2.0, axis=0, method="linear")
    upper = np.quantile(stacks, 1.0 - alpha / 2.0, axis=0, method="linear")
    if ensure_feasible:
        ls = lower.sum(axis=2)
        us = upper.sum(axis=2)
        bad = (ls > 1.0 + FEAS_TOL) | (us < 1.0 - FEAS_TOL)
        if np.any(bad):
            for k, s in np.argwhere(bad):
                block = stacks[:, k, s, :]
                lo_a, hi_a = 0.0, alpha
                for _ in range(60):
                    mid = 0.5 * (lo_a + hi_a)
                    l_mid = np.quantile(block, mid / 2.0, axis=0,
                                        method="linear")
                    u_mid = np.quantile(block, 1.0 - mid / 2.0, axis=0,
                                        method="linear")
                    # exact bracket: a within-tolerance-empty box would be
                    # amplified into a hard failure by the tightening pass
                    if l_mid.sum() <= 1.0 <= u_mid.sum():
                        lo_a = mid
                    else:
                        hi_a = mid
                lower[k, s] = np.quantile(block, lo_a / 2.0, axis=0,
                                          method="linear")
                upper[k, s] = np.quantile(block, 1.0 - lo_a / 2.0, axis=0,
                                          method="linear")
            warnings.warn(
                f"widened {int(bad.sum())} rows to a lower confidence level "
                "to restore feasibility")
    raw = IntervalAmbiguity(lower, upper, alpha=alpha, source_seed=source_seed)
    return tighten_bounds(raw)


@dataclass
class BoundConditionReport:
    """Cumulative-sum monotonicity of interval bounds across rows and cycles.

    These are the sufficient conditions under which the greedy worst-case
    matrices inherit IFR and the cross-k ordering, so the control-limit
    structure carries over to interval sets.
    """

    lower_heads_in_s: bool
    upper_tails_in_s: bool
    lower_heads_in_k: bool
    upper_tails_in_k: bool
    violations: list = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return (self.lower_heads_in_s and self.upper_tails_in_s
                and self.lower_heads_in_k and self.upper_tails_in_k)


def check_bound_conditions(amb: IntervalAmbiguity,
                           tol: float = ORDER_TOL) -> BoundConditionReport:
    """Verify all four cumulative-sum conditions, reporting violated tuples.

    Head sums of the lower bounds must be non-increasing in s and in k; tail
    sums of the upper bounds non-decreasing in s and in k.  Adjacent pairs are
    compared (equivalent to all pairs by transitivity); tuples are
    (i, s, s+1, k) for the s-direction and (i, s, k, k+1) for the k-direction.
    """
    heads = np.cumsum(amb.lower, axis=2)             # (k+1, S+1, i)
    tails = np.cumsum(amb.upper[:, :, ::-1], axis=2)[:, :, ::-1]
    violations = []

    d = np.diff(heads, axis=1)                       # rows s -> s+1
    lh_s = True
    for k, s, i in np.argwhere(d > tol):
        violations.append(("lower_heads_s", int(i), int(s), int(s) + 1, int(k)))
        lh_s = False
    d = np.diff(tails, axis=1)
    ut_s = True
    for k, s, i in np.argwhere(d < -tol):
        violations.append(("upper_tails_s", int(i), int(s), int(s) + 1, int(k)))
        ut_s = False
    d = np.diff(heads, axis=0)                       # cycles k -> k+1
    lh_k = True
    for k, s, i in np.argwhere(d > tol):
        violations.append(("lower_heads_k", int(i), int(s), int(k), int(k) + 1))
        lh_k = False
    d = np.diff(tails, axis=0)
    ut_k = True
    for k, s, i in np.argwhere(d < -tol):
        violations.append(("upper_tails_k", int(i), int(s), int(k), int(k) + 1))
        ut_k = False

    return BoundConditionReport(lh_s, ut_s, lh_k, ut_k, violations)
