"""Single-row worst-case expectation problems.

All three solvers take the continuation vector already discounted (v = beta*V);
the per-period reward is added by the caller.  Values are worst-case means,
worst_row the attaining distribution, dual the optimal multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core


@dataclass
class InnerResult:
    value: float
    worst_row: np.ndarray
    dual: float


def _check_values(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise ValueError("values must be a 1-D vector")
    if np.any(np.isnan(values)):
        raise ValueError("values contain NaN")
    return values


def kl_inner(nominal_row, values, theta: float) -> InnerResult:
    """Minimize E_q[values] over q with KL(q || nominal_row) <= theta.

    Solved through the concave 1-D dual
        g(mu) = -mu*log(sum p*exp(-v/mu)) - mu*theta,
    bracketed by geometric expansion from mu = 1 and refined by golden section
    (relative tolerance 1e-10, at most 200 iterations).  The worst row is the
    exponential tilt of the nominal at the optimal mu; radii at or beyond the
    divergence of the argmin point mass return the mu -> 0 limit.
    """
    p = np.asarray(nominal_row, dtype=float)
    v = _check_values(values)
    if p.shape != v.shape:
        raise ValueError("nominal_row and values must have equal length")
    if np.any(np.isnan(p)) or np.any(p < 0.0):
        raise ValueError("nominal_row must be a probability vector")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"nominal_row sums to {p.sum():.12f}")
    if np.isnan(theta) or theta < 0.0:
        raise ValueError("theta must be >= 0")
    value, mu, worst = _core.kl_row_solve(p, v, float(theta))
    return InnerResult(float(value), worst, float(mu))


def _check_box(lower_row, upper_row, values):
    lo = np.asarray(lower_row, dtype=float)
    up = np.asarray(upper_row, dtype=float)
    v = _check_values(values)
    if lo.shape != up.shape or lo.shape != v.shape:
        raise ValueError("bounds and values must have equal length")
    if np.any(lo < -1e-12) or np.any(up > 1.0 + 1e-12) or np.any(up - lo < -1e-12):
        raise ValueError("need 0 <= lower <= upper <= 1 entrywise")
    if lo.sum() > 1.0 + 1e-12 or up.sum() < 1.0 - 1e-12:
        raise ValueError(
            f"infeasible box: sum(lower)={lo.sum():.6f}, sum(upper)={up.sum():.6f}")
    return lo, up, v


def interval_inner_greedy(lower_row, upper_row, values) -> InnerResult:
    """Closed-form worst case for a box row when values are non-increasing.

    Mass goes to the upper bounds above the switch index, lower bounds below
    it, remainder at the switch.  Arbitrary value orderings must use
    interval_inner_dual instead.
    """
    lo, up, v = _check_box(lower_row, upper_row, values)
    if np.any(np.diff(v) > 1e-12):
        raise ValueError("values must be non-increasing for the greedy form; "
                         "use interval_inner_dual")
    value, lam, worst = _core.interval_row_greedy(lo, up, v)
    return InnerResult(float(value), worst, float(lam))


def interval_inner_dual(lower_row, upper_row, values) -> InnerResult:
    """Worst case over a box row for arbitrary values.

    Maximizes the concave piecewise-linear dual over its breakpoints
    (lambda = values[j]) and recovers the primal row by complementary
    slackness; ties at the optimal breakpoint fill smallest index first.
    """
    lo, up, v = _check_box(lower_row, upper_row, values)
    value, lam, worst = _core.interval_row_dual(lo, up, v)
    if abs(worst.sum() - 1.0) > 1e-9:
        raise RuntimeError("dual recovery failed to produce a distribution")
    return InnerResult(float(value), worst, float(lam))
