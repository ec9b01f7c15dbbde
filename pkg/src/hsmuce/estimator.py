"""Multiscale-constrained maximum likelihood estimation of a step function.

The number of change-points is the smallest count for which some step function
passes the multiscale test. Among those, the fit maximizes the gaussian
likelihood with a separate mean and variance per segment. The feasible
positions of each change-point form an index range that doubles as its
confidence interval.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import NumericInputError
from .intervals import IntervalSystem, build
from .multiscale import _run_starts, interval_moments, test_candidate, thresholds_for
from .stepfn import StepFn

__all__ = [
    "IntervalBounds",
    "Limits",
    "FitResult",
    "compute_bounds",
    "left_right_limits",
    "confidence_band",
    "fit",
]


@dataclass(frozen=True, eq=False)
class IntervalBounds:
    """Admissible range of a constant mean on every member interval."""

    system: IntervalSystem
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)

    def _csr(self):
        s = self.system
        return (s.starts, s.ends, *s.by_end, *s.by_start)

    def intersected(self, i, j):
        """Intersected bounds over the 1-based inclusive range ``[i, j]``."""
        s = self.system
        return _kernels.segment_bounds(i - 1, j - 1, self.lower, self.upper, s.ends, *s.by_start)


@dataclass(frozen=True)
class Limits:
    """1-based left and right limits; change ``k`` starts a segment in ``[left[k], right[k]]``."""

    left: np.ndarray
    right: np.ndarray

    @property
    def K(self):
        return len(self.right)

    def candidate_ranges(self, n):
        """0-based candidate ranges with the sentinels ``{0}`` and ``{n}``."""
        lo = np.concatenate([[0], self.left - 1, [n]]).astype(np.int64)
        hi = np.concatenate([[0], self.right - 1, [n]]).astype(np.int64)
        return lo, hi


@dataclass(frozen=True, eq=False)
class FitResult:
    k_hat: int
    fit: StepFn
    limits: Limits
    band_lower: np.ndarray = field(repr=False)
    band_upper: np.ndarray = field(repr=False)
    cost: float
    worst_margin: float

    @property
    def n(self):
        return self.fit.n

    @property
    def change_indices(self):
        """1-based index of the first observation after each change."""
        return self.fit.breaks + 1

    @property
    def cis(self):
        """Confidence intervals ``[L_k / n, R_k / n]`` for the change locations."""
        return np.column_stack([self.limits.left, self.limits.right]) / self.n


def _as_observations(y):
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) < 2:
        raise ValueError("need at least two observations")
    if not np.all(np.isfinite(y)):
        raise NumericInputError("observations contain NaN or infinite values")
    return y


def compute_bounds(y, system, q):
    """Per-interval bounds ``mean -/+ sqrt(q * var / len)``; infinite thresholds give the whole line."""
    y = _as_observations(y)
    mean, var = interval_moments(y, system)
    qs = thresholds_for(system, q)[system.scale_index]
    length = (system.ends - system.starts + 1).astype(float)
    with np.errstate(invalid="ignore"):
        half = np.where(np.isinf(qs), np.inf, np.sqrt(qs * var / length))
    return IntervalBounds(system, mean - half, mean + half)


def left_right_limits(bounds):
    """Minimal change count and the index limits of every change.

    Right limits come from a greedy forward pass (extend a segment until its
    intersected bounds cross, restart there), left limits from the mirrored
    backward pass.
    """
    s = bounds.system
    right = _kernels.right_limits(s.n, bounds.lower, bounds.upper, s.starts, *s.by_end)
    left = _kernels.left_limits(s.n, len(right), bounds.lower, bounds.upper, s.ends, *s.by_start)
    return len(right), Limits(left + 1, right + 1)


def confidence_band(bounds, limits):
    """Pointwise hull of every step function with the minimal change count that passes the test."""
    s = bounds.system
    lo, hi = limits.candidate_ranges(s.n)
    return _kernels.envelope(s.n, lo, hi, bounds.lower, bounds.upper, s.starts, s.ends,
                             *s.by_end, *s.by_start)


def _cost_inputs(y):
    center = y.mean()
    yc = y - center
    c1 = np.concatenate([[0.0], np.cumsum(yc)])
    c2 = np.concatenate([[0.0], np.cumsum(yc * yc)])
    scale = float(np.mean(yc * yc))
    floor = 1e-12 * scale if scale > 0 else np.finfo(float).tiny
    return y, center, c1, c2, _run_starts(y), floor


def fit(y, system, q):
    """Fit the multiscale-constrained step function.

    Parameters
    ----------
    y : array_like
        Observations at ``i/n``.
    system : IntervalSystem or str
        Interval system or its kind name.
    q : CriticalValues or array_like
        Thresholds, one per scale of ``system``.
    """
    y = _as_observations(y)
    if not isinstance(system, IntervalSystem):
        system = build(len(y), system)
    n = system.n
    bounds = compute_bounds(y, system, q)
    k_hat, limits = left_right_limits(bounds)
    cand_lo, cand_hi = limits.candidate_ranges(n)
    cost_args = _cost_inputs(y)
    s = system
    changes, cost = _kernels.constrained_dp(n, cand_lo, cand_hi, bounds.lower, bounds.upper,
                                            s.starts, s.ends, *s.by_end, *s.by_start, *cost_args)
    if not np.isfinite(cost):
        raise RuntimeError("no feasible segmentation found; this indicates a bug")
    edges = np.concatenate([[0], changes, [n]])
    values = np.empty(k_hat + 1)
    cost = 0.0
    for k in range(k_hat + 1):
        a, b = edges[k], edges[k + 1] - 1
        blo, bhi = _kernels.segment_bounds(a, b, bounds.lower, bounds.upper, s.ends, *s.by_start)
        seg = y[a:b + 1]
        # two-pass moments for the reported fit; the search itself uses cumulative sums
        mean = seg[0] if cost_args[4][b] <= a else seg.mean()
        values[k] = min(max(mean, blo), bhi)
        rss = float(np.sum((seg - values[k]) ** 2))
        cost += len(seg) * np.log(max(rss / len(seg), cost_args[5]))
    step = StepFn(n, changes, values)
    band_lower, band_upper = confidence_band(bounds, limits)
    outcome = test_candidate(y, step, q, system)
    return FitResult(k_hat, step, limits, band_lower, band_upper, float(cost), outcome.worst_margin)
