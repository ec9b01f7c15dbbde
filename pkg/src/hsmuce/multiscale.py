"""Local likelihood-ratio statistics and the multiscale acceptance test."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "local_statistic",
    "interval_moments",
    "scale_maxima",
    "batch_scale_maxima",
    "test_candidate",
    "TestOutcome",
    "thresholds_for",
]


def local_statistic(y, m):
    """(len) * (mean - m)^2 / s^2 with the unbiased variance s^2.

    A zero variance yields 0 when every observation equals ``m`` and
    ``inf`` otherwise.
    """
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        raise ValueError("local_statistic needs at least two observations")
    if np.all(y == y[0]):
        return 0.0 if y[0] == m else np.inf
    mean = y.mean()
    var = np.sum((y - mean) ** 2) / (len(y) - 1)
    return float(len(y) * (mean - m) ** 2 / var)


def _run_starts(y):
    """For each index, the first index of the run of equal values containing it."""
    n = len(y)
    new_run = np.ones(n, dtype=bool)
    new_run[1:] = y[1:] != y[:-1]
    return np.maximum.accumulate(np.where(new_run, np.arange(n), 0))


def interval_moments(y, system):
    """Mean and unbiased variance of ``y`` on every member interval.

    Sums come from cumulative sums of the centered data. Intervals on which
    the data is exactly constant get variance 0 and the exact value as mean,
    so that rounding never separates identical observations.
    """
    y = np.asarray(y, dtype=float)
    starts, ends = system.starts, system.ends
    center = y.mean()
    yc = y - center
    c1 = np.concatenate([[0.0], np.cumsum(yc)])
    c2 = np.concatenate([[0.0], np.cumsum(yc * yc)])
    length = (ends - starts + 1).astype(float)
    s1 = c1[ends + 1] - c1[starts]
    s2 = c2[ends + 1] - c2[starts]
    mean_c = s1 / length
    var = np.maximum(s2 - s1 * mean_c, 0.0) / (length - 1)
    mean = mean_c + center
    const = _run_starts(y)[ends] <= starts
    var[const] = 0.0
    mean[const] = y[starts[const]]
    return mean, var


def _stat_from_moments(length, mean, var, m):
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = length * (mean - m) ** 2 / var
    degenerate = var == 0.0
    stat[degenerate] = np.where(mean[degenerate] == np.broadcast_to(m, mean.shape)[degenerate], 0.0, np.inf)
    return stat


def scale_maxima(z, system):
    """Per-scale maxima of the statistics of ``z`` against the value 0."""
    z = np.asarray(z, dtype=float)
    if len(z) != system.n:
        raise ValueError("sequence length must equal system.n")
    mean, var = interval_moments(z, system)
    length = (system.ends - system.starts + 1).astype(float)
    stat = _stat_from_moments(length, mean, var, 0.0)
    out = np.full(system.d, -np.inf)
    np.maximum.at(out, system.scale_index, stat)
    return out


def _ratio(s1, s2, length):
    """Statistic against 0 from block sums; handles zero variance."""
    num = s1 * s1 / length
    var = (s2 - num) / (length - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = num / var
    bad = ~(var > 0)
    if np.any(bad):
        stat[bad] = np.where(s1[bad] == 0.0, 0.0, np.inf)
    return stat


def batch_scale_maxima(z, system):
    """Row-wise :func:`scale_maxima` for a matrix of shape ``(B, n)``.

    The dyadic partition is handled by merging neighbouring block sums, which
    costs O(n) per row over all scales.
    """
    z = np.asarray(z, dtype=float)
    b, n = z.shape
    out = np.empty((b, system.d))
    if system.kind == "dyadic-partition":
        m = n // 2
        blocks = z[:, : 2 * m].reshape(b, m, 2)
        s1 = blocks.sum(axis=2)
        s2 = (blocks * blocks).sum(axis=2)
        for k, sc in enumerate(system.scales):
            if k > 0:
                m = s1.shape[1] // 2
                s1 = s1[:, : 2 * m].reshape(b, m, 2).sum(axis=2)
                s2 = s2[:, : 2 * m].reshape(b, m, 2).sum(axis=2)
            out[:, k] = _ratio(s1, s2, float(sc.length)).max(axis=1)
        return out
    c1 = np.zeros((b, n + 1))
    c2 = np.zeros((b, n + 1))
    np.cumsum(z, axis=1, out=c1[:, 1:])
    np.cumsum(z * z, axis=1, out=c2[:, 1:])
    for k, sc in enumerate(system.scales):
        ell = sc.length
        s1 = c1[:, ell:] - c1[:, : n + 1 - ell]
        s2 = c2[:, ell:] - c2[:, : n + 1 - ell]
        out[:, k] = _ratio(s1, s2, float(ell)).max(axis=1)
    return out


def thresholds_for(system, q):
    """Per-scale thresholds aligned with ``system.scales``.

    ``q`` is either a critical-value object exposing ``for_system`` or an
    array with one entry per scale.
    """
    if hasattr(q, "for_system"):
        return q.for_system(system)
    q = np.asarray(q, dtype=float).reshape(-1)
    if len(q) != system.d:
        raise ValueError(f"expected {system.d} thresholds, got {len(q)}")
    return q


@dataclass(frozen=True)
class TestOutcome:
    accept: bool
    worst_interval: tuple | None
    worst_margin: float

    def __bool__(self):
        return self.accept


def test_candidate(y, mu, q, system, rtol=1e-9):
    """Check the candidate step function against every interval where it is constant.

    Returns the decision, the 1-based interval with the largest
    ``statistic - threshold`` margin and that margin. ``rtol`` absorbs
    rounding for fits that sit exactly on a bound.
    """
    y = np.asarray(y, dtype=float)
    qs = thresholds_for(system, q)
    seg = mu.segment_of(np.arange(system.n))
    starts, ends = system.starts, system.ends
    inside = seg[starts] == seg[ends]
    if not np.any(inside):
        return TestOutcome(True, None, -np.inf)
    mean, var = interval_moments(y, system)
    idx = np.flatnonzero(inside)
    length = (ends[idx] - starts[idx] + 1).astype(float)
    m = mu.values[seg[starts[idx]]]
    stat = _stat_from_moments(length, mean[idx], var[idx], m)
    thr = qs[system.scale_index[idx]]
    with np.errstate(invalid="ignore"):
        margin = np.where(np.isinf(thr), -np.inf, stat - thr)
    w = int(np.argmax(margin))
    worst = (int(starts[idx[w]]) + 1, int(ends[idx[w]]) + 1)
    reject = stat > thr * (1 + rtol)
    return TestOutcome(not bool(np.any(reject)), worst, float(margin[w]))
