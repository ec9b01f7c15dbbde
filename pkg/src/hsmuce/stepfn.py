"""Piecewise-constant functions on the sampling grid i/n."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = ["StepFn"]


@dataclass(frozen=True, eq=False)
class StepFn:
    """Right-continuous step function sampled at ``i/n``, ``i = 1..n``.

    ``breaks`` holds 0-based observation indices where a new segment starts,
    so segment ``k`` covers ``y[breaks[k-1]:breaks[k]]``. The change-point
    location of a break ``b`` is ``(b + 1) / n``: observation ``b + 1``
    (1-based) is the first one carrying the new value.
    """

    n: int
    breaks: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=np.int64).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if len(v) != len(b) + 1:
            raise DomainError("need exactly one more value than breaks")
        if len(b) and (b[0] < 1 or b[-1] > self.n - 1 or np.any(np.diff(b) <= 0)):
            raise DomainError("breaks must be strictly increasing inside [1, n-1]")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, n, value):
        return cls(n, np.empty(0, dtype=np.int64), np.array([value], dtype=float))

    @classmethod
    def from_taus(cls, n, taus, values):
        """Snap continuous locations to the grid, ties to the left."""
        taus = np.asarray(taus, dtype=float)
        first = np.ceil(taus * n - 0.5).astype(np.int64)
        return cls(n, first - 1, values)

    @property
    def K(self):
        return len(self.breaks)

    @property
    def taus(self):
        return (self.breaks + 1) / self.n

    @property
    def bounds(self):
        """Segment boundaries ``0 = b_0 < ... < b_{K+1} = n`` in index space."""
        return np.concatenate([[0], self.breaks, [self.n]])

    def segment_of(self, idx):
        return np.searchsorted(self.breaks, idx, side="right")

    def sample(self):
        """Values at the observation points, length ``n``."""
        return np.repeat(self.values, np.diff(self.bounds))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.values[np.searchsorted(self.taus, t, side="right")]
