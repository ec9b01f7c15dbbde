"""Interval systems on which the multiscale test is evaluated.

All index arrays are 0-based with inclusive ends; the public helpers that take
or yield intervals use 1-based inclusive pairs ``(i, j)``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError

__all__ = [
    "KINDS", "Scale", "IntervalSystem", "build", "canonical_kind", "dyadic_depth", "next_power_of_two",
]

KINDS = ("dyadic-partition", "dyadic-length", "all-intervals")
_ALIASES = {
    "dyadic": "dyadic-partition",
    "dyadic-partition": "dyadic-partition",
    "dyadic-length": "dyadic-length",
    "all": "all-intervals",
    "all-intervals": "all-intervals",
}


def canonical_kind(kind):
    try:
        return _ALIASES[kind]
    except KeyError:
        raise DomainError(f"unknown interval system {kind!r}; expected one of {sorted(_ALIASES)}") from None


@dataclass(frozen=True)
class Scale:
    """One scale: all member intervals share ``length``."""

    label: int
    length: int
    starts: np.ndarray = field(repr=False)

    @property
    def count(self):
        return len(self.starts)


@dataclass(frozen=True, eq=False)
class IntervalSystem:
    n: int
    kind: str
    scales: tuple

    @property
    def d(self):
        return len(self.scales)

    @property
    def labels(self):
        return tuple(s.label for s in self.scales)

    @property
    def lengths(self):
        return np.array([s.length for s in self.scales], dtype=np.int64)

    @cached_property
    def _flat(self):
        starts = np.concatenate([s.starts for s in self.scales]).astype(np.int64)
        lengths = np.concatenate([np.full(s.count, s.length) for s in self.scales]).astype(np.int64)
        scale_idx = np.concatenate([np.full(s.count, k) for k, s in enumerate(self.scales)]).astype(np.int64)
        return starts, starts + lengths - 1, scale_idx

    @property
    def starts(self):
        return self._flat[0]

    @property
    def ends(self):
        return self._flat[1]

    @property
    def scale_index(self):
        return self._flat[2]

    @property
    def size(self):
        return len(self.starts)

    @cached_property
    def by_end(self):
        """CSR index (ptr, ids): intervals ending at e, latest start first."""
        order = np.lexsort((-self.starts, self.ends))
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(ptr, self.ends + 1, 1)
        return np.cumsum(ptr), order.astype(np.int64)

    @cached_property
    def by_start(self):
        """CSR index (ptr, ids): intervals starting at s, earliest end first."""
        order = np.lexsort((self.ends, self.starts))
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(ptr, self.starts + 1, 1)
        return np.cumsum(ptr), order.astype(np.int64)

    def members(self, label=None):
        """1-based inclusive intervals of the scale with ``label`` (or of all scales)."""
        scales = self.scales if label is None else [sc for sc in self.scales if sc.label == label]
        return [(int(s) + 1, int(s) + sc.length) for sc in scales for s in sc.starts]

    def intervals_on(self, i, j):
        """Yield the member intervals (1-based) contained in ``[i, j]``."""
        for sc in self.scales:
            if sc.length > j - i + 1:
                continue
            lo = np.searchsorted(sc.starts, i - 1, side="left")
            hi = np.searchsorted(sc.starts, j - sc.length, side="right")
            for s in sc.starts[lo:hi]:
                yield int(s) + 1, int(s) + sc.length

    def restrict_labels(self, labels):
        """Positions of this system's scales inside another label sequence."""
        index = {lab: p for p, lab in enumerate(labels)}
        missing = [lab for lab in self.labels if lab not in index]
        if missing:
            raise DomainError(f"scales {missing} are not available")
        return np.array([index[lab] for lab in self.labels], dtype=np.int64)


def build(n, kind="dyadic-partition"):
    """Build the interval system of the given kind for ``n`` observations."""
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    kind = canonical_kind(kind)
    scales = []
    if kind == "dyadic-partition":
        k = 1
        while 2 ** k <= n:
            length = 2 ** k
            scales.append(Scale(k, length, np.arange(n // length, dtype=np.int64) * length))
            k += 1
    elif kind == "dyadic-length":
        k = 1
        while 2 ** k <= n:
            length = 2 ** k
            scales.append(Scale(k, length, np.arange(n - length + 1, dtype=np.int64)))
            k += 1
    else:
        for length in range(2, n + 1):
            scales.append(Scale(length, length, np.arange(n - length + 1, dtype=np.int64)))
    return IntervalSystem(n, kind, tuple(scales))


def dyadic_depth(n):
    """Number of dyadic scales, floor(log2 n)."""
    return int(n).bit_length() - 1


def next_power_of_two(n):
    return 1 << (int(n) - 1).bit_length()
