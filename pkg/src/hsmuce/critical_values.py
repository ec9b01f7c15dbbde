"""Monte-Carlo calibration of scale-dependent critical values.

Under pure standard gaussian noise the vector of per-scale maxima
``(T_1, ..., T_d)`` is simulated ``M`` times. The thresholds are then chosen on
that sample so that the joint empirical rejection rate is just below ``alpha``
while the per-scale rejection rates stay proportional to the weights.
"""

import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import CacheCorruptError, CacheVersionError, DomainError, ResourceError
from .intervals import build, canonical_kind, next_power_of_two
from .multiscale import batch_scale_maxima

__all__ = [
    "DEFAULT_M",
    "DEFAULT_SEED",
    "RNG_ID",
    "SimulationCache",
    "CriticalValues",
    "simulate_statistics",
    "balance",
    "empirical_level",
    "store_cache",
    "load_cache",
    "cache_path",
    "get_cache",
    "critical_values",
    "equal_weights",
    "check_weights",
]

DEFAULT_M = 10_000
DEFAULT_SEED = 0
RNG_ID = "numpy-philox4x64-counter"
FORMAT_VERSION = 1
_MAGIC = b"HSMCV\x00"
DEFAULT_MAX_BYTES = 2 * 1024 ** 3
_BLOCK_DOUBLES = 1 << 21


@dataclass(frozen=True, eq=False)
class SimulationCache:
    """Sorted per-scale samples plus the sort permutation of each scale.

    ``order[k, p]`` is the repetition whose statistic sits at sorted position
    ``p`` of scale ``k``; the joint level of a threshold vector needs it.
    """

    n_sim: int
    M: int
    seed: int
    kind: str
    labels: tuple
    sorted: np.ndarray = field(repr=False)
    order: np.ndarray = field(repr=False)
    rng_id: str = RNG_ID

    @property
    def d(self):
        return len(self.labels)

    def raw(self):
        """Unsorted ``(M, d)`` matrix of simulated maxima."""
        out = np.empty((self.M, self.d))
        for k in range(self.d):
            out[self.order[k], k] = self.sorted[k]
        return out


@dataclass(frozen=True, eq=False)
class CriticalValues:
    q: np.ndarray
    alpha: float
    weights: np.ndarray
    labels: tuple
    kind: str
    M: int
    seed: int
    n_sim: int
    rng_id: str = RNG_ID

    def for_system(self, system):
        if canonical_kind(system.kind) != self.kind:
            raise DomainError(f"critical values are for {self.kind}, system is {system.kind}")
        return self.q[system.restrict_labels(self.labels)]


def _repetition_normals(seed, rep, n):
    bitgen = np.random.Philox(key=seed, counter=[0, 0, rep, 0])
    return np.random.Generator(bitgen).standard_normal(n)


def _simulate_block(system, seed, first, count):
    z = np.empty((count, system.n))
    for r in range(count):
        z[r] = _repetition_normals(seed, first + r, system.n)
    return batch_scale_maxima(z, system)


def simulate_statistics(n, kind="dyadic-partition", M=DEFAULT_M, seed=DEFAULT_SEED,
                        n_jobs=1, max_bytes=DEFAULT_MAX_BYTES):
    """Simulate ``M`` draws of the per-scale maxima at the next power of two >= n.

    Repetition ``r`` uses its own Philox stream (key ``seed``, counter offset
    ``r``), so the result does not depend on blocking or ``n_jobs``.
    """
    if M < 2 or n < 2:
        raise DomainError("need M >= 2 and n >= 2")
    if not (0 <= int(seed) < 2 ** 64):
        raise DomainError("seed must be a nonnegative 64-bit integer")
    n_sim = next_power_of_two(n)
    system = build(n_sim, kind)
    need = M * system.d * 16
    if need > max_bytes:
        raise ResourceError(f"cache needs {need} bytes, budget is {max_bytes}")
    block = max(1, min(M, _BLOCK_DOUBLES // n_sim))
    firsts = range(0, M, block)
    jobs = [(f, min(block, M - f)) for f in firsts]
    if n_jobs == 1:
        parts = [_simulate_block(system, int(seed), f, c) for f, c in jobs]
    else:
        from joblib import Parallel, delayed

        parts = Parallel(n_jobs=n_jobs)(delayed(_simulate_block)(system, int(seed), f, c) for f, c in jobs)
    stats = np.concatenate(parts, axis=0)
    order = np.argsort(stats, axis=0, kind="stable").T.copy()
    sorted_ = np.take_along_axis(stats, order.T, axis=0).T.copy()
    return SimulationCache(n_sim, int(M), int(seed), system.kind, system.labels, sorted_, order)


def equal_weights(d):
    return np.full(d, 1.0 / d)


def check_weights(weights, d):
    w = np.asarray(weights, dtype=float).reshape(-1)
    if len(w) != d:
        raise DomainError(f"expected {d} weights, got {len(w)}")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise DomainError("weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise DomainError("at least one weight must be positive")
    if abs(w.sum() - 1.0) > 1e-12:
        raise DomainError(f"weights must sum to 1, got {w.sum()!r}")
    return w


def _upper_count(col, p):
    """Number of entries <= col[p] in the sorted column (p = -1 means -inf)."""
    if p < 0:
        return 0
    return int(np.searchsorted(col, col[p], side="right"))


def balance(cache, alpha, weights=None, labels=None):
    """Weight-balanced critical values with empirical level just below alpha.

    Starts from the per-scale ``(1 - alpha * beta_k)`` order statistics and
    lowers one threshold at a time by one order statistic until the joint
    rejection rate would exceed ``alpha``. The threshold lowered is the one
    whose weighted rejection rate is smallest *after* the step; this keeps
    ``r_a / beta_a <= (r_b + 1/M) / beta_b`` for all pairs of scales even
    with unequal weights, and picks the same scale as the smallest current
    rate when weights are equal. Ties go to the lowest scale.

    Parameters
    ----------
    cache : SimulationCache
    alpha : float
        Level in (0, 1).
    weights : array_like, optional
        One weight per used scale, summing to 1. Defaults to equal weights.
    labels : sequence of int, optional
        Subset of the cache's scale labels to calibrate (the scales of the
        target sample size). Defaults to all cached scales.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    labels = tuple(cache.labels if labels is None else labels)
    pos = {lab: p for p, lab in enumerate(cache.labels)}
    try:
        rows = [pos[lab] for lab in labels]
    except KeyError as exc:
        raise DomainError(f"scale {exc.args[0]} is not in the cache") from None
    d = len(rows)
    beta = equal_weights(d) if weights is None else check_weights(weights, d)
    M = cache.M
    active = np.flatnonzero(beta > 0)

    point = np.full(d, M - 1, dtype=np.int64)
    upper = np.full(d, M, dtype=np.int64)
    hits = np.zeros(M, dtype=np.int64)
    for k in active:
        col = cache.sorted[rows[k]]
        point[k] = M - int(np.floor(alpha * beta[k] * M)) - 1
        upper[k] = _upper_count(col, point[k])
        hits[cache.order[rows[k], upper[k]:]] += 1
    joint = int(np.count_nonzero(hits))
    # largest hit count whose rate, evaluated as count / M, stays <= alpha
    limit = math.floor(alpha * M)
    while limit / M > alpha:
        limit -= 1
    while (limit + 1) / M <= alpha:
        limit += 1

    def next_ratio(k):
        if point[k] < 0:
            return np.inf
        return (M - _upper_count(cache.sorted[rows[k]], point[k] - 1)) / beta[k]

    ratio = np.full(d, np.inf)
    for k in active:
        ratio[k] = next_ratio(k)
    while True:
        k = int(np.argmin(ratio))
        if not np.isfinite(ratio[k]):
            break
        new_point = point[k] - 1
        new_upper = _upper_count(cache.sorted[rows[k]], new_point)
        fresh = cache.order[rows[k], new_upper:upper[k]]
        joint_new = joint + int(np.count_nonzero(hits[fresh] == 0))
        if joint_new > limit:
            break
        hits[fresh] += 1
        joint = joint_new
        point[k], upper[k] = new_point, new_upper
        ratio[k] = next_ratio(k)

    q = np.full(d, np.inf)
    for k in active:
        q[k] = cache.sorted[rows[k], point[k]] if point[k] >= 0 else -np.inf
    return CriticalValues(q, float(alpha), beta, labels, cache.kind, M, cache.seed, cache.n_sim, cache.rng_id)


def empirical_level(cache, q, labels=None):
    """Joint and per-scale empirical rejection rates of thresholds ``q``."""
    labels = tuple(cache.labels if labels is None else labels)
    pos = {lab: p for p, lab in enumerate(cache.labels)}
    raw = cache.raw()[:, [pos[lab] for lab in labels]]
    exceed = raw > np.asarray(q, dtype=float)
    return float(exceed.any(axis=1).mean()), exceed.mean(axis=0)


def store_cache(cache, path):
    """Write ``cache`` atomically (temporary file, then rename)."""
    header = {
        "format_version": FORMAT_VERSION,
        "n_sim": cache.n_sim,
        "M": cache.M,
        "seed": cache.seed,
        "rng": cache.rng_id,
        "kind": cache.kind,
        "d": cache.d,
        "labels": list(cache.labels),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
            fh.write(blob)
            fh.write(np.ascontiguousarray(cache.sorted, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(cache.order, dtype="<i8").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_cache(path):
    data = Path(path).read_bytes()
    fixed = len(_MAGIC) + 8
    if len(data) < fixed or data[: len(_MAGIC)] != _MAGIC:
        raise CacheCorruptError(f"{path}: not a critical-value cache")
    version, hlen = struct.unpack("<II", data[len(_MAGIC):fixed])
    if version != FORMAT_VERSION:
        raise CacheVersionError(f"{path}: cache format version {version}, expected {FORMAT_VERSION}")
    try:
        header = json.loads(data[fixed:fixed + hlen].decode("utf-8"))
        M, d = int(header["M"]), int(header["d"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise CacheCorruptError(f"{path}: unreadable header ({exc})") from None
    body = fixed + hlen
    if len(data) != body + 16 * M * d:
        raise CacheCorruptError(f"{path}: expected {body + 16 * M * d} bytes, found {len(data)}")
    sorted_ = np.frombuffer(data, dtype="<f8", count=M * d, offset=body).reshape(d, M).astype(float)
    order = np.frombuffer(data, dtype="<i8", count=M * d, offset=body + 8 * M * d).reshape(d, M).astype(np.int64)
    return SimulationCache(int(header["n_sim"]), M, int(header["seed"]), header["kind"],
                           tuple(header["labels"]), sorted_, order, header["rng"])


def cache_path(cache_dir, kind, n_sim, M, seed, rng_id=RNG_ID):
    kind = canonical_kind(kind)
    return Path(cache_dir) / f"{kind}_n{n_sim}_M{M}_{rng_id}_seed{seed}.hsmcv"


@lru_cache(maxsize=16)
def _simulate_memo(n_sim, kind, M, seed):
    return simulate_statistics(n_sim, kind, M, seed)


def get_cache(n, kind="dyadic-partition", M=DEFAULT_M, seed=DEFAULT_SEED, cache_dir=None):
    """Load the simulation for ``n`` from ``cache_dir`` or simulate and persist it."""
    kind = canonical_kind(kind)
    n_sim = next_power_of_two(n)
    if cache_dir is None:
        return _simulate_memo(n_sim, kind, int(M), int(seed))
    path = cache_path(cache_dir, kind, n_sim, M, seed)
    if path.exists():
        return load_cache(path)
    cache = _simulate_memo(n_sim, kind, int(M), int(seed))
    store_cache(cache, path)
    return cache


def critical_values(n, alpha, weights=None, kind="dyadic-partition", M=DEFAULT_M,
                    seed=DEFAULT_SEED, cache_dir=None):
    """Critical values for sample size ``n``, calibrated on the scales present at n."""
    cache = get_cache(n, kind, M, seed, cache_dir)
    return balance(cache, alpha, weights, labels=build(n, kind).labels)
