"""Random test signals, error metrics and a batch experiment runner.

Random signals follow a fixed recipe: change locations uniform subject to a
minimal segment length, segment standard deviations ``2**U`` with ``U``
uniform on [-2, 2], and jump heights chosen so that every change has the same
detection difficulty ``C``.
"""

import configparser
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .critical_values import DEFAULT_M, DEFAULT_SEED, critical_values
from .errors import DomainError, ScenarioError
from .estimator import fit
from .intervals import build, canonical_kind
from .stepfn import StepFn

__all__ = [
    "Scenario",
    "Draw",
    "draw_scenario",
    "fpsle",
    "fnsle",
    "mise_miae",
    "MetricReport",
    "HSmuceMethod",
    "run_experiment",
    "read_config",
    "scenario_dict",
]

ERRORS = ("gaussian", "t3")
VARIANCES = ("paired", "constant", "fixed", "sinus", "linear", "blockwise")
MAX_TRIES = 100_000


@dataclass(frozen=True)
class Scenario:
    """Recipe for one family of test signals.

    ``lam_min`` is a fraction of the unit interval. With ``taus`` and
    ``means`` set the mean is fixed instead of random; ``sds`` fixes the
    segment standard deviations when ``variance == "fixed"``.
    """

    n: int
    K: int = 0
    C: float = 1.0
    lam_min: float = 0.0
    errors: str = "gaussian"
    variance: str = "paired"
    sd_level: float = 1.0
    taus: tuple | None = None
    means: tuple | None = None
    sds: tuple | None = None
    trend_a: float | None = None
    trend_b: float = 0.0
    trend_scaled: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.K < 0 or self.C <= 0:
            raise DomainError("need n >= 2, K >= 0 and C > 0")
        if self.lam_min * (self.K + 1) > 1:
            raise DomainError("lam_min * (K + 1) must not exceed 1")
        if self.errors not in ERRORS:
            raise DomainError(f"errors must be one of {ERRORS}")
        if self.variance not in VARIANCES:
            raise DomainError(f"variance must be one of {VARIANCES}")
        if (self.taus is None) != (self.means is None):
            raise DomainError("taus and means must be given together")
        if self.taus is not None and len(self.means) != len(self.taus) + 1:
            raise DomainError("need one more mean than change locations")
        if self.variance == "fixed" and (self.sds is None or len(self.sds) != self.segments):
            raise DomainError("variance 'fixed' needs one sd per segment")

    @property
    def segments(self):
        return (len(self.taus) if self.taus is not None else self.K) + 1


@dataclass(frozen=True, eq=False)
class Draw:
    mean: StepFn
    sd: np.ndarray = field(repr=False)
    sd_fn: StepFn | None
    signal: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)


def _draw_breaks(sc, rng):
    n, K = sc.n, sc.K
    min_len = max(1, math.ceil(sc.lam_min * n - 1e-9))
    for _ in range(MAX_TRIES):
        taus = np.sort(rng.uniform(0.0, 1.0, K))
        breaks = np.ceil(taus * n - 0.5).astype(np.int64) - 1
        sizes = np.diff(np.concatenate([[0], breaks, [n]]))
        if np.all(sizes >= min_len):
            return breaks
    raise ScenarioError(f"no change locations with minimal gap {sc.lam_min} after {MAX_TRIES} tries; "
                        "use a smaller lam_min")


def _sd_curve(mode, n):
    t = np.arange(1, n + 1) / n
    if mode == "sinus":
        return 1.0 + 0.5 * np.sin(20 * np.pi * t)
    if mode == "linear":
        # left-open pieces (0.1 i, 0.1 (i+1)]
        piece = np.ceil(10 * t - 1e-12) - 1
        return 0.5 + (10 * t - piece)
    block = (np.arange(n) // 100) % 2
    return np.where(block == 0, 0.5, 1.0)


def draw_scenario(sc, rng=None):
    """Draw one signal and its observations; ``rng`` defaults to one seeded by ``sc.seed``."""
    rng = np.random.default_rng(sc.seed) if rng is None else rng
    n = sc.n
    if sc.taus is not None:
        mean = StepFn.from_taus(n, sc.taus, sc.means)
        breaks = mean.breaks
    else:
        breaks = _draw_breaks(sc, rng)
    segs = len(breaks) + 1
    if sc.variance == "paired":
        s = 2.0 ** rng.uniform(-2.0, 2.0, segs)
    elif sc.variance == "constant":
        s = np.full(segs, float(sc.sd_level))
    elif sc.variance == "fixed":
        s = np.asarray(sc.sds, dtype=float)
    else:
        s = np.ones(segs)
    if sc.taus is None:
        gaps = np.diff(np.concatenate([[0], breaks, [n]])) / n
        m = np.zeros(segs)
        for k in range(1, segs):
            hard = min(gaps[k] / s[k] ** 2, gaps[k - 1] / s[k - 1] ** 2)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            m[k] = m[k - 1] + sign * math.sqrt(sc.C / n / hard)
        mean = StepFn(n, breaks, m)
    sd_fn = None
    if sc.variance in ("paired", "constant", "fixed"):
        sd_fn = StepFn(n, breaks, s)
        sd = sd_fn.sample()
    else:
        sd = _sd_curve(sc.variance, n)
    signal = mean.sample()
    if sc.trend_a is not None:
        i = np.arange(1, n + 1)
        wave = np.sin(sc.trend_a * np.pi * i)
        if sc.trend_scaled:
            prev = np.concatenate([[sd[0]], sd[:-1]])
            signal = signal + sc.trend_b * sd * wave + sc.trend_b * (sd - prev) * wave
        else:
            signal = signal + sc.trend_b * wave
    if sc.errors == "gaussian":
        eps = rng.standard_normal(n)
    else:
        eps = rng.standard_t(3, n) / math.sqrt(3.0)
    return Draw(mean, sd, sd_fn, signal, signal + sd * eps)


def _location_error(ref, est, n):
    """Sum over segments of ``est`` of the distances to the bracketing points of ``ref``.

    Distances are taken on the index scale ``tau * n``; locations on the
    grid ``i/n`` are snapped so that the result is exact for them.
    """

    def positions(taus):
        p = np.concatenate([[0.0], np.asarray(taus, dtype=float) * n, [float(n)]])
        near = np.rint(p)
        return np.where(np.abs(p - near) <= 1e-9 * n, near, p)

    ref, est = positions(ref), positions(est)
    mid = 0.5 * (est[:-1] + est[1:])
    l = np.searchsorted(ref, mid, side="left")
    total = np.abs(ref[l - 1] - est[:-1]) + np.abs(ref[l] - est[1:])
    return float(total.sum()) / (2 * max(len(est) - 2, 1))


def fpsle(taus, taus_hat, n):
    """False positive sensitive location error; ``K_hat = 0`` is normalized as ``K_hat = 1``."""
    return _location_error(taus, taus_hat, n)


def fnsle(taus, taus_hat, n):
    """False negative sensitive location error; ``K = 0`` is normalized as ``K = 1``."""
    return _location_error(taus_hat, taus, n)


def mise_miae(mu, mu_hat):
    """Exact integrals over [0, 1] of the squared and absolute difference."""
    edges = np.union1d(np.concatenate([[0.0, 1.0], mu.taus]), mu_hat.taus)
    width = np.diff(edges)
    left = edges[:-1]
    diff = mu(left) - mu_hat(left)
    return float(np.sum(width * diff ** 2)), float(np.sum(width * np.abs(diff)))


@dataclass
class MetricReport:
    """Sums over repetitions; averages are exposed as properties so reports merge exactly."""

    reps: int = 0
    k_diff: dict = field(default_factory=dict)
    abs_k_diff: float = 0.0
    fpsle: float = 0.0
    fnsle: float = 0.0
    mise: float = 0.0
    miae: float = 0.0

    def add(self, diff, fp, fn, se, ae):
        self.reps += 1
        self.k_diff[diff] = self.k_diff.get(diff, 0) + 1
        self.abs_k_diff += abs(diff)
        self.fpsle += fp
        self.fnsle += fn
        self.mise += se
        self.miae += ae

    def merge(self, other):
        out = MetricReport(self.reps + other.reps, dict(self.k_diff), self.abs_k_diff + other.abs_k_diff,
                           self.fpsle + other.fpsle, self.fnsle + other.fnsle,
                           self.mise + other.mise, self.miae + other.miae)
        for key, v in other.k_diff.items():
            out.k_diff[key] = out.k_diff.get(key, 0) + v
        return out

    def proportion(self, diff):
        return self.k_diff.get(diff, 0) / self.reps

    def proportion_where(self, pred):
        return sum(v for k, v in self.k_diff.items() if pred(k)) / self.reps

    def summary(self):
        r = self.reps
        return {
            "reps": r,
            "k_diff": {str(k): v / r for k, v in sorted(self.k_diff.items())},
            "mean_abs_k_diff": self.abs_k_diff / r,
            "FPSLE": self.fpsle / r,
            "FNSLE": self.fnsle / r,
            "MISE": self.mise / r,
            "MIAE": self.miae / r,
        }


class HSmuceMethod:
    """Plug-in wrapper: maps observations to a fitted step function."""

    def __init__(self, alpha=0.1, weights=None, kind="dyadic-partition", M=DEFAULT_M,
                 seed=DEFAULT_SEED, cache_dir=None):
        self.alpha = alpha
        self.weights = weights
        self.kind = canonical_kind(kind)
        self.M, self.seed, self.cache_dir = M, seed, cache_dir
        self._per_n = {}

    @property
    def name(self):
        return f"HS({self.alpha:g})"

    def _setup(self, n):
        if n not in self._per_n:
            cv = critical_values(n, self.alpha, self.weights, self.kind, self.M, self.seed, self.cache_dir)
            self._per_n[n] = (build(n, self.kind), cv)
        return self._per_n[n]

    def fit_result(self, y):
        system, cv = self._setup(len(y))
        return fit(y, system, cv)

    def __call__(self, y):
        return self.fit_result(y).fit


def repetition_rng(seed, rep):
    return np.random.default_rng([int(seed), int(rep)])


def run_experiment(sc, method, reps, start=0):
    """Fresh draw, fit and metrics for repetitions ``start .. start + reps - 1``.

    Repetition ``r`` draws from a generator seeded by ``(sc.seed, r)``, so
    disjoint index ranges can be run separately and merged.
    """
    report = MetricReport()
    for r in range(start, start + reps):
        draw = draw_scenario(sc, repetition_rng(sc.seed, r))
        est = method(draw.y)
        truth = draw.mean
        se, ae = mise_miae(truth, est)
        report.add(est.K - truth.K, fpsle(truth.taus, est.taus, sc.n),
                   fnsle(truth.taus, est.taus, sc.n), se, ae)
    return report


_METHOD_KEYS = {"alpha": float, "system": str, "M": int, "cv_seed": int, "weights": str, "reps": int}


def _parse_value(kind, text):
    if kind is bool:
        return text.strip().lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind == "floats":
        return tuple(float(v) for v in text.split(",") if v.strip())
    if kind == "optfloat":
        return None if text.strip().lower() in ("", "none") else float(text)
    return text.strip()


_SCENARIO_TYPES = {
    "n": int, "K": int, "C": float, "lam_min": float, "errors": str, "variance": str,
    "sd_level": float, "taus": "floats", "means": "floats", "sds": "floats",
    "trend_a": "optfloat", "trend_b": float, "trend_scaled": bool, "seed": int,
}


def read_config(text):
    """Parse ``key = value`` lines into a scenario and method settings.

    Scenario keys mirror :class:`Scenario` fields. Method keys are ``alpha``
    (comma-separated for several), ``system``, ``M``, ``cv_seed``,
    ``weights`` and ``reps``.
    """
    parser = configparser.ConfigParser(delimiters=("=", ":"), comment_prefixes=("#", ";"))
    parser.optionxform = str
    parser.read_string("[experiment]\n" + text)
    items = dict(parser["experiment"])
    unknown = set(items) - set(_SCENARIO_TYPES) - set(_METHOD_KEYS)
    if unknown:
        raise DomainError(f"unknown config keys: {sorted(unknown)}")
    scen = {k: _parse_value(_SCENARIO_TYPES[k], v) for k, v in items.items() if k in _SCENARIO_TYPES}
    scenario = Scenario(**scen)
    method = {
        "alphas": tuple(float(a) for a in items.get("alpha", "0.1").split(",")),
        "system": items.get("system", "dyadic-partition"),
        "M": int(items.get("M", DEFAULT_M)),
        "cv_seed": int(items.get("cv_seed", DEFAULT_SEED)),
        "weights": (tuple(float(w) for w in items["weights"].split(",")) if "weights" in items else None),
        "reps": int(items.get("reps", 100)),
    }
    return scenario, method


def scenario_dict(sc):
    """Plain ``dict`` of the scenario fields, suitable for JSON output."""
    return {f.name: getattr(sc, f.name) for f in fields(sc)}

