"""Multiscale change-point estimation under heterogeneous gaussian noise.

Typical use::

    from hsmuce import fit_hsmuce
    result = fit_hsmuce(y, alpha=0.1)
    result.k_hat, result.change_indices, result.cis
"""

from .critical_values import (
    CriticalValues,
    SimulationCache,
    balance,
    critical_values,
    load_cache,
    simulate_statistics,
    store_cache,
)
from .errors import (
    CacheCorruptError,
    CacheError,
    CacheVersionError,
    DomainError,
    NumericInputError,
    ResourceError,
    ScenarioError,
)
from .estimator import FitResult, compute_bounds, confidence_band, fit, left_right_limits
from .intervals import IntervalSystem, build
from .multiscale import local_statistic, scale_maxima, test_candidate
from .special import chi2_cdf, f_cdf, f_quantile, gaussian_cdf
from .stepfn import StepFn

__version__ = "0.1.0"


def fit_hsmuce(y, alpha=0.1, weights=None, kind="dyadic-partition", M=10_000, seed=0, cache_dir=None):
    """Fit with critical values simulated (or loaded from ``cache_dir``) for ``len(y)``."""
    system = build(len(y), kind)
    cv = critical_values(len(y), alpha, weights, kind, M, seed, cache_dir)
    return fit(y, system, cv)


__all__ = [
    "CriticalValues", "SimulationCache", "balance", "critical_values", "load_cache",
    "simulate_statistics", "store_cache", "CacheCorruptError", "CacheError", "CacheVersionError",
    "DomainError", "NumericInputError", "ResourceError", "ScenarioError", "FitResult",
    "compute_bounds", "confidence_band", "fit", "left_right_limits", "IntervalSystem", "build",
    "local_statistic", "scale_maxima", "test_candidate", "chi2_cdf", "f_cdf", "f_quantile",
    "gaussian_cdf", "StepFn", "fit_hsmuce",
]
