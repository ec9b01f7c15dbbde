"""Distribution functions used by the local test statistic and its calibration.

The central F distribution with (1, c) degrees of freedom is the null law of a
single-interval statistic of length ``c + 1``. Its CDF is evaluated through the
regularized incomplete beta function; the quantile is solved by a safeguarded
Newton iteration started from a closed-form bracket.
"""

import math

import numpy as np
from scipy import special as sp

from .errors import DomainError

__all__ = [
    "f_cdf",
    "f_sf",
    "f_pdf",
    "f_quantile",
    "f_quantile_bracket",
    "gaussian_cdf",
    "chi2_cdf",
]


def _check_dof(c):
    if not (isinstance(c, (int, np.integer)) and c >= 1):
        raise DomainError(f"degrees of freedom must be an integer >= 1, got {c!r}")


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


def f_cdf(x, c):
    """P(F_{1,c} <= x).

    Parameters
    ----------
    x : float or array_like
        Nonnegative evaluation point(s).
    c : int
        Denominator degrees of freedom, ``c >= 1``.
    """
    _check_dof(c)
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)) or np.any(xa < 0):
        raise DomainError("f_cdf requires x >= 0")
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(np.isinf(xa), 1.0, xa / (xa + c))
    out = sp.betainc(0.5, 0.5 * c, t)
    return _scalar_or_array(x, out)


def f_sf(x, c):
    """Upper tail P(F_{1,c} > x), accurate where the CDF is close to one."""
    _check_dof(c)
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)) or np.any(xa < 0):
        raise DomainError("f_sf requires x >= 0")
    # whichever of x/(x+c) and c/(x+c) is below 1/2 carries full precision
    with np.errstate(invalid="ignore", divide="ignore"):
        small = np.where(np.isinf(xa), 1.0, xa / (xa + c))
        large = np.where(np.isinf(xa), 0.0, c / (xa + c))
    out = np.where(small < 0.5, sp.betaincc(0.5, 0.5 * c, small), sp.betainc(0.5 * c, 0.5, large))
    return _scalar_or_array(x, out)


def f_pdf(x, c):
    """Density of F_{1,c}; infinite at 0 for every c."""
    _check_dof(c)
    x = float(x)
    if x < 0:
        raise DomainError("f_pdf requires x >= 0")
    if x == 0.0:
        return math.inf
    logf = (-0.5 * math.log(x) - 0.5 * (c + 1) * math.log1p(x / c)
            - 0.5 * math.log(c) - sp.betaln(0.5, 0.5 * c))
    return math.exp(logf)


def f_quantile_bracket(p, c):
    """Closed-form lower and upper bounds on the p-quantile of F_{1,c}."""
    _check_dof(c)
    base = -math.log1p(-p * p)
    lower = c * math.expm1(base / c)
    upper = c * math.expm1(2.0 * base / (c - 0.5))
    return lower, upper


def f_quantile(p, c, tol=1e-14, max_iter=200):
    """Inverse of :func:`f_cdf` in its first argument.

    Newton steps on ``f_cdf(x) - p`` are accepted only while they stay inside
    the current bracket; otherwise the bracket is bisected.
    """
    _check_dof(c)
    p = float(p)
    if not (0.0 <= p < 1.0):
        raise DomainError(f"p must lie in [0, 1), got {p!r}")
    if p == 0.0:
        return 0.0
    lo, hi = f_quantile_bracket(p, c)
    lo = max(0.0, lo * (1 - 1e-12))
    hi = hi * (1 + 1e-12)
    # the bracket is a theorem, but guard against rounding at the edges
    while f_cdf(lo, c) > p:
        lo *= 0.5
    while f_cdf(hi, c) < p:
        hi = 2.0 * hi + 1.0
    # near one the complement carries the precision
    use_sf = p > 0.5
    target = 1.0 - p if use_sf else p

    def resid(x):
        return target - f_sf(x, c) if use_sf else f_cdf(x, c) - target

    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        r = resid(x)
        if abs(r) <= tol * max(target, 1e-300) or hi - lo <= 4e-16 * hi:
            break
        if r > 0:
            hi = x
        else:
            lo = x
        d = f_pdf(x, c)
        step = x - r / d if d > 0 and math.isfinite(d) else math.nan
        x = step if lo < step < hi else 0.5 * (lo + hi)
    return x


def gaussian_cdf(x):
    """Standard normal CDF."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)):
        raise DomainError("gaussian_cdf is undefined for NaN")
    return _scalar_or_array(x, sp.ndtr(xa))


def chi2_cdf(x, k):
    """CDF of the chi-square distribution with k degrees of freedom."""
    _check_dof(k)
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)) or np.any(xa < 0):
        raise DomainError("chi2_cdf requires x >= 0")
    return _scalar_or_array(x, sp.gammainc(0.5 * k, 0.5 * xa))
