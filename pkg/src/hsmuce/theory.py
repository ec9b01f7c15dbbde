"""Finite-sample guarantees as closed-form calculators.

Each bound is returned only inside its stated hypotheses; otherwise an
:class:`Unmet` marker carrying the reason is returned.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "Unmet",
    "ScenarioBounds",
    "UnderestimationBound",
    "overestimation_bound",
    "overestimation_expectation",
    "detection_factor",
    "underestimation_eta",
    "underestimation_eta_per_change",
    "tune_alpha",
    "critval_upper_bound",
    "deviation_bound",
]


@dataclass(frozen=True)
class Unmet:
    """Marker for a bound whose hypotheses do not hold."""

    reason: str

    def __bool__(self):
        return False


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")


def overestimation_bound(k, alpha):
    """P(K_hat > K + 2k) <= alpha^(k+1)."""
    _check_alpha(alpha)
    if k < 0:
        raise DomainError("k must be >= 0")
    return alpha ** (k + 1)


def overestimation_expectation(alpha):
    """E[(K_hat - K)_+] <= 2 alpha / (1 - alpha)."""
    _check_alpha(alpha)
    return 2 * alpha / (1 - alpha)


@dataclass(frozen=True)
class ScenarioBounds:
    """Signal class summary: minimal standardized jump ``delta`` and minimal segment length ``lam``.

    ``beta`` is the weight of the scale ``floor(log2(n * lam / 4))``.
    """

    n: int
    delta: float
    lam: float
    K: int
    alpha: float
    beta: float

    @property
    def scale(self):
        return math.floor(math.log2(self.n * self.lam / 4))


@dataclass(frozen=True)
class UnderestimationBound:
    eta: float
    prob_bound: float
    expectation_bound: float


def detection_factor(n_lam, snr2, log_arg):
    """``[1 - 3 exp(-(sqrt(n_lam snr2 / 32) - sqrt(16 log(log_arg)))_+^2 / 48)]_+``."""
    gap = math.sqrt(n_lam * snr2 / 32) - math.sqrt(16 * math.log(log_arg))
    gap = max(gap, 0.0)
    return max(1.0 - 3.0 * math.exp(-gap * gap / 48), 0.0)


def _segment_condition(n, lam, alpha, beta):
    if n * lam < 32:
        return f"n*lambda = {n * lam:g} < 32"
    if beta <= 0:
        return "weight of the detecting scale is zero"
    if math.log(8 / (lam * alpha * beta)) / (n * lam) > 1 / 512:
        return "(n*lambda)^-1 log(8/(lambda*alpha*beta)) exceeds 1/512"
    return None


def underestimation_eta(sb):
    """Detection bound eta with P(K_hat < K) <= 1 - eta^K and E[(K - K_hat)_+] <= K (1 - eta)."""
    _check_alpha(sb.alpha)
    if sb.delta <= 0 or not (0 < sb.lam <= 1):
        raise DomainError("need delta > 0 and 0 < lambda <= 1")
    reason = _segment_condition(sb.n, sb.lam, sb.alpha, sb.beta)
    if reason:
        return Unmet(reason)
    eta = detection_factor(sb.n * sb.lam, sb.delta ** 2, 8 / (sb.lam * sb.alpha * sb.beta)) ** 2
    return UnderestimationBound(eta, 1 - eta ** sb.K, sb.K * (1 - eta))


def _weight_at(weights, label):
    if callable(weights):
        return float(weights(label))
    if isinstance(weights, dict):
        return float(weights.get(label, 0.0))
    w = np.asarray(weights, dtype=float)
    return float(w[label - 1]) if 1 <= label <= len(w) else 0.0


def underestimation_eta_per_change(n, lams, deltas, sigmas, alpha, weights):
    """Per-change detection bounds eta_1..eta_K.

    Parameters
    ----------
    lams : sequence of float
        Segment lengths lambda_0..lambda_K (as fractions of [0, 1]).
    deltas : sequence of float
        Absolute jumps delta_1..delta_K.
    sigmas : sequence of float
        Segment standard deviations sigma_0..sigma_K.
    weights : sequence, dict or callable
        Scale weight lookup by dyadic scale label (1-based).

    Returns an array with P(K_hat < K) <= 1 - prod(eta) and
    E[(K - K_hat)_+] <= sum(1 - eta), or :class:`Unmet`.
    """
    _check_alpha(alpha)
    lams = np.asarray(lams, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    K = len(deltas)
    if len(lams) != K + 1 or len(sigmas) != K + 1:
        raise DomainError("need K+1 segment lengths and standard deviations for K jumps")
    scales = [math.floor(math.log2(n * lam / 4)) if n * lam >= 4 else 0 for lam in lams]
    betas = [_weight_at(weights, k) for k in scales]
    for j in range(K + 1):
        reason = _segment_condition(n, lams[j], alpha, betas[j])
        if reason:
            return Unmet(f"segment {j}: {reason}")
    eta = np.empty(K)
    for j in range(1, K + 1):
        left = detection_factor(n * lams[j - 1], (deltas[j - 1] / sigmas[j - 1]) ** 2,
                                8 / (lams[j - 1] * alpha * betas[j - 1]))
        right = detection_factor(n * lams[j], (deltas[j - 1] / sigmas[j]) ** 2,
                                 8 / (lams[j] * alpha * betas[j]))
        eta[j - 1] = left * right
    return eta


def tune_alpha(gamma, sb, grid):
    """Grid minimizer of ``gamma * alpha + (1 - gamma) * (1 - eta(alpha)^K)``.

    ``sb.alpha`` is ignored. Where the detection bound's hypotheses fail, the
    underestimation term is taken as 1 (no guarantee). Ties go to the smaller
    alpha.
    """
    if not (0.0 < gamma <= 1.0):
        raise DomainError("gamma must lie in (0, 1]")
    grid = np.sort(np.asarray(grid, dtype=float))
    if len(grid) == 0 or grid[0] <= 0 or grid[-1] >= 1:
        raise DomainError("alpha grid must be a nonempty subset of (0, 1)")
    best, best_val = None, math.inf
    for a in grid:
        res = underestimation_eta(ScenarioBounds(sb.n, sb.delta, sb.lam, sb.K, float(a), sb.beta))
        under = res.prob_bound if res else 1.0
        val = gamma * a + (1 - gamma) * under
        if val < best_val:
            best, best_val = float(a), val
    return best


def critval_upper_bound(n, k, alpha, beta):
    """8 log(n / (2^k alpha beta)) for scales k >= 2 meeting the smallness condition."""
    _check_alpha(alpha)
    if k < 2:
        return Unmet("bound holds only for scales k >= 2")
    if beta <= 0:
        return Unmet("scale has weight zero")
    log_term = math.log(n / (2 ** k * alpha * beta))
    if log_term / 2 ** k > 0.5:
        return Unmet("2^-k log(n/(2^k alpha beta)) exceeds 1/2")
    return 8 * log_term


def deviation_bound(n, delta, q):
    """2 exp(-(sqrt(n) delta - sqrt(2q))_+^2 / 48), valid for n >= 4 and q/n <= 1/8.

    Bounds the probability that a length-``n`` interval with standardized mean
    shift ``delta`` still yields a statistic ``<= q`` for the unshifted value.
    """
    if n < 4:
        return Unmet("needs n >= 4")
    if q / n > 1 / 8:
        return Unmet("needs q/n <= 1/8")
    gap = max(math.sqrt(n) * delta - math.sqrt(2 * q), 0.0)
    return 2 * math.exp(-gap * gap / 48)
