"""
Closed-form statistics of the cumulative gain-loss G_k = V(k) - V0 under
i.i.d. returns with mean mu and standard deviation sigma.

With L = 1 + w(mu - eps) and S = 1 - w(mu + eps):

    E[G_k] = V0 (alpha L^k + (1 - alpha) S^k - 1)

The variance is built from E[R_L^2] = (L^2 + w^2 sigma^2)^k,
E[R_S^2] = (S^2 + w^2 sigma^2)^k and E[R_L R_S] = (L S - w^2 sigma^2)^k.

All arithmetic runs in numpy longdouble; "power minus one" differences go
through log1p/expm1 so that small gains keep their relative accuracy.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from core import (AnalyticsInternalError, InvalidArgumentError, PolicyParams,
                  ReturnStats)

_EXT = np.longdouble
_ONE = _EXT(1)
# Negative variances within this fraction of the largest term are rounding.
_VARIANCE_CLAMP = 1e-12


@dataclass(frozen=True)
class AnalyticsReport:
    expected_gain: float
    variance: float
    std: float
    mu_plus: Optional[float]
    mu_minus: Optional[float]
    mu_zero: Optional[float]
    k: int
    policy: PolicyParams
    stats: ReturnStats

    def to_dict(self) -> dict:
        return {
            'expected_gain': self.expected_gain,
            'variance': self.variance,
            'std': self.std,
            'mu_plus': self.mu_plus,
            'mu_minus': self.mu_minus,
            'mu_zero': self.mu_zero,
            'k': self.k,
            'policy': self.policy.to_dict(),
            'stats': self.stats.to_dict(),
        }


def _power(base, k: int):
    """base**k by repeated squaring in extended precision."""
    result = _ONE
    base = _EXT(base)
    while k:
        if k & 1:
            result = result * base
        base = base * base
        k >>= 1
    return result


def _power_minus_one(increment, k: int):
    """(1 + increment)**k - 1 without cancellation when increment is small."""
    increment = _EXT(increment)
    if increment > -_ONE:
        return np.expm1(_EXT(k) * np.log1p(increment))
    return _power(_ONE + increment, k) - _ONE


def _check_k(k: int, minimum: int = 0):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < minimum:
        raise InvalidArgumentError(f"k must be an integer >= {minimum}, got {k!r}")


def _check_stats(stats: ReturnStats):
    if not (math.isfinite(stats.mu) and stats.mu > -1.0):
        raise InvalidArgumentError(f"mu must be finite and > -1, got {stats.mu}")
    if not (math.isfinite(stats.sigma) and stats.sigma >= 0.0):
        raise InvalidArgumentError(f"sigma must be finite and >= 0, got {stats.sigma}")


def _require_interior_alpha(p: PolicyParams, what: str):
    if not 0.0 < p.alpha < 1.0:
        raise InvalidArgumentError(f"{what} needs alpha in (0, 1), got {p.alpha}")
    if not p.w > 0.0:
        raise InvalidArgumentError(f"{what} needs w > 0, got {p.w}")


def _normalized_gain(alpha, w, mu, eps, k: int):
    long_part = _power_minus_one(_EXT(w) * (_EXT(mu) - _EXT(eps)), k)
    short_part = _power_minus_one(-_EXT(w) * (_EXT(mu) + _EXT(eps)), k)
    return _EXT(alpha) * long_part + (_ONE - _EXT(alpha)) * short_part


def expected_gain(p: PolicyParams, stats: ReturnStats, k: int) -> float:
    """Expected cumulative gain-loss after k periods."""
    _check_k(k)
    _check_stats(stats)
    if k == 0:
        return 0.0
    return float(_EXT(p.v0) * _normalized_gain(p.alpha, p.w, stats.mu, p.eps, k))


def expected_gain_asymptotes(p: PolicyParams, stats: ReturnStats, k: int) -> Tuple[float, float]:
    """The two lower bounds alpha L^k - 1 and (1 - alpha) S^k - 1 of E[G_k]/V0."""
    _check_k(k)
    _check_stats(stats)
    long_base = _ONE + _EXT(p.w) * (_EXT(stats.mu) - _EXT(p.eps))
    short_base = _ONE - _EXT(p.w) * (_EXT(stats.mu) + _EXT(p.eps))
    return (float(_EXT(p.alpha) * _power(long_base, k) - _ONE),
            float((_ONE - _EXT(p.alpha)) * _power(short_base, k) - _ONE))


def second_moment_terms(p: PolicyParams, stats: ReturnStats, k: int) -> Tuple[float, float, float]:
    """E[R_L^2], E[R_S^2] and E[R_L R_S] for growth factors over k periods."""
    _check_k(k)
    _check_stats(stats)
    w, mu, eps, sigma = (_EXT(v) for v in (p.w, stats.mu, p.eps, stats.sigma))
    long_base = _ONE + w * (mu - eps)
    short_base = _ONE - w * (mu + eps)
    spread = w * w * sigma * sigma
    return (float(_power(long_base * long_base + spread, k)),
            float(_power(short_base * short_base + spread, k)),
            float(_power(long_base * short_base - spread, k)))


def _excess_power(base, spread, k: int):
    """(base + spread)^k - base^k, i.e. the variance or covariance part."""
    if base > 0:
        return _power(base, k) * _power_minus_one(spread / base, k)
    return _power(base + spread, k) - _power(base, k)


def variance_gain(p: PolicyParams, stats: ReturnStats, k: int) -> float:
    """Variance of the cumulative gain-loss after k periods, in units of V0^2.

    var = alpha^2 var(R_L) + (1-alpha)^2 var(R_S) + 2 alpha (1-alpha) cov(R_L, R_S),
    which expands to the six-term moment expression.
    """
    _check_k(k)
    _check_stats(stats)
    if k == 0:
        return 0.0
    alpha, w, mu, eps, sigma = (_EXT(v) for v in (p.alpha, p.w, stats.mu, p.eps, stats.sigma))
    long_base = _ONE + w * (mu - eps)
    short_base = _ONE - w * (mu + eps)
    spread = w * w * sigma * sigma

    terms = (
        alpha * alpha * _excess_power(long_base * long_base, spread, k),
        (_ONE - alpha) ** 2 * _excess_power(short_base * short_base, spread, k),
        2 * alpha * (_ONE - alpha) * _excess_power(long_base * short_base, -spread, k),
    )
    variance = terms[0] + terms[1] + terms[2]
    if variance < 0:
        scale = max(abs(t) for t in terms)
        if -variance <= _VARIANCE_CLAMP * scale:
            variance = _EXT(0)
        else:
            raise AnalyticsInternalError(
                f"negative variance {float(variance):.6g} for policy={p.to_dict()}, stats={stats.to_dict()}, k={k}")
    return float(_EXT(p.v0) * _EXT(p.v0) * variance)


def std_gain(p: PolicyParams, stats: ReturnStats, k: int) -> float:
    return math.sqrt(variance_gain(p, stats, k))


def critical_mus(p: PolicyParams, k: int) -> Tuple[float, float]:
    """(mu_minus, mu_plus): drift thresholds beyond which E[G_k] > 0.

    Roots of the two asymptotes; a sufficient, conservative criterion.
    """
    _check_k(k, minimum=1)
    _require_interior_alpha(p, "critical_mus")
    alpha, w, eps, kk = _EXT(p.alpha), _EXT(p.w), _EXT(p.eps), _EXT(k)
    mu_plus = np.expm1(-np.log(alpha) / kk) / w + eps
    mu_minus = -np.expm1(-np.log1p(-alpha) / kk) / w - eps
    return float(mu_minus), float(mu_plus)


def feasible_mu_range(p: PolicyParams) -> Tuple[float, float]:
    """Open interval of drifts where mu > -1 and both bases L, S stay positive."""
    if not p.w > 0.0:
        raise InvalidArgumentError(f"feasible_mu_range needs w > 0, got {p.w}")
    return max(-1.0, p.eps - 1.0 / p.w), 1.0 / p.w - p.eps


def _stationary_mu(p: PolicyParams, k: int) -> float:
    alpha, w, eps = _EXT(p.alpha), _EXT(p.w), _EXT(p.eps)
    exponent = np.log((_ONE - alpha) / alpha) / _EXT(k - 1)
    a_minus_one = np.expm1(exponent)
    return float(a_minus_one * (_ONE - w * eps) / (w * (a_minus_one + 2)))


def minimizing_mu(p: PolicyParams, k: int) -> float:
    """Drift mu0 at which E[G_k] is smallest.

    Solves alpha L^(k-1) = (1 - alpha) S^(k-1), i.e. L/S = A with
    A = ((1 - alpha)/alpha)^(1/(k-1)), giving
    mu0 = (A - 1)(1 - w eps) / (w (A + 1)).  alpha = 1/2 gives mu0 = 0.

    Raises InvalidArgumentError when the root falls outside
    feasible_mu_range(p): E[G_k] then has no interior minimum.
    """
    _check_k(k, minimum=2)
    _require_interior_alpha(p, "minimizing_mu")
    mu0 = _stationary_mu(p, k)
    low, high = feasible_mu_range(p)
    if not low < mu0 < high:
        raise InvalidArgumentError(
            f"no interior minimum: stationary drift {mu0:.6g} outside ({low:.6g}, {high:.6g}) "
            f"for alpha={p.alpha}, w={p.w}, k={k}")
    return mu0


def second_derivative_in_w(p: PolicyParams, stats: ReturnStats, k: int, w: float) -> float:
    """d^2 E[G_k] / dw^2 at weight w (other parameters from p)."""
    _check_k(k)
    _check_stats(stats)
    if k < 2:
        return 0.0
    alpha, ww, mu, eps = _EXT(p.alpha), _EXT(w), _EXT(stats.mu), _EXT(p.eps)
    long_base = _ONE + ww * (mu - eps)
    short_base = _ONE - ww * (mu + eps)
    curvature = (alpha * _power(long_base, k - 2) * (mu - eps) ** 2
                 + (_ONE - alpha) * _power(short_base, k - 2) * (mu + eps) ** 2)
    return float(_EXT(p.v0) * _EXT(k) * _EXT(k - 1) * curvature)


def sign_change_grid(p: PolicyParams, k: int, mus: Iterable[float]) -> List[Tuple[float, float]]:
    """Adjacent grid drifts between which E[G_k] changes sign.

    The exact zero crossings have no closed form; this brackets them.
    """
    mus = sorted(mus)
    gains = [expected_gain(p, ReturnStats(mu=m, sigma=0.0), k) for m in mus]
    brackets = []
    for (m0, g0), (m1, g1) in zip(zip(mus, gains), zip(mus[1:], gains[1:])):
        if (g0 > 0) != (g1 > 0):
            brackets.append((m0, m1))
    return brackets


def report(p: PolicyParams, stats: ReturnStats, k: int) -> AnalyticsReport:
    """Full AnalyticsReport; critical drifts are None where undefined.

    mu_zero is also None when the stationary drift is infeasible.
    """
    variance = variance_gain(p, stats, k)
    mu_minus = mu_plus = mu_zero = None
    if 0.0 < p.alpha < 1.0 and p.w > 0.0:
        if k >= 1:
            mu_minus, mu_plus = critical_mus(p, k)
        if k >= 2:
            low, high = feasible_mu_range(p)
            candidate = _stationary_mu(p, k)
            if low < candidate < high:
                mu_zero = candidate
    return AnalyticsReport(
        expected_gain=expected_gain(p, stats, k),
        variance=variance,
        std=math.sqrt(variance),
        mu_plus=mu_plus,
        mu_minus=mu_minus,
        mu_zero=mu_zero,
        k=k,
        policy=p,
        stats=stats,
    )
