"""
Domain types, the admissible weight set and policy validation for the
double linear trading policy.

All types are frozen dataclasses; every function here is pure.
"""

import math
from dataclasses import dataclass, field
from typing import List


class DoubleLinearError(Exception):
    """Base class for every error raised by this project."""


class InvalidArgumentError(DoubleLinearError, ValueError):
    """A numeric argument is non-finite or outside its documented range."""


class PolicyValidationError(DoubleLinearError, ValueError):
    """A policy failed validation; carries the full violation list."""

    def __init__(self, result: 'ValidationResult'):
        self.result = result
        super().__init__("; ".join(v.message for v in result.violations))


class PriceParseError(DoubleLinearError, ValueError):
    """A price file row could not be parsed."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class PriceValidationError(DoubleLinearError, ValueError):
    """A price series parsed but violates a PriceSeries invariant."""


class InvariantViolationError(DoubleLinearError):
    """A simulated path broke survivability or cash-financing."""

    def __init__(self, report, message: str = None):
        self.report = report
        super().__init__(message or f"{len(report.violations)} invariant violation(s); first: {report.violations[0]}")


class AnalyticsInternalError(DoubleLinearError):
    """A closed form produced a value its derivation rules out."""


@dataclass(frozen=True)
class ReturnBounds:
    """Configured support [x_min, x_max] of the per-period return."""
    x_min: float
    x_max: float


@dataclass(frozen=True)
class PolicyParams:
    """One double linear trading configuration (alpha, w, eps, v0) plus return bounds."""
    alpha: float
    w: float
    eps: float
    v0: float
    bounds: ReturnBounds

    @property
    def w_max(self) -> float:
        return max_weight(self.eps, self.bounds.x_max)

    def with_weight(self, w: float) -> 'PolicyParams':
        return PolicyParams(alpha=self.alpha, w=w, eps=self.eps, v0=self.v0, bounds=self.bounds)

    def with_alpha(self, alpha: float) -> 'PolicyParams':
        return PolicyParams(alpha=alpha, w=self.w, eps=self.eps, v0=self.v0, bounds=self.bounds)

    def with_eps(self, eps: float) -> 'PolicyParams':
        return PolicyParams(alpha=self.alpha, w=self.w, eps=eps, v0=self.v0, bounds=self.bounds)

    def to_dict(self) -> dict:
        return {
            'alpha': self.alpha,
            'w': self.w,
            'eps': self.eps,
            'v0': self.v0,
            'x_min': self.bounds.x_min,
            'x_max': self.bounds.x_max,
        }


@dataclass(frozen=True)
class ReturnStats:
    """Per-period mean and standard deviation of the return."""
    mu: float
    sigma: float

    @property
    def second_moment(self) -> float:
        """E[X^2] = sigma^2 + mu^2."""
        return self.sigma * self.sigma + self.mu * self.mu

    def to_dict(self) -> dict:
        return {'mu': self.mu, 'sigma': self.sigma}


@dataclass(frozen=True)
class Violation:
    """One broken invariant: which one, and a readable message."""
    invariant: str
    message: str


@dataclass(frozen=True)
class ValidationResult:
    violations: List[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def names(self) -> List[str]:
        return [v.invariant for v in self.violations]

    def raise_if_invalid(self):
        if not self.valid:
            raise PolicyValidationError(self)


def _finite(*values) -> bool:
    return all(isinstance(v, (int, float)) and math.isfinite(v) for v in values)


def max_weight(eps: float, x_max: float) -> float:
    """Upper end of the admissible weight set W = [0, w_max].

    w_max = min{1/(1+eps), 1/(x_max+eps)}; keeps both accounts solvent
    for every return in the configured support.
    """
    if not _finite(eps, x_max):
        raise InvalidArgumentError(f"eps and x_max must be finite, got eps={eps}, x_max={x_max}")
    if not 0.0 <= eps <= 1.0:
        raise InvalidArgumentError(f"eps must lie in [0, 1], got {eps}")
    if x_max <= 0.0:
        raise InvalidArgumentError(f"x_max must be positive, got {x_max}")
    return min(1.0 / (1.0 + eps), 1.0 / (x_max + eps))


def validate_policy(p: PolicyParams) -> ValidationResult:
    """Check every PolicyParams invariant; never raises."""
    violations = []

    def reject(invariant, message):
        violations.append(Violation(invariant, message))

    if not _finite(p.alpha, p.w, p.eps, p.v0, p.bounds.x_min, p.bounds.x_max):
        reject('finite', "all policy parameters must be finite numbers")
        return ValidationResult(violations)

    if not 0.0 <= p.alpha <= 1.0:
        reject('alpha_range', f"alpha={p.alpha} out of [0, 1]")
    if not 0.0 <= p.eps <= 1.0:
        reject('eps_range', f"eps={p.eps} out of [0, 1]")
    if p.v0 <= 0.0:
        reject('v0_positive', f"v0={p.v0} must be > 0")
    if not -1.0 < p.bounds.x_min < 0.0:
        reject('x_min_range', f"x_min={p.bounds.x_min} out of (-1, 0)")
    if p.bounds.x_max <= 0.0:
        reject('x_max_range', f"x_max={p.bounds.x_max} must be > 0")
    if p.w < 0.0:
        reject('w_range', f"w={p.w} must be >= 0")
    elif 0.0 <= p.eps <= 1.0 and p.bounds.x_max > 0.0:
        w_max = max_weight(p.eps, p.bounds.x_max)
        if p.w > w_max:
            reject('w_range', f"w={p.w} exceeds w_max={w_max:.17g}")

    return ValidationResult(violations)


def require_valid(p: PolicyParams) -> PolicyParams:
    """Raise PolicyValidationError unless p is admissible."""
    validate_policy(p).raise_if_invalid()
    return p


def bounds_violations(returns, bounds: ReturnBounds) -> List[int]:
    """Indices of returns outside [x_min, x_max] (closed interval)."""
    return [i for i, x in enumerate(returns) if x < bounds.x_min or x > bounds.x_max]
