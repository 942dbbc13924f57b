"""
Exact per-path evolution of the long and short accounts.

Accounts follow the recursive form

    V_L(k+1) = (1 + r) V_L(k) + (X(k) - eps - r) pi_L(k)
    V_S(k+1) = V_S(k) + X(k) pi_S(k) - eps |pi_S(k)|

with pi_L = w V_L and pi_S = -w V_S.  r = 0 is the plain cash case.
The product form is only used as a cross-check (product_form_value).

Scalar paths (run_path) and vectorised batches (evolve_batch) apply the
same float operations in the same order, so a path simulated either way
is bit-identical.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from core import InvalidArgumentError, PolicyParams, bounds_violations

logger = logging.getLogger(__name__)

# Relative slack per step for comparisons between recursively accumulated values
# and closed-form bounds.
_ROUNDING_SLACK = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class AccountState:
    v_long: float
    v_short: float
    step: int = 0

    @property
    def total(self) -> float:
        return self.v_long + self.v_short


@dataclass(frozen=True)
class Trajectory:
    """Per-step record of one path: states[k], controls[k] and G_k."""
    states: Tuple[AccountState, ...]
    controls: Tuple[Tuple[float, float], ...]
    gain_loss: Tuple[float, ...]
    returns: Tuple[float, ...]
    v0: float

    def __len__(self):
        return len(self.states)

    @property
    def final_value(self) -> float:
        return self.states[-1].total

    @property
    def final_gain(self) -> float:
        return self.gain_loss[-1]

    def totals(self) -> np.ndarray:
        return np.array([s.total for s in self.states])


@dataclass(frozen=True)
class StepViolation:
    step: int
    invariant: str
    value: float
    limit: float
    path: Optional[int] = None

    def __str__(self):
        where = f"path {self.path} " if self.path is not None else ""
        return f"{where}step {self.step}: {self.invariant} (value={self.value:.17g}, limit={self.limit:.17g})"


@dataclass
class InvariantReport:
    violations: List[StepViolation] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    out_of_bounds_steps: List[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


ControlLaw = Callable[[AccountState, PolicyParams], Tuple[float, float]]


def initial_state(p: PolicyParams) -> AccountState:
    """(alpha v0, (1 - alpha) v0); the short side is v0 - V_L(0) so G_0 is exactly 0."""
    v_long = p.alpha * p.v0
    return AccountState(v_long=v_long, v_short=p.v0 - v_long, step=0)


def controls(s: AccountState, p: PolicyParams) -> Tuple[float, float]:
    """Double linear feedback: (w V_L, -w V_S)."""
    return p.w * s.v_long, -(p.w * s.v_short)


def sls_controls(s: AccountState, p: PolicyParams, pi0: float) -> Tuple[float, float]:
    """Classical simultaneous long-short law.

    pi_L = pi0 + w (V_L - V_L(0)),  pi_S = -pi0 - w (V_S - V_S(0)),
    evaluated as w V + (pi0 - w V(0)) so that with alpha = 1/2 and
    pi0 = w v0 / 2 the correction term is exactly zero.
    """
    start = initial_state(p)
    pi_long = p.w * s.v_long + (pi0 - p.w * start.v_long)
    pi_short = -(p.w * s.v_short) - (pi0 - p.w * start.v_short)
    return pi_long, pi_short


def _advance(v_long, v_short, x, pi_long, pi_short, eps, r):
    # Works unchanged on floats and on numpy arrays.
    new_long = (1.0 + r) * v_long + (x - eps - r) * pi_long
    new_short = v_short + x * pi_short - eps * abs(pi_short)
    return new_long, new_short


def step(s: AccountState, x: float, p: PolicyParams, r: float = 0.0) -> AccountState:
    """Advance one period under return x and per-period rate r (long side only)."""
    if not x > -1.0:
        raise InvalidArgumentError(f"return must exceed -1, got {x}")
    if r < 0.0:
        raise InvalidArgumentError(f"rate must be >= 0, got {r}")
    pi_long, pi_short = controls(s, p)
    v_long, v_short = _advance(s.v_long, s.v_short, x, pi_long, pi_short, p.eps, r)
    return AccountState(v_long=v_long, v_short=v_short, step=s.step + 1)


def run_path(returns: Sequence[float], p: PolicyParams, rate: float = 0.0,
             control_law: ControlLaw = controls) -> Trajectory:
    """Evolve both accounts over a return path, recording every state."""
    returns = tuple(float(x) for x in returns)
    bad = next((i for i, x in enumerate(returns) if not x > -1.0), None)
    if bad is not None:
        raise InvalidArgumentError(f"return at index {bad} is {returns[bad]}; every return must exceed -1")
    if rate < 0.0:
        raise InvalidArgumentError(f"rate must be >= 0, got {rate}")

    state = initial_state(p)
    states = [state]
    control_pairs = [control_law(state, p)]

    for x in returns:
        pi_long, pi_short = control_pairs[-1]
        v_long, v_short = _advance(state.v_long, state.v_short, x, pi_long, pi_short, p.eps, rate)
        state = AccountState(v_long=v_long, v_short=v_short, step=state.step + 1)
        states.append(state)
        control_pairs.append(control_law(state, p))

    gain_loss = tuple(s.v_long + s.v_short - p.v0 for s in states)
    return Trajectory(states=tuple(states), controls=tuple(control_pairs),
                      gain_loss=gain_loss, returns=returns, v0=p.v0)


def run_sls_path(returns: Sequence[float], p: PolicyParams, pi0: float = None) -> Trajectory:
    """run_path driven by the classical SLS law; pi0 defaults to w v0 / 2."""
    if pi0 is None:
        pi0 = p.w * p.v0 / 2.0
    return run_path(returns, p, control_law=lambda s, q: sls_controls(s, q, pi0))


def product_form_value(returns: Sequence[float], p: PolicyParams) -> float:
    """V(k) = v0 (alpha prod(1 + w(x - eps)) + (1 - alpha) prod(1 - w(x + eps)))."""
    long_growth = math.prod(1.0 + p.w * (x - p.eps) for x in returns)
    short_growth = math.prod(1.0 - p.w * (x + p.eps) for x in returns)
    return p.v0 * (p.alpha * long_growth + (1.0 - p.alpha) * short_growth)


def account_lower_bound(k: int, p: PolicyParams) -> float:
    """Worst-case total V*_min(k) for returns confined to the configured bounds."""
    if k < 0:
        raise InvalidArgumentError(f"k must be >= 0, got {k}")
    long_base = 1.0 + p.w * (p.bounds.x_min - p.eps)
    short_base = 1.0 - p.w * (p.bounds.x_max + p.eps)
    return p.v0 * (p.alpha * long_base ** k + (1.0 - p.alpha) * short_base ** k)


def _lower_bounds(n_steps: int, p: PolicyParams) -> np.ndarray:
    return np.array([account_lower_bound(k, p) for k in range(n_steps + 1)])


def _step_violations(k, v_long, v_short, pi_long, pi_short, lower_bound, check_lower, alpha):
    """Boolean masks of broken invariants at one step (arrays over paths)."""
    total = v_long + v_short
    slack = _ROUNDING_SLACK * (k + 1) * np.maximum(np.abs(total), abs(lower_bound))
    if alpha > 0.0:
        positive = total > 0.0
    else:
        positive = total >= 0.0
    below = (total < lower_bound - slack) & check_lower
    exposure = np.abs(pi_long + pi_short)
    over_exposed = exposure > total + _ROUNDING_SLACK * np.abs(total)
    return ~positive, below, over_exposed, total, exposure


def check_invariants(t: Trajectory, p: PolicyParams) -> InvariantReport:
    """Survivability, V*_min lower bound and cash-financing at every step."""
    report = InvariantReport()
    n_steps = len(t.states) - 1
    lower = _lower_bounds(n_steps, p)

    outside = bounds_violations(t.returns, p.bounds)
    report.out_of_bounds_steps = outside
    first_outside = outside[0] if outside else None
    if outside:
        report.warnings.append(
            f"{len(outside)} return(s) outside configured bounds [{p.bounds.x_min}, {p.bounds.x_max}]; "
            f"lower-bound check limited to steps <= {first_outside}")
    if p.alpha == 0.0:
        report.warnings.append("alpha = 0: survivability checked as non-negativity only")

    v_long = np.array([s.v_long for s in t.states])
    v_short = np.array([s.v_short for s in t.states])
    pi_long = np.array([c[0] for c in t.controls])
    pi_short = np.array([c[1] for c in t.controls])

    for k in range(n_steps + 1):
        check_lower = first_outside is None or k <= first_outside
        not_positive, below, over_exposed, total, exposure = _step_violations(
            k, v_long[k], v_short[k], pi_long[k], pi_short[k], lower[k], check_lower, p.alpha)
        if not_positive:
            report.violations.append(StepViolation(k, 'survivability', float(total), 0.0))
        if below:
            report.violations.append(StepViolation(k, 'lower_bound', float(total), float(lower[k])))
        if over_exposed:
            report.violations.append(StepViolation(k, 'cash_financing', float(exposure), float(total)))

    for warning in report.warnings:
        logger.warning(warning)
    return report


@dataclass
class BatchResult:
    """Final account values of a batch of paths plus any invariant breaches."""
    v_long: np.ndarray
    v_short: np.ndarray
    gain_loss: np.ndarray
    violations: List[StepViolation]
    out_of_bounds: int


def evolve_batch(returns: np.ndarray, p: PolicyParams, rate: float = 0.0,
                 first_path: int = 0, max_violations: int = 10) -> BatchResult:
    """Evolve many paths at once; returns has shape (n_paths, k).

    Invariants are checked at every step of every path.  Path indices in
    the violations are offset by first_path.
    """
    returns = np.asarray(returns, dtype=float)
    if returns.ndim != 2:
        raise InvalidArgumentError(f"returns must be 2-D (paths, periods), got shape {returns.shape}")
    if returns.size and not np.all(returns > -1.0):
        raise InvalidArgumentError("every return must exceed -1")
    n_paths, n_steps = returns.shape

    start = initial_state(p)
    v_long = np.full(n_paths, start.v_long)
    v_short = np.full(n_paths, start.v_short)
    lower = _lower_bounds(n_steps, p)
    in_bounds = np.ones(n_paths, dtype=bool)
    outside = (returns < p.bounds.x_min) | (returns > p.bounds.x_max)
    violations = []

    def record(k, mask, name, values, limits):
        for i in np.flatnonzero(mask)[:max_violations - len(violations)]:
            limit = limits[i] if np.ndim(limits) else limits
            violations.append(StepViolation(k, name, float(values[i]), float(limit), path=first_path + int(i)))

    for k in range(n_steps + 1):
        pi_long = p.w * v_long
        pi_short = -(p.w * v_short)
        not_positive, below, over_exposed, total, exposure = _step_violations(
            k, v_long, v_short, pi_long, pi_short, lower[k], in_bounds, p.alpha)
        if len(violations) < max_violations and (not_positive.any() or below.any() or over_exposed.any()):
            record(k, not_positive, 'survivability', total, 0.0)
            record(k, below, 'lower_bound', total, lower[k])
            record(k, over_exposed, 'cash_financing', exposure, total)
        if k == n_steps:
            break
        x = returns[:, k]
        in_bounds = in_bounds & ~outside[:, k]
        v_long, v_short = _advance(v_long, v_short, x, pi_long, pi_short, p.eps, rate)

    n_outside = int(outside.sum())
    if n_outside:
        logger.warning("%d simulated return(s) fell outside the configured bounds [%s, %s]",
                       n_outside, p.bounds.x_min, p.bounds.x_max)
    return BatchResult(v_long=v_long, v_short=v_short, gain_loss=v_long + v_short - p.v0,
                       violations=violations, out_of_bounds=n_outside)
