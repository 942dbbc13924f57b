"""
Monte-Carlo estimation of gain-loss statistics, the drift sweep, and the
exact enumeration oracle for two-point returns.

Paths are simulated in fixed chunks of CHUNK_SIZE path indices.  Path i
always draws from stream i of the master seed and chunks are merged in
index order, so results do not depend on the number of workers.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np

import analytics
from config_loader import SweepConfig
from core import (InvalidArgumentError, InvariantViolationError, PolicyParams,
                  require_valid)
from dynamics import InvariantReport, evolve_batch
from stochastic import (AUXILIARY_STREAM, ReturnModel, SeedSpec,
                        TwoPointModel, derive_seed, approx_period_stats,
                        gbm_jump_period_stats, generator, model_stats,
                        sample_paths)

logger = logging.getLogger(__name__)

CHUNK_SIZE = 2048
MAX_BRUTE_FORCE_PERIODS = 20
_ENUMERATION_BLOCK = 1 << 14


@dataclass
class RunningMoments:
    """Mergeable count / mean / sum of squared deviations."""
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def from_values(cls, values) -> 'RunningMoments':
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return cls()
        mean = float(values.mean())
        return cls(n=int(values.size), mean=mean, m2=float(np.sum((values - mean) ** 2)))

    def merge(self, other: 'RunningMoments') -> 'RunningMoments':
        if other.n == 0:
            return self
        if self.n == 0:
            return RunningMoments(other.n, other.mean, other.m2)
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return RunningMoments(n, mean, m2)

    @property
    def variance(self) -> float:
        """Sample variance (n - 1 denominator); 0 for fewer than two values."""
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std: float
    std_error: float
    n_paths: int
    k: int

    def to_dict(self) -> dict:
        return {'mean': self.mean, 'std': self.std, 'std_error': self.std_error,
                'n_paths': self.n_paths, 'k': self.k}


@dataclass(frozen=True)
class SweepRow:
    mu_star: float
    sigma_star: float
    analytic_mean: float
    analytic_std: float
    mc: McEstimate
    alpha: float
    approx_mean: float
    approx_std: float

    def to_dict(self) -> dict:
        return {
            'alpha': self.alpha,
            'mu_star': self.mu_star,
            'sigma_star': self.sigma_star,
            'analytic_mean': self.analytic_mean,
            'analytic_std': self.analytic_std,
            'approx_mean': self.approx_mean,
            'approx_std': self.approx_std,
            'mc_mean': self.mc.mean,
            'mc_std': self.mc.std,
            'mc_se': self.mc.std_error,
            'n_paths': self.mc.n_paths,
        }


@dataclass(frozen=True)
class _ChunkTask:
    policy: PolicyParams
    model: ReturnModel
    k: int
    master_seed: int
    first_path: int
    last_path: int


@dataclass
class _ChunkResult:
    first_path: int
    moments: RunningMoments
    report: InvariantReport = field(default_factory=InvariantReport)


def _simulate_chunk(task: _ChunkTask) -> _ChunkResult:
    returns = sample_paths(task.model, task.k, task.master_seed, task.first_path, task.last_path)
    batch = evolve_batch(returns, task.policy, first_path=task.first_path)
    report = InvariantReport(violations=batch.violations)
    if batch.out_of_bounds:
        report.warnings.append(f"paths {task.first_path}-{task.last_path - 1}: "
                               f"{batch.out_of_bounds} return(s) outside configured bounds")
    return _ChunkResult(task.first_path, RunningMoments.from_values(batch.gain_loss), report)


@contextmanager
def worker_pool(workers: int) -> Iterator[Optional[ProcessPoolExecutor]]:
    """Process pool for workers > 1; None means run inline."""
    if workers < 1:
        raise InvalidArgumentError(f"workers must be >= 1, got {workers}")
    if workers == 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=workers) as executor:
        yield executor


def _chunks(n_paths: int) -> List[Tuple[int, int]]:
    return [(start, min(start + CHUNK_SIZE, n_paths)) for start in range(0, n_paths, CHUNK_SIZE)]


def estimate(p: PolicyParams, model: ReturnModel, k: int, n_paths: int, seed: SeedSpec,
             workers: int = 1, executor: ProcessPoolExecutor = None) -> McEstimate:
    """Mean and std of G_k over n_paths independent paths.

    Every path is checked against survivability, the V*_min bound and
    cash-financing; any breach raises InvariantViolationError.
    """
    require_valid(p)
    if n_paths < 1:
        raise InvalidArgumentError(f"n_paths must be >= 1, got {n_paths}")
    if k < 0:
        raise InvalidArgumentError(f"k must be >= 0, got {k}")
    if workers < 1:
        raise InvalidArgumentError(f"workers must be >= 1, got {workers}")

    tasks = [_ChunkTask(p, model, k, int(seed.master_seed), first, last) for first, last in _chunks(n_paths)]
    if executor is None and workers > 1:
        with worker_pool(workers) as pool:
            results = list(pool.map(_simulate_chunk, tasks))
    elif executor is not None:
        results = list(executor.map(_simulate_chunk, tasks))
    else:
        results = [_simulate_chunk(task) for task in tasks]

    moments = RunningMoments()
    merged = InvariantReport()
    for result in sorted(results, key=lambda r: r.first_path):
        moments = moments.merge(result.moments)
        merged.violations.extend(result.report.violations)
        merged.warnings.extend(result.report.warnings)

    for warning in merged.warnings:
        logger.warning(warning)
    if merged.violations:
        raise InvariantViolationError(merged)

    std = moments.std
    return McEstimate(mean=moments.mean, std=std, std_error=std / math.sqrt(moments.n),
                      n_paths=moments.n, k=k)


def brute_force(p: PolicyParams, model: TwoPointModel, k: int) -> Tuple[float, float]:
    """Exact (mean, variance) of G_k by enumerating all 2^k two-point paths."""
    if not 0 <= k <= MAX_BRUTE_FORCE_PERIODS:
        raise InvalidArgumentError(f"brute_force enumerates 2^k paths; k must lie in [0, {MAX_BRUTE_FORCE_PERIODS}], got {k}")

    shifts = np.arange(k)
    gains, weights = [], []
    for start in range(0, 1 << k, _ENUMERATION_BLOCK):
        codes = np.arange(start, min(start + _ENUMERATION_BLOCK, 1 << k))
        ups = (codes[:, None] >> shifts) & 1
        returns = np.where(ups == 1, model.up, model.down)
        n_up = ups.sum(axis=1)
        weights.append(model.p_up ** n_up * (1.0 - model.p_up) ** (k - n_up))
        gains.append(evolve_batch(returns, p, first_path=start).gain_loss)

    gains = np.concatenate(gains)
    weights = np.concatenate(weights)
    mean = float(np.sum(weights * gains))
    variance = float(np.sum(weights * (gains - mean) ** 2))
    return mean, variance


def sweep_volatility(mu_star: float, grid_seed: int) -> float:
    """sigma* = 2 |mu*| Z with one Z ~ U[0, 1] per grid point."""
    z = generator(SeedSpec(grid_seed, AUXILIARY_STREAM)).random()
    return 2.0 * abs(mu_star) * z


def sweep(config: SweepConfig, seed: SeedSpec, workers: int = 1) -> List[SweepRow]:
    """Monte-Carlo vs closed-form gain-loss over a grid of annual drifts.

    Grid point i uses the child seed derive_seed(master, i) for both its
    volatility draw and its paths, shared by every alpha.
    """
    grid = config.mu_grid()
    policies = [require_valid(config.policy(alpha)) for alpha in config.alphas]
    base = config.jump_params()
    rows = []

    with worker_pool(workers) as pool:
        for policy in policies:
            logger.info("sweep: alpha=%s, %d grid points x %d paths", policy.alpha, len(grid), config.n_paths)
            for index, mu_star in enumerate(grid):
                grid_seed = derive_seed(int(seed.master_seed), index)
                params = base.with_drift(mu_star, sweep_volatility(mu_star, grid_seed))
                mc = estimate(policy, params, config.n_periods, config.n_paths, SeedSpec(grid_seed),
                              executor=pool)
                exact = gbm_jump_period_stats(params)
                approx = approx_period_stats(params)
                rows.append(SweepRow(
                    mu_star=mu_star,
                    sigma_star=params.sigma_star,
                    analytic_mean=analytics.expected_gain(policy, exact, config.n_periods),
                    analytic_std=analytics.std_gain(policy, exact, config.n_periods),
                    mc=mc,
                    alpha=policy.alpha,
                    approx_mean=analytics.expected_gain(policy, approx, config.n_periods),
                    approx_std=analytics.std_gain(policy, approx, config.n_periods),
                ))
                logger.info("sweep: mu*=%+.4f sigma*=%.4f mc=%.6g analytic=%.6g",
                            mu_star, params.sigma_star, mc.mean, rows[-1].analytic_mean)
    return rows


@dataclass(frozen=True)
class McComparison:
    """An McEstimate next to the closed forms evaluated at the model's exact moments."""
    mc: McEstimate
    analytic_mean: float
    analytic_std: float
    mu: float
    sigma: float

    def to_dict(self) -> dict:
        return {'mu': self.mu, 'sigma': self.sigma, 'analytic_mean': self.analytic_mean,
                'analytic_std': self.analytic_std, 'mc_mean': self.mc.mean, 'mc_std': self.mc.std,
                'mc_se': self.mc.std_error, 'n_paths': self.mc.n_paths, 'k': self.mc.k}


def compare(p: PolicyParams, model: ReturnModel, k: int, n_paths: int, seed: SeedSpec,
            workers: int = 1) -> McComparison:
    stats = model_stats(model)
    mc = estimate(p, model, k, n_paths, seed, workers=workers)
    return McComparison(mc=mc, analytic_mean=analytics.expected_gain(p, stats, k),
                        analytic_std=analytics.std_gain(p, stats, k), mu=stats.mu, sigma=stats.sigma)
