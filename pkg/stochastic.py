"""
Per-period return generators and the seeding contract.

Random streams
--------------
Every stream is a numpy ``Philox4x64-10`` counter-based generator.  The
128-bit Philox key is derived from the 64-bit master seed through
``numpy.random.SeedSequence(master_seed).generate_state(2, uint64)``; the
stream id occupies the top 64-bit word of the 256-bit counter, so stream
``i`` starts at counter ``i << 192`` and streams never overlap.
Normal variates use numpy's ``Generator.standard_normal`` (ziggurat),
Poisson counts ``Generator.poisson`` and uniforms ``Generator.random``.
Changing any of these changes every golden value.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Union

import numpy as np

from core import InvalidArgumentError, ReturnStats

_U64 = (1 << 64) - 1
# Stream reserved for per-grid-point draws that are not path returns.
AUXILIARY_STREAM = _U64


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ('master_seed', 'stream_id'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= value <= _U64:
                raise InvalidArgumentError(f"{name} must be an unsigned 64-bit integer, got {value!r}")

    def stream(self, stream_id: int) -> 'SeedSpec':
        return SeedSpec(self.master_seed, stream_id)


@dataclass(frozen=True)
class TwoPointModel:
    """Returns equal to `up` with probability p_up, otherwise `down`."""
    up: float
    down: float
    p_up: float

    def __post_init__(self):
        if not (self.up > -1.0 and self.down > -1.0):
            raise InvalidArgumentError(f"returns must exceed -1, got up={self.up}, down={self.down}")
        if self.down > self.up:
            raise InvalidArgumentError(f"down={self.down} exceeds up={self.up}")
        if not 0.0 <= self.p_up <= 1.0:
            raise InvalidArgumentError(f"p_up must lie in [0, 1], got {self.p_up}")

    @property
    def mean(self) -> float:
        return self.p_up * self.up + (1.0 - self.p_up) * self.down

    @property
    def variance(self) -> float:
        return self.p_up * (1.0 - self.p_up) * (self.up - self.down) ** 2


@dataclass(frozen=True)
class GbmJumpParams:
    """Geometric Brownian motion with Poisson-timed down-jumps of fraction delta."""
    mu_star: float
    sigma_star: float
    lam: float
    delta: float
    dt: float = 1.0 / 252.0
    s0: float = 1.0

    def __post_init__(self):
        if self.sigma_star < 0.0:
            raise InvalidArgumentError(f"sigma_star must be >= 0, got {self.sigma_star}")
        if self.lam < 0.0:
            raise InvalidArgumentError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgumentError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.dt > 0.0:
            raise InvalidArgumentError(f"dt must be > 0, got {self.dt}")
        if not self.s0 > 0.0:
            raise InvalidArgumentError(f"s0 must be > 0, got {self.s0}")

    def with_drift(self, mu_star: float, sigma_star: float) -> 'GbmJumpParams':
        return GbmJumpParams(mu_star=mu_star, sigma_star=sigma_star, lam=self.lam,
                             delta=self.delta, dt=self.dt, s0=self.s0)


ReturnModel = Union[TwoPointModel, GbmJumpParams]


@lru_cache(maxsize=256)
def _philox_key(master_seed: int) -> int:
    words = np.random.SeedSequence(master_seed).generate_state(2, dtype=np.uint64)
    return int(words[0]) | (int(words[1]) << 64)


def generator(seed: SeedSpec) -> np.random.Generator:
    """Independent generator for (master_seed, stream_id)."""
    bit_generator = np.random.Philox(key=_philox_key(int(seed.master_seed)),
                                     counter=int(seed.stream_id) << 192)
    return np.random.Generator(bit_generator)


def derive_seed(master_seed: int, index: int) -> int:
    """Child master seed for a sub-experiment (e.g. one sweep grid point)."""
    sequence = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _check_count(n: int):
    if n < 0:
        raise InvalidArgumentError(f"number of draws must be >= 0, got {n}")


def stream_generators(master_seed: int, first_stream: int, last_stream: int) -> Iterator[np.random.Generator]:
    """Generators for streams [first_stream, last_stream) in order.

    One Philox is moved to each stream's counter in turn; every yielded
    generator draws exactly what generator(SeedSpec(master_seed, i)) would.
    The same object is yielded each time, so finish with it before advancing.
    """
    bit_generator = np.random.Philox(key=_philox_key(int(master_seed)))
    rng = np.random.Generator(bit_generator)
    state = bit_generator.state
    for stream_id in range(first_stream, last_stream):
        state['state']['counter'] = np.array([0, 0, 0, stream_id], dtype=np.uint64)
        bit_generator.state = state
        yield rng


def _draw_two_point(model: TwoPointModel, n: int, rng: np.random.Generator) -> np.ndarray:
    uniforms = rng.random(n)
    return np.where(uniforms < model.p_up, model.up, model.down)


def sample_two_point(model: TwoPointModel, n: int, seed: SeedSpec) -> np.ndarray:
    _check_count(n)
    return _draw_two_point(model, n, generator(seed))


def returns_from_draws(params: GbmJumpParams, normals, jumps) -> np.ndarray:
    """Exact per-period returns from standard normals and Poisson jump counts."""
    normals = np.asarray(normals, dtype=float)
    jumps = np.asarray(jumps, dtype=float)
    drift = (params.mu_star - 0.5 * params.sigma_star ** 2) * params.dt
    log_increment = (drift + params.sigma_star * math.sqrt(params.dt) * normals
                     + jumps * math.log1p(-params.delta))
    return np.expm1(log_increment)


def gbm_jump_returns(params: GbmJumpParams, n_periods: int, seed: SeedSpec) -> np.ndarray:
    """Per-period returns S((k+1)dt)/S(k dt) - 1, normals drawn before jump counts."""
    _check_count(n_periods)
    return _draw_gbm_jump(params, n_periods, generator(seed))


def _draw_gbm_jump(params: GbmJumpParams, n_periods: int, rng: np.random.Generator) -> np.ndarray:
    normals = rng.standard_normal(n_periods)
    jumps = rng.poisson(params.lam * params.dt, n_periods)
    return returns_from_draws(params, normals, jumps)


def prices_from_returns(params: GbmJumpParams, returns) -> np.ndarray:
    """Price path S(0..n) implied by a return path."""
    return params.s0 * np.concatenate(([1.0], np.cumprod(1.0 + np.asarray(returns, dtype=float))))


def gbm_jump_period_stats(params: GbmJumpParams) -> ReturnStats:
    """Exact mean and std of one period's return.

    E[1+X]   = exp((mu* - lam delta) dt)
    E[(1+X)^2] = exp((2 mu* + sigma*^2) dt) exp(lam dt ((1-delta)^2 - 1))
    so var(X) = E[1+X]^2 expm1((sigma*^2 + lam delta^2) dt).
    """
    rate = (params.mu_star - params.lam * params.delta) * params.dt
    growth = math.exp(rate)
    variance = growth * growth * math.expm1((params.sigma_star ** 2 + params.lam * params.delta ** 2) * params.dt)
    return ReturnStats(mu=math.expm1(rate), sigma=math.sqrt(variance))


def approx_period_stats(params: GbmJumpParams) -> ReturnStats:
    """The rule-of-thumb conversion mu = mu* dt, sigma = sigma* sqrt(dt)."""
    return ReturnStats(mu=params.mu_star * params.dt, sigma=params.sigma_star * math.sqrt(params.dt))


def two_point_stats(model: TwoPointModel) -> ReturnStats:
    return ReturnStats(mu=model.mean, sigma=math.sqrt(model.variance))


def model_stats(model: ReturnModel) -> ReturnStats:
    if isinstance(model, TwoPointModel):
        return two_point_stats(model)
    if isinstance(model, GbmJumpParams):
        return gbm_jump_period_stats(model)
    raise InvalidArgumentError(f"unknown return model {type(model).__name__}")


def sample_returns(model: ReturnModel, n: int, seed: SeedSpec) -> np.ndarray:
    if isinstance(model, TwoPointModel):
        return sample_two_point(model, n, seed)
    if isinstance(model, GbmJumpParams):
        return gbm_jump_returns(model, n, seed)
    raise InvalidArgumentError(f"unknown return model {type(model).__name__}")


def sample_paths(model: ReturnModel, n_periods: int, master_seed: int, first_path: int, last_path: int) -> np.ndarray:
    """Return matrix for paths [first_path, last_path); row i uses stream first_path + i."""
    if isinstance(model, TwoPointModel):
        draw = _draw_two_point
    elif isinstance(model, GbmJumpParams):
        draw = _draw_gbm_jump
    else:
        raise InvalidArgumentError(f"unknown return model {type(model).__name__}")
    _check_count(n_periods)
    rows = np.empty((last_path - first_path, n_periods))
    for row, rng in enumerate(stream_generators(master_seed, first_path, last_path)):
        rows[row] = draw(model, n_periods, rng)
    return rows
