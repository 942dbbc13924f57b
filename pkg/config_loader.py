import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from dotenv import load_dotenv

from core import InvalidArgumentError, PolicyParams, ReturnBounds

# Wide enough for daily equity and crypto returns; w = 1/(1+eps) stays admissible.
DEFAULT_X_MIN = -0.99
DEFAULT_X_MAX = 1.0


def parse_rate(text) -> float:
    """Decimal rate from '0.0001' or '0.01%'."""
    if isinstance(text, (int, float)):
        return float(text)
    value = str(text).strip()
    try:
        if value.endswith('%'):
            return float(value[:-1].strip()) / 100.0
        return float(value)
    except ValueError:
        raise InvalidArgumentError(f"not a rate: {text!r} (use 0.0001 or 0.01%)") from None


def parse_float_list(text: str) -> List[float]:
    """'0,0.25,0.5' -> [0.0, 0.25, 0.5]."""
    try:
        return [float(part) for part in str(text).split(',') if part.strip()]
    except ValueError:
        raise InvalidArgumentError(f"not a comma separated list of numbers: {text!r}") from None


@dataclass
class PolicyConfig:
    """Policy flags shared by every command."""
    alpha: float = 0.5
    w: float = 0.0
    eps: float = 0.0
    v0: float = 1.0
    x_min: float = DEFAULT_X_MIN
    x_max: float = DEFAULT_X_MAX

    def bounds(self) -> ReturnBounds:
        return ReturnBounds(x_min=self.x_min, x_max=self.x_max)

    def policy(self, alpha: float = None) -> PolicyParams:
        return PolicyParams(alpha=self.alpha if alpha is None else alpha, w=self.w, eps=self.eps,
                            v0=self.v0, bounds=self.bounds())


@dataclass
class AnalyticsConfig:
    policy: PolicyConfig
    mu: float = 0.0
    sigma: float = 0.0
    k: int = 1
    critical_points: bool = False


@dataclass
class MonteCarloConfig:
    policy: PolicyConfig
    model: str = 'two-point'  # two-point, gbm-jump
    up: float = 0.1
    down: float = -0.1
    p_up: float = 0.5
    mu_star: float = 0.0
    sigma_star: float = 0.0
    lam: float = 0.1
    delta: float = 0.05
    dt: float = 1.0 / 252.0
    k: int = 252
    n_paths: int = 10000


@dataclass
class SweepConfig:
    """Grid of annual drifts mu* and the policy/jump settings of the sweep."""
    mu_min: float = -0.9
    mu_max: float = 0.9
    mu_step: float = 0.01
    mu_values: Optional[Tuple[float, ...]] = None
    n_paths: int = 10000
    n_periods: int = 252
    alphas: Tuple[float, ...] = None
    eps: float = 0.0001
    w: Optional[float] = None  # None -> 1/(1+eps)
    v0: float = 1.0
    lam: float = 0.1
    delta: float = 0.05
    dt: float = 1.0 / 252.0
    x_min: float = DEFAULT_X_MIN
    x_max: float = DEFAULT_X_MAX

    def __post_init__(self):
        if self.alphas is None:
            self.alphas = (0.5,)
        self.alphas = tuple(self.alphas)
        if self.mu_values is not None:
            self.mu_values = tuple(sorted(float(m) for m in self.mu_values))

    def mu_grid(self) -> Tuple[float, ...]:
        """Ascending drift grid; values are rounded so 0.01 steps land on 0.01 multiples."""
        if self.mu_values is not None:
            return self.mu_values
        if not self.mu_step > 0 or self.mu_max < self.mu_min:
            raise InvalidArgumentError(
                f"bad grid: min={self.mu_min}, max={self.mu_max}, step={self.mu_step}")
        count = int(math.floor((self.mu_max - self.mu_min) / self.mu_step + 1e-9))
        return tuple(round(self.mu_min + i * self.mu_step, 10) + 0.0 for i in range(count + 1))

    def weight(self) -> float:
        return 1.0 / (1.0 + self.eps) if self.w is None else self.w

    def policy(self, alpha: float) -> PolicyParams:
        return PolicyParams(alpha=alpha, w=self.weight(), eps=self.eps, v0=self.v0,
                            bounds=ReturnBounds(x_min=self.x_min, x_max=self.x_max))

    def jump_params(self):
        from stochastic import GbmJumpParams
        return GbmJumpParams(mu_star=0.0, sigma_star=0.0, lam=self.lam, delta=self.delta, dt=self.dt)


@dataclass
class BacktestConfig:
    prices_path: str
    alphas: List[float] = None
    w: float = 0.25
    eps: float = 0.0001
    v0: float = 100000.0
    x_min: Optional[float] = None  # None -> observed minimum return
    x_max: Optional[float] = None  # None -> observed maximum return
    out_dir: str = '.'

    def __post_init__(self):
        if self.alphas is None:
            self.alphas = [0.5]


@dataclass
class EnvConfig:
    """Deployment settings; never affects computed numbers."""
    database_path: str = 'runs.db'
    api_host: str = '127.0.0.1'
    api_port: int = 5000
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_env(cls) -> 'EnvConfig':
        load_dotenv()
        database_path = os.getenv('DATABASE_PATH', 'runs.db')
        # Inside the container the store lives on the mounted volume
        if database_path == 'runs.db' and os.path.isdir('/data'):
            database_path = '/data/runs.db'
        return cls(
            database_path=database_path,
            api_host=os.getenv('DLP_API_HOST', '127.0.0.1'),
            api_port=int(os.getenv('DLP_API_PORT', '5000')),
        )
