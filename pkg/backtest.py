"""
Historical close prices, their return series, and the double linear
policy run over real data.

Input files are UTF-8 CSV with the header ``date,close``; trajectories are
written as ``step,date,v_long,v_short,v_total,gain_loss,pi_long,pi_short``
with every number at 17 significant digits.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass
from datetime import date
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core import (InvalidArgumentError, InvariantViolationError, PolicyParams,
                  PriceParseError, PriceValidationError, ReturnBounds,
                  require_valid)
from dynamics import Trajectory, check_invariants, run_path

logger = logging.getLogger(__name__)

PRICE_HEADER = ['date', 'close']
TRAJECTORY_HEADER = ['step', 'date', 'v_long', 'v_short', 'v_total', 'gain_loss', 'pi_long', 'pi_short']

# Used when the observed series never moves in one direction.
_FALLBACK_X_MIN = -0.99
_FALLBACK_X_MAX = 1.0


def _fmt(value: float) -> str:
    return format(float(value), '.17g')


@dataclass(frozen=True)
class PriceSeries:
    dates: Tuple[date, ...]
    closes: Tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.closes):
            raise PriceValidationError(f"{len(self.dates)} dates but {len(self.closes)} closes")
        if len(self.closes) < 2:
            raise PriceValidationError(f"need at least 2 prices, got {len(self.closes)}")
        for i, close in enumerate(self.closes):
            if not (math.isfinite(close) and close > 0.0):
                raise PriceValidationError(f"price on {self.dates[i].isoformat()} is {close}; prices must be positive")
        for earlier, later in zip(self.dates, self.dates[1:]):
            if not later > earlier:
                raise PriceValidationError(f"dates must be strictly increasing: {later.isoformat()} follows {earlier.isoformat()}")

    def __len__(self):
        return len(self.closes)


@dataclass(frozen=True)
class ReturnSummary:
    sample_mean: float
    sample_std: float
    x_max_observed: float
    x_min_observed: float
    n_returns: int

    def to_dict(self) -> dict:
        return {
            'sample_mean': self.sample_mean,
            'sample_std': self.sample_std,
            'x_max_observed': self.x_max_observed,
            'x_min_observed': self.x_min_observed,
            'n_returns': self.n_returns,
        }


@dataclass(frozen=True)
class BacktestResult:
    trajectory: Trajectory
    summary: ReturnSummary
    dates: Tuple[date, ...]
    policy: PolicyParams

    @property
    def final_gain_loss(self) -> float:
        return self.trajectory.final_gain

    @property
    def final_value(self) -> float:
        return self.trajectory.final_value


def _text_stream(source) -> io.StringIO:
    data = source.read() if hasattr(source, 'read') else source
    if isinstance(data, (bytes, bytearray)):
        try:
            data = bytes(data).decode('utf-8-sig')
        except UnicodeDecodeError as e:
            raise PriceParseError(1, f"not UTF-8: {e}") from None
    return io.StringIO(data, newline='')


def load_prices(source) -> PriceSeries:
    """Parse a ``date,close`` CSV from a byte stream, text stream or bytes."""
    reader = csv.reader(_text_stream(source))
    dates, closes = [], []

    header = None
    for row in reader:
        line_number = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if header is None:
            header = [cell.strip().lower() for cell in row]
            if header != PRICE_HEADER:
                raise PriceParseError(line_number, f"expected header 'date,close', got {','.join(row)!r}")
            continue
        if len(row) != 2:
            raise PriceParseError(line_number, f"expected 2 fields, got {len(row)}")
        raw_date, raw_close = (cell.strip() for cell in row)
        try:
            day = date.fromisoformat(raw_date)
        except ValueError:
            raise PriceParseError(line_number, f"not an ISO-8601 date: {raw_date!r}") from None
        try:
            close = float(raw_close)
        except ValueError:
            raise PriceParseError(line_number, f"not a decimal price: {raw_close!r}") from None
        if not math.isfinite(close):
            raise PriceParseError(line_number, f"not a finite price: {raw_close!r}")
        if close <= 0.0:
            raise PriceValidationError(f"line {line_number}: price {raw_close} on {raw_date} must be positive")
        dates.append(day)
        closes.append(close)

    if header is None:
        raise PriceParseError(1, "empty price file")
    return PriceSeries(dates=tuple(dates), closes=tuple(closes))


def load_prices_file(path: str) -> PriceSeries:
    with open(path, 'rb') as handle:
        return load_prices(handle)


def to_returns(s: PriceSeries) -> List[float]:
    """Close-to-close returns X(k) = (S(k+1) - S(k)) / S(k)."""
    return [(later - earlier) / earlier for earlier, later in zip(s.closes, s.closes[1:])]


def summarize(returns: Sequence[float]) -> ReturnSummary:
    """Sample mean, sample std (n - 1 denominator) and extrema."""
    values = np.asarray(returns, dtype=float)
    if values.size < 2:
        raise InvalidArgumentError(f"need at least 2 returns, got {values.size}")
    x_min, x_max = float(values.min()), float(values.max())
    mean = min(max(float(values.mean()), x_min), x_max)
    return ReturnSummary(sample_mean=mean, sample_std=float(values.std(ddof=1)),
                         x_max_observed=x_max, x_min_observed=x_min, n_returns=int(values.size))


def observed_bounds(summary: ReturnSummary) -> ReturnBounds:
    """Return bounds taken from the data itself (in-sample)."""
    logger.warning("using observed return extrema [%.6g, %.6g] as policy bounds; this is in-sample",
                   summary.x_min_observed, summary.x_max_observed)
    x_min = summary.x_min_observed if summary.x_min_observed < 0.0 else _FALLBACK_X_MIN
    x_max = summary.x_max_observed if summary.x_max_observed > 0.0 else _FALLBACK_X_MAX
    return ReturnBounds(x_min=x_min, x_max=x_max)


def run_backtest(s: PriceSeries, p: PolicyParams, rate: float = 0.0) -> BacktestResult:
    """Run the policy over the series' returns and verify every step."""
    require_valid(p)
    returns = to_returns(s)
    summary = summarize(returns)
    trajectory = run_path(returns, p, rate=rate)
    report = check_invariants(trajectory, p)
    if not report.ok:
        raise InvariantViolationError(report)
    logger.info("backtest alpha=%s w=%s eps=%s: final gain-loss %.6f over %d returns",
                p.alpha, p.w, p.eps, trajectory.final_gain, summary.n_returns)
    return BacktestResult(trajectory=trajectory, summary=summary, dates=s.dates, policy=p)


def run_alphas(s: PriceSeries, p: PolicyParams, alphas: Iterable[float], rate: float = 0.0) -> Dict[float, BacktestResult]:
    """One backtest per allocation constant; every policy is validated first."""
    alphas = list(alphas)
    duplicates = sorted({a for a in alphas if alphas.count(a) > 1})
    if duplicates:
        raise InvalidArgumentError(f"duplicate alpha values: {', '.join(format(a, 'g') for a in duplicates)}")
    policies = [require_valid(p.with_alpha(alpha)) for alpha in alphas]
    return {policy.alpha: run_backtest(s, policy, rate=rate) for policy in policies}


def write_trajectory_csv(result: BacktestResult, stream) -> int:
    """Write one row per step; returns the number of data rows."""
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(TRAJECTORY_HEADER)
    t = result.trajectory
    for k, (state, (pi_long, pi_short), gain) in enumerate(zip(t.states, t.controls, t.gain_loss)):
        writer.writerow([k, result.dates[k].isoformat(), _fmt(state.v_long), _fmt(state.v_short),
                         _fmt(state.total), _fmt(gain), _fmt(pi_long), _fmt(pi_short)])
    return len(t.states)


def backtest_summary(results: Dict[float, BacktestResult], files: Optional[Dict[float, str]] = None) -> dict:
    """JSON-ready summary: the return statistics and the final gain-loss per alpha."""
    if not results:
        raise InvalidArgumentError("no backtest results to summarize")
    first = next(iter(results.values()))
    runs = []
    for alpha, result in results.items():
        entry = {
            'alpha': alpha,
            'final_gain_loss': result.final_gain_loss,
            'final_value': result.final_value,
            'policy': result.policy.to_dict(),
        }
        if files and alpha in files:
            entry['trajectory_file'] = files[alpha]
        runs.append(entry)
    return {
        'start_date': first.dates[0].isoformat(),
        'end_date': first.dates[-1].isoformat(),
        'returns': first.summary.to_dict(),
        'runs': runs,
    }
