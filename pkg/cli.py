#!/usr/bin/env python3
"""
Batch commands for the double linear policy:

    analytics   closed-form E[G_k], var, std and the critical drifts
    montecarlo  simulated G_k next to the closed forms
    sweep       Monte-Carlo vs closed form over a grid of annual drifts
    backtest    the policy over a historical ``date,close`` file

Data goes to stdout (or --out); diagnostics go to stderr.  Exit codes are
0 on success, 2 for usage/validation/input errors and 1 for internal errors.
"""

import csv
import functools
import io
import json
import logging
import os
import sys
from dataclasses import asdict

import click

import analytics
import montecarlo
from backtest import (backtest_summary, load_prices_file, observed_bounds,
                      run_alphas, summarize, to_returns, write_trajectory_csv)
from config_loader import (DEFAULT_X_MAX, DEFAULT_X_MIN, AnalyticsConfig,
                           BacktestConfig, MonteCarloConfig, PolicyConfig,
                           SweepConfig, parse_float_list, parse_rate)
from core import (AnalyticsInternalError, DoubleLinearError,
                  InvalidArgumentError, InvariantViolationError, PolicyParams,
                  ReturnBounds, ReturnStats, require_valid)
from database import DatabaseManager
from stochastic import GbmJumpParams, SeedSpec, TwoPointModel

logger = logging.getLogger(__name__)

SWEEP_HEADER = ['mu_star', 'sigma_star', 'analytic_mean', 'analytic_std', 'mc_mean', 'mc_std', 'mc_se', 'n_paths']
U64 = click.IntRange(0, (1 << 64) - 1)


class RateType(click.ParamType):
    """Decimal rate; '0.01%' is accepted and converted to 0.0001."""
    name = 'rate'

    def convert(self, value, param, ctx):
        if isinstance(value, float):
            return value
        try:
            return parse_rate(value)
        except InvalidArgumentError as e:
            self.fail(str(e), param, ctx)


class FloatListType(click.ParamType):
    name = 'list'

    def convert(self, value, param, ctx):
        if isinstance(value, (list, tuple)):
            return [float(v) for v in value]
        try:
            values = parse_float_list(value)
        except InvalidArgumentError as e:
            self.fail(str(e), param, ctx)
        if not values:
            self.fail("empty list", param, ctx)
        return values


RATE = RateType()
FLOAT_LIST = FloatListType()


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, '.17g')
    return str(value)


def _csv_text(header, rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buffer.getvalue()


def _json_text(data) -> str:
    try:
        return json.dumps(data, indent=2, allow_nan=False) + '\n'
    except ValueError as e:
        raise InvalidArgumentError(f"result is not finite ({e}); reduce k or the drift") from e


def _emit(text: str, out: str):
    if out in (None, '-'):
        click.echo(text, nl=False)
        return
    with open(out, 'w', encoding='utf-8', newline='') as handle:
        handle.write(text)
    logger.info("wrote %s", out)


def _store(db_path):
    if not db_path:
        return None
    store = DatabaseManager(db_path)
    store.create_tables()
    return store


def exit_codes(f):
    """Map project errors to exit codes 2 (bad input) and 1 (internal)."""
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (click.ClickException, click.exceptions.Exit, click.exceptions.Abort):
            raise
        except (AnalyticsInternalError, InvariantViolationError) as e:
            click.echo(f"internal error: {e}", err=True)
            sys.exit(1)
        except DoubleLinearError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(2)
        except OSError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(2)
        except Exception as e:
            logger.exception("unexpected failure")
            click.echo(f"internal error: {e}", err=True)
            sys.exit(1)
    return wrapper


def policy_options(alpha=True, x_bounds_default=True):
    """--alpha --w --eps --v0 --x-min --x-max."""
    def decorate(f):
        x_min = DEFAULT_X_MIN if x_bounds_default else None
        x_max = DEFAULT_X_MAX if x_bounds_default else None
        options = [
            click.option('--w', 'w', type=float, default=0.0, show_default=True, help='Decision weight.'),
            click.option('--eps', type=RATE, default='0', show_default=True, help="Cost rate, e.g. 0.0001 or 0.01%."),
            click.option('--v0', type=float, default=1.0, show_default=True, help='Initial account value.'),
            click.option('--x-min', type=float, default=x_min, show_default=True, help='Lower return bound.'),
            click.option('--x-max', type=float, default=x_max, show_default=True, help='Upper return bound.'),
        ]
        if alpha:
            options.insert(0, click.option('--alpha', type=float, default=0.5, show_default=True,
                                           help='Allocation constant.'))
        for option in reversed(options):
            f = option(f)
        return f
    return decorate


@click.group()
@click.option('-v', '--verbose', is_flag=True, help='Log progress to stderr.')
def cli(verbose):
    """Double linear trading policy: closed forms, simulation, backtests."""
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if verbose else logging.WARNING,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


@cli.command('analytics')
@policy_options()
@click.option('--mu', type=float, required=True, help='Per-period mean return.')
@click.option('--sigma', type=float, default=0.0, show_default=True, help='Per-period return std.')
@click.option('--k', type=int, required=True, help='Number of periods.')
@click.option('--critical-points', is_flag=True, help='Require mu+, mu- (needs 0 < alpha < 1, w > 0).')
@click.option('--format', 'fmt', type=click.Choice(['json', 'csv']), default='json', show_default=True)
@click.option('--out', default='-', help='Output file (default stdout).')
@click.option('--db', default=None, help='Record the run in this SQLite store.')
@exit_codes
def cmd_analytics(alpha, w, eps, v0, x_min, x_max, mu, sigma, k, critical_points, fmt, out, db):
    """Closed-form statistics of G_k."""
    config = AnalyticsConfig(policy=PolicyConfig(alpha, w, eps, v0, x_min, x_max), mu=mu, sigma=sigma, k=k,
                             critical_points=critical_points)
    p = require_valid(config.policy.policy())
    stats = ReturnStats(mu=config.mu, sigma=config.sigma)
    if config.critical_points:
        analytics.critical_mus(p, config.k)
    result = analytics.report(p, stats, config.k).to_dict()

    if fmt == 'json':
        _emit(_json_text(result), out)
    else:
        fields = ['expected_gain', 'variance', 'std', 'mu_plus', 'mu_minus', 'mu_zero', 'k']
        _emit(_csv_text(fields, [[_blank(result[name]) for name in fields]]), out)

    store = _store(db)
    if store:
        store.record_run('analytics', asdict(config), result=result)


def _blank(value):
    return '' if value is None else value


@cli.command('montecarlo')
@policy_options()
@click.option('--model', type=click.Choice(['two-point', 'gbm-jump']), default='two-point', show_default=True)
@click.option('--up', type=float, default=0.1, show_default=True)
@click.option('--down', type=float, default=-0.1, show_default=True)
@click.option('--p-up', type=float, default=0.5, show_default=True)
@click.option('--mu-star', type=float, default=0.0, show_default=True, help='Annual drift (gbm-jump).')
@click.option('--sigma-star', type=float, default=0.0, show_default=True, help='Annual volatility (gbm-jump).')
@click.option('--lam', type=float, default=0.1, show_default=True, help='Jump intensity.')
@click.option('--delta', type=float, default=0.05, show_default=True, help='Jump size fraction.')
@click.option('--dt', type=float, default=1.0 / 252.0, help='Period length in years.')
@click.option('--k', type=int, default=252, show_default=True)
@click.option('--n-paths', type=int, default=10000, show_default=True)
@click.option('--seed', type=U64, required=True)
@click.option('--workers', type=click.IntRange(min=1), default=1, show_default=True)
@click.option('--format', 'fmt', type=click.Choice(['json', 'csv']), default='json', show_default=True)
@click.option('--out', default='-')
@click.option('--db', default=None)
@exit_codes
def cmd_montecarlo(alpha, w, eps, v0, x_min, x_max, model, up, down, p_up, mu_star, sigma_star, lam, delta, dt,
                   k, n_paths, seed, workers, fmt, out, db):
    """Simulated mean/std of G_k against the closed forms."""
    config = MonteCarloConfig(policy=PolicyConfig(alpha, w, eps, v0, x_min, x_max), model=model, up=up, down=down,
                              p_up=p_up, mu_star=mu_star, sigma_star=sigma_star, lam=lam, delta=delta, dt=dt, k=k,
                              n_paths=n_paths)
    p = require_valid(config.policy.policy())
    if config.model == 'two-point':
        return_model = TwoPointModel(up=config.up, down=config.down, p_up=config.p_up)
    else:
        return_model = GbmJumpParams(mu_star=config.mu_star, sigma_star=config.sigma_star, lam=config.lam,
                                     delta=config.delta, dt=config.dt)
    comparison = montecarlo.compare(p, return_model, config.k, config.n_paths, SeedSpec(seed), workers=workers)
    result = comparison.to_dict()

    if fmt == 'json':
        _emit(_json_text(result), out)
    else:
        fields = ['mu', 'sigma', 'analytic_mean', 'analytic_std', 'mc_mean', 'mc_std', 'mc_se', 'n_paths', 'k']
        _emit(_csv_text(fields, [[result[name] for name in fields]]), out)

    store = _store(db)
    if store:
        store.record_run('montecarlo', asdict(config), seed=seed, result=result)


@cli.command('sweep')
@click.option('--mu-min', type=float, default=-0.9, show_default=True)
@click.option('--mu-max', type=float, default=0.9, show_default=True)
@click.option('--mu-step', type=float, default=0.01, show_default=True)
@click.option('--mu-list', type=FLOAT_LIST, default=None, help='Explicit drifts, e.g. -0.9,0,0.9.')
@click.option('--n-paths', type=int, default=10000, show_default=True)
@click.option('--n-periods', type=int, default=252, show_default=True)
@click.option('--alpha-list', type=FLOAT_LIST, default='0.5', show_default=True)
@click.option('--w', 'w', type=float, default=None, help='Decision weight (default 1/(1+eps)).')
@click.option('--eps', type=RATE, default='0.0001', show_default=True)
@click.option('--v0', type=float, default=1.0, show_default=True)
@click.option('--lam', type=float, default=0.1, show_default=True)
@click.option('--delta', type=float, default=0.05, show_default=True)
@click.option('--dt', type=float, default=1.0 / 252.0)
@click.option('--x-min', type=float, default=DEFAULT_X_MIN, show_default=True)
@click.option('--x-max', type=float, default=DEFAULT_X_MAX, show_default=True)
@click.option('--seed', type=U64, required=True)
@click.option('--workers', type=click.IntRange(min=1), default=1, show_default=True)
@click.option('--format', 'fmt', type=click.Choice(['csv', 'json']), default='csv', show_default=True)
@click.option('--out', default='-')
@click.option('--db', default=None)
@exit_codes
def cmd_sweep(mu_min, mu_max, mu_step, mu_list, n_paths, n_periods, alpha_list, w, eps, v0, lam, delta, dt,
              x_min, x_max, seed, workers, fmt, out, db):
    """Monte-Carlo vs closed-form G_k over a grid of annual drifts."""
    config = SweepConfig(mu_min=mu_min, mu_max=mu_max, mu_step=mu_step, mu_values=mu_list, n_paths=n_paths,
                         n_periods=n_periods, alphas=alpha_list, eps=eps, w=w, v0=v0, lam=lam, delta=delta, dt=dt,
                         x_min=x_min, x_max=x_max)
    rows = montecarlo.sweep(config, SeedSpec(seed), workers=workers)

    if fmt == 'json':
        _emit(_json_text({'config': asdict(config), 'seed': seed, 'rows': [row.to_dict() for row in rows]}), out)
    else:
        with_alpha = len(config.alphas) > 1
        header = (['alpha'] if with_alpha else []) + SWEEP_HEADER
        table = []
        for row in rows:
            data = row.to_dict()
            table.append(([row.alpha] if with_alpha else []) + [data[name] for name in SWEEP_HEADER])
        _emit(_csv_text(header, table), out)

    store = _store(db)
    if store:
        store.record_sweep(asdict(config), seed, rows)


def _trajectory_name(alpha: float) -> str:
    return f"trajectory_alpha_{alpha:g}.csv"


@cli.command('backtest')
@click.option('--prices', required=True, type=click.Path(dir_okay=False), help="CSV with header 'date,close'.")
@policy_options(x_bounds_default=False)
@click.option('--alpha-list', type=FLOAT_LIST, default=None, help='Several allocation constants, e.g. 0,0.5,1.')
@click.option('--rate', type=RATE, default='0', show_default=True, help='Per-period risk-free rate.')
@click.option('--out', default='.', show_default=True, help='Directory for trajectory files and summary.json.')
@click.option('--db', default=None)
@exit_codes
def cmd_backtest(prices, alpha, w, eps, v0, x_min, x_max, alpha_list, rate, out, db):
    """Run the policy over historical closes; one trajectory CSV per alpha."""
    config = BacktestConfig(prices_path=prices, alphas=alpha_list or [alpha], w=w, eps=eps, v0=v0, x_min=x_min,
                            x_max=x_max, out_dir=out)
    series = load_prices_file(config.prices_path)
    summary = summarize(to_returns(series))

    bounds = ReturnBounds(x_min=config.x_min, x_max=config.x_max)
    if config.x_min is None or config.x_max is None:
        observed = observed_bounds(summary)
        bounds = ReturnBounds(x_min=observed.x_min if config.x_min is None else config.x_min,
                              x_max=observed.x_max if config.x_max is None else config.x_max)
    base = PolicyParams(alpha=config.alphas[0], w=config.w, eps=config.eps, v0=config.v0, bounds=bounds)
    results = run_alphas(series, base, config.alphas, rate=rate)

    os.makedirs(config.out_dir, exist_ok=True)
    files = {}
    for alpha_value, result in results.items():
        path = os.path.join(config.out_dir, _trajectory_name(alpha_value))
        with open(path, 'w', encoding='utf-8', newline='') as handle:
            write_trajectory_csv(result, handle)
        files[alpha_value] = path
        logger.info("alpha=%g: final gain-loss %.6f -> %s", alpha_value, result.final_gain_loss, path)

    report = backtest_summary(results, files)
    text = _json_text(report)
    with open(os.path.join(config.out_dir, 'summary.json'), 'w', encoding='utf-8', newline='') as handle:
        handle.write(text)
    click.echo(text, nl=False)

    store = _store(db)
    if store:
        store.record_backtest(asdict(config), report)


main = cli

if __name__ == '__main__':
    cli()
