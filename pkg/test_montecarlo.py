import math
import random

import numpy as np
import pytest

import analytics
import montecarlo
from config_loader import SweepConfig
from core import (InvalidArgumentError, PolicyParams, PolicyValidationError,
                  ReturnBounds, max_weight)
from dynamics import run_path
from montecarlo import RunningMoments, brute_force, estimate
from stochastic import GbmJumpParams, SeedSpec, TwoPointModel, two_point_stats

SEED = 424242


def policy(alpha=0.5, w=0.5, eps=0.0, v0=1.0, x_min=-0.5, x_max=0.5):
    return PolicyParams(alpha=alpha, w=w, eps=eps, v0=v0, bounds=ReturnBounds(x_min, x_max))


def random_instance(rng):
    eps = rng.uniform(0.0, 0.01)
    p = policy(alpha=rng.random(), w=rng.uniform(0.0, max_weight(eps, 0.5)), eps=eps)
    up = rng.uniform(0.0, 0.5)
    down = rng.uniform(-0.5, up)
    return p, TwoPointModel(up=up, down=down, p_up=rng.uniform(0.05, 0.95))


def moderate_instance(rng):
    eps = rng.uniform(0.0, 0.002)
    p = policy(alpha=rng.random(), w=rng.uniform(0.1, max_weight(eps, 0.5)), eps=eps)
    up = rng.uniform(0.005, 0.05)
    down = rng.uniform(-0.05, -0.005)
    return p, TwoPointModel(up=up, down=down, p_up=rng.uniform(0.2, 0.8))


class TestRunningMoments:
    def test_merge_matches_concatenation(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(3.0, 2.0, 1000), rng.normal(-1.0, 0.5, 357)
        merged = RunningMoments.from_values(a).merge(RunningMoments.from_values(b))
        both = np.concatenate([a, b])
        assert merged.n == 1357
        assert merged.mean == pytest.approx(both.mean(), rel=1e-13)
        assert merged.variance == pytest.approx(both.var(ddof=1), rel=1e-12)

    def test_empty_and_single(self):
        empty = RunningMoments()
        single = RunningMoments.from_values([2.5])
        assert empty.merge(single) == single
        assert single.merge(empty) == single
        assert single.variance == 0.0
        assert RunningMoments.from_values([]).n == 0

    def test_large_offset_keeps_precision(self):
        values = 1e9 + np.arange(10_000) % 7
        moments = RunningMoments()
        for chunk in np.array_split(values, 13):
            moments = moments.merge(RunningMoments.from_values(chunk))
        assert moments.variance == pytest.approx(np.var(np.arange(10_000) % 7, ddof=1), rel=1e-9)


class TestEstimate:
    def test_zero_weight(self):
        result = estimate(policy(w=0.0), TwoPointModel(0.1, -0.1, 0.5), 10, 3000, SeedSpec(SEED))
        assert (result.mean, result.std, result.std_error) == (0.0, 0.0, 0.0)
        assert result.n_paths == 3000
        assert result.k == 10

    def test_zero_drift_two_periods(self):
        p = policy()
        model = TwoPointModel(0.1, -0.1, 0.5)
        assert analytics.expected_gain(p, two_point_stats(model), 2) == 0.0
        result = estimate(p, model, 2, 100_000, SeedSpec(SEED))
        assert abs(result.mean) <= 3 * result.std_error
        assert result.std_error == pytest.approx(result.std / math.sqrt(100_000))

    def test_worker_count_does_not_change_results(self):
        p = policy(alpha=0.3, w=0.8, eps=0.001)
        model = TwoPointModel(0.2, -0.15, 0.45)
        one = estimate(p, model, 20, 5000, SeedSpec(SEED), workers=1)
        three = estimate(p, model, 20, 5000, SeedSpec(SEED), workers=3)
        assert one == three

    def test_seed_changes_results(self):
        model = TwoPointModel(0.2, -0.15, 0.45)
        a = estimate(policy(), model, 20, 500, SeedSpec(1))
        b = estimate(policy(), model, 20, 500, SeedSpec(2))
        assert a.mean != b.mean

    def test_rejects_inadmissible_policy(self):
        with pytest.raises(PolicyValidationError):
            estimate(policy(w=5.0), TwoPointModel(0.1, -0.1, 0.5), 5, 10, SeedSpec(SEED))

    def test_rejects_bad_counts(self):
        with pytest.raises(InvalidArgumentError):
            estimate(policy(), TwoPointModel(0.1, -0.1, 0.5), 5, 0, SeedSpec(SEED))
        with pytest.raises(InvalidArgumentError):
            estimate(policy(), TwoPointModel(0.1, -0.1, 0.5), -1, 10, SeedSpec(SEED))
        with pytest.raises(InvalidArgumentError):
            estimate(policy(), TwoPointModel(0.1, -0.1, 0.5), 5, 10, SeedSpec(SEED), workers=0)

    def test_matches_closed_form(self):
        rng = random.Random(99)
        for index in range(20):
            p, model = moderate_instance(rng)
            k = rng.randint(5, 30)
            result = estimate(p, model, k, 100_000, SeedSpec(SEED + index))
            stats = two_point_stats(model)
            assert abs(result.mean - analytics.expected_gain(p, stats, k)) <= 4 * result.std_error
            expected_std = analytics.std_gain(p, stats, k)
            if expected_std > 0:
                assert result.std == pytest.approx(expected_std, rel=0.05)

    def test_compare_reports_both_sides(self):
        p = policy(alpha=0.6, w=0.4, eps=0.0005)
        model = TwoPointModel(0.05, -0.04, 0.5)
        comparison = montecarlo.compare(p, model, 30, 2000, SeedSpec(SEED))
        assert comparison.analytic_mean == analytics.expected_gain(p, two_point_stats(model), 30)
        assert comparison.mu == pytest.approx(0.005)
        data = comparison.to_dict()
        assert data['n_paths'] == 2000
        assert data['k'] == 30


class TestBruteForce:
    def test_two_period_enumeration(self):
        mean, variance = brute_force(policy(), TwoPointModel(0.1, -0.1, 0.5), 2)
        assert mean == pytest.approx(0.0, abs=1e-15)
        assert variance == pytest.approx(0.0025 ** 2, rel=1e-9)

    def test_zero_weight(self):
        for k in (0, 1, 7):
            assert brute_force(policy(w=0.0, eps=0.01), TwoPointModel(0.3, -0.2, 0.3), k) == (0.0, 0.0)

    def test_deterministic_up(self):
        p = policy(alpha=0.7, w=0.6, eps=0.002)
        mean, variance = brute_force(p, TwoPointModel(0.1, -0.1, 1.0), 9)
        assert mean == run_path([0.1] * 9, p).final_gain
        assert variance == 0.0

    def test_cost_guard(self):
        with pytest.raises(InvalidArgumentError):
            brute_force(policy(), TwoPointModel(0.1, -0.1, 0.5), 21)

    def test_matches_closed_forms(self):
        rng = random.Random(1234)
        for _ in range(1000):
            p, model = random_instance(rng)
            k = rng.randint(0, 12)
            stats = two_point_stats(model)
            mean, variance = brute_force(p, model, k)
            assert mean == pytest.approx(analytics.expected_gain(p, stats, k), rel=1e-10, abs=1e-13)
            assert variance == pytest.approx(analytics.variance_gain(p, stats, k), rel=1e-10, abs=1e-14)


class TestSweep:
    def config(self, **overrides):
        values = dict(mu_values=(0.9, -0.9, 0.0), n_paths=400, alphas=(0.5,))
        values.update(overrides)
        return SweepConfig(**values)

    def test_rows_in_drift_order(self):
        rows = montecarlo.sweep(self.config(), SeedSpec(SEED))
        assert [r.mu_star for r in rows] == [-0.9, 0.0, 0.9]
        assert all(r.mc.n_paths == 400 and r.mc.k == 252 for r in rows)
        for r in rows:
            assert 0.0 <= r.sigma_star <= 2 * abs(r.mu_star)

    def test_zero_drift_row_loses(self):
        rows = montecarlo.sweep(self.config(mu_values=(0.0,)), SeedSpec(SEED))
        assert rows[0].sigma_star == 0.0
        assert rows[0].analytic_mean < 0.0

    def test_no_costs_no_jumps_zero_drift(self):
        rows = montecarlo.sweep(self.config(mu_values=(0.0,), lam=0.0, eps=0.0, n_paths=50), SeedSpec(SEED))
        assert rows[0].analytic_mean == 0.0
        assert rows[0].mc.mean == 0.0

    def test_deterministic(self):
        first = montecarlo.sweep(self.config(n_paths=100), SeedSpec(SEED))
        second = montecarlo.sweep(self.config(n_paths=100), SeedSpec(SEED))
        assert first == second

    def test_several_alphas_share_grid_seeds(self):
        rows = montecarlo.sweep(self.config(alphas=(0.25, 0.75), n_paths=100), SeedSpec(SEED))
        assert [(r.alpha, r.mu_star) for r in rows] == [(0.25, -0.9), (0.25, 0.0), (0.25, 0.9),
                                                        (0.75, -0.9), (0.75, 0.0), (0.75, 0.9)]
        assert [r.sigma_star for r in rows[:3]] == [r.sigma_star for r in rows[3:]]

    def test_volatility_draw(self):
        assert montecarlo.sweep_volatility(0.0, 5) == 0.0
        z = montecarlo.sweep_volatility(0.4, 5)
        assert 0.0 <= z <= 0.8
        assert z == montecarlo.sweep_volatility(0.4, 5)

    def test_desk_scale_grid(self):
        config = SweepConfig(mu_values=(-0.9, -0.5, -0.1, 0.0, 0.1, 0.5, 0.9), n_paths=2000)
        assert config.weight() == pytest.approx(1 / 1.0001)
        rows = montecarlo.sweep(config, SeedSpec(SEED))
        assert len(rows) == 7
        for r in rows:
            assert abs(r.mc.mean - r.analytic_mean) <= 3 * r.mc.std_error, r
        by_drift = {r.mu_star: r for r in rows}
        assert by_drift[-0.9].mc.mean > 0
        assert by_drift[0.9].mc.mean > 0
        assert by_drift[0.0].mc.mean <= 0

    def test_exact_and_rule_of_thumb_moments_differ(self):
        rows = montecarlo.sweep(self.config(mu_values=(0.5,), n_paths=50), SeedSpec(SEED))
        assert rows[0].approx_mean != rows[0].analytic_mean
        assert set(rows[0].to_dict()) >= {'approx_mean', 'approx_std', 'mc_se'}


def test_gbm_estimate_is_reproducible_across_workers():
    p = policy(w=0.9, eps=0.0001, x_min=-0.99, x_max=1.0)
    params = GbmJumpParams(mu_star=0.3, sigma_star=0.4, lam=0.1, delta=0.05)
    one = estimate(p, params, 252, 4500, SeedSpec(SEED), workers=1)
    two = estimate(p, params, 252, 4500, SeedSpec(SEED), workers=2)
    assert one == two
