import math
import random

import pytest

from core import (InvalidArgumentError, PolicyParams, PolicyValidationError,
                  ReturnBounds, ReturnStats, bounds_violations, max_weight,
                  require_valid, validate_policy)


def policy(alpha=0.5, w=0.0, eps=0.0, v0=1.0, x_min=-0.5, x_max=0.5):
    return PolicyParams(alpha=alpha, w=w, eps=eps, v0=v0, bounds=ReturnBounds(x_min, x_max))


def test_max_weight_examples():
    assert max_weight(0.0, 1.0) == 1.0
    assert max_weight(0.0001, 0.1875) == pytest.approx(1 / 1.0001, rel=1e-15)
    assert max_weight(1.0, 1.0) == 0.5


def test_max_weight_keeps_both_accounts_solvent():
    rng = random.Random(7)
    for _ in range(1000):
        eps = rng.random()
        x_max = rng.uniform(1e-3, 5.0)
        w_max = max_weight(eps, x_max)
        assert 0.0 < w_max <= 1.0
        assert w_max * (1 + eps) <= 1.0 + 1e-15
        assert w_max * (x_max + eps) <= 1.0 + 1e-15


@pytest.mark.parametrize("eps,x_max", [(-0.1, 1.0), (1.5, 1.0), (0.0, 0.0), (0.0, -1.0),
                                       (math.nan, 1.0), (0.0, math.inf)])
def test_max_weight_rejects_bad_inputs(eps, x_max):
    with pytest.raises(InvalidArgumentError):
        max_weight(eps, x_max)


def test_zero_weight_always_admissible():
    assert validate_policy(policy(w=0.0)).valid


def test_weight_above_w_max_rejected():
    result = validate_policy(policy(w=0.9, eps=0.5, x_min=-0.5, x_max=1.5))
    assert not result.valid
    assert result.names() == ['w_range']
    assert '0.5' in result.violations[0].message


def test_alpha_out_of_range_rejected():
    result = validate_policy(policy(alpha=1.2, w=0.1))
    assert result.names() == ['alpha_range']


def test_every_violation_is_reported():
    result = validate_policy(policy(alpha=-0.1, w=-1.0, eps=2.0, v0=0.0, x_min=0.1, x_max=-0.2))
    assert set(result.names()) == {'alpha_range', 'w_range', 'eps_range', 'v0_positive',
                                   'x_min_range', 'x_max_range'}


def test_non_finite_parameters():
    assert validate_policy(policy(w=math.nan)).names() == ['finite']
    assert validate_policy(policy(v0=math.inf)).names() == ['finite']


def test_validate_accepts_exactly_the_admissible_set():
    rng = random.Random(11)
    for _ in range(2000):
        alpha = rng.uniform(-0.2, 1.2)
        eps = rng.uniform(-0.1, 1.1)
        x_max = rng.uniform(0.05, 2.0)
        w = rng.uniform(-0.1, 1.2)
        p = policy(alpha=alpha, w=w, eps=eps, x_max=x_max)
        admissible = (0 <= alpha <= 1 and 0 <= eps <= 1 and w >= 0
                      and w <= min(1 / (1 + eps), 1 / (x_max + eps)))
        assert validate_policy(p).valid == admissible


def test_require_valid_raises_with_result():
    with pytest.raises(PolicyValidationError) as info:
        require_valid(policy(alpha=2.0))
    assert info.value.result.names() == ['alpha_range']
    assert isinstance(info.value, ValueError)


def test_require_valid_returns_policy():
    p = policy(w=0.5)
    assert require_valid(p) is p


def test_policy_helpers():
    p = policy(w=0.5, eps=0.01, x_max=1.0)
    assert p.w_max == pytest.approx(1 / 1.01)
    assert p.with_alpha(0.25).alpha == 0.25
    assert p.with_weight(0.1).w == 0.1
    assert p.with_eps(0.0).eps == 0.0
    assert p.to_dict() == {'alpha': 0.5, 'w': 0.5, 'eps': 0.01, 'v0': 1.0, 'x_min': -0.5, 'x_max': 1.0}


def test_return_stats_second_moment():
    assert ReturnStats(mu=0.1, sigma=0.2).second_moment == pytest.approx(0.05)


def test_bounds_violations_closed_interval():
    bounds = ReturnBounds(-0.1, 0.1)
    assert bounds_violations([-0.1, 0.1, 0.0], bounds) == []
    assert bounds_violations([0.2, 0.0, -0.3], bounds) == [0, 2]
