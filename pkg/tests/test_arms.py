import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from banditmeans.arms import arm_from_config
from banditmeans.errors import ConfigError

# centered absolute p-norms, independently derived
GAUSSIAN_P1 = 0.797884560802865  # sqrt(2/pi)
GAUSSIAN_P3 = 1.168575255030794  # (2 sqrt(2/pi))^(1/3) ... frozen numerically
GAUSSIAN_P4 = 1.316074012952492  # 3^(1/4)
T5_P2 = 1.290994448735806  # sqrt(5/3)
T5_P4 = 2.236067977499790  # 5^(1/4) scaled: E[X^4]=25 for df=5 -> 25^(1/4)
UNIFORM01_P2 = 0.288675134594813  # 1/sqrt(12)
EXP_RATE2_P1 = 0.367879441171442  # (2/e)/2
EXP_RATE2_P2 = 0.5
EXP_RATE2_P3 = 0.670783342938301
BERN03_P2 = 0.458257569495584  # sqrt(0.21)


@pytest.mark.parametrize(
    "cfg,p,want",
    [
        ({"family": "gaussian", "mean": 0.0, "sd": 1.0}, 1.0, GAUSSIAN_P1),
        ({"family": "gaussian", "mean": 0.0, "sd": 1.0}, 2.0, 1.0),
        ({"family": "gaussian", "mean": 0.0, "sd": 1.0}, 3.0, GAUSSIAN_P3),
        ({"family": "gaussian", "mean": 0.0, "sd": 1.0}, 4.0, GAUSSIAN_P4),
        ({"family": "gaussian", "mean": 5.0, "sd": 2.0}, 2.0, 2.0),
        ({"family": "student-t", "df": 5.0}, 2.0, T5_P2),
        ({"family": "student-t", "df": 5.0}, 4.0, T5_P4),
        ({"family": "uniform", "lo": 0.0, "hi": 1.0}, 2.0, UNIFORM01_P2),
        ({"family": "exponential", "rate": 2.0}, 1.0, EXP_RATE2_P1),
        ({"family": "exponential", "rate": 2.0}, 2.0, EXP_RATE2_P2),
        ({"family": "exponential", "rate": 2.0}, 3.0, EXP_RATE2_P3),
        ({"family": "bernoulli", "mean": 0.3}, 2.0, BERN03_P2),
    ],
)
def test_centered_pnorm_frozen_oracles(cfg, p, want):
    arm = arm_from_config(cfg)
    assert arm.centered_pnorm(p) == pytest.approx(want, rel=1e-6)


def test_variance_matches_squared_p2():
    for cfg in (
        {"family": "gaussian", "mean": 1.0, "sd": 0.7},
        {"family": "bernoulli", "mean": 0.25},
        {"family": "exponential", "rate": 3.0},
        {"family": "student-t", "df": 5.0, "loc": 0.2},
        {"family": "uniform", "lo": -1.0, "hi": 2.0},
    ):
        arm = arm_from_config(cfg)
        assert arm.variance() == pytest.approx(arm.centered_pnorm(2.0) ** 2, rel=1e-9)


def test_student_t_heavy_moment_is_infinite():
    arm = arm_from_config({"family": "student-t", "df": 5.0})
    assert math.isinf(arm.centered_pnorm(5.0))


def test_mean_fields():
    assert arm_from_config({"family": "gaussian", "mean": 1.5, "sd": 1.0}).mean == 1.5
    assert arm_from_config({"family": "bernoulli", "mean": 0.3}).mean == 0.3
    assert arm_from_config({"family": "exponential", "rate": 2.0}).mean == pytest.approx(0.5)
    assert arm_from_config({"family": "student-t", "df": 5.0, "loc": 0.2}).mean == pytest.approx(0.2)
    assert arm_from_config({"family": "uniform", "lo": 0.0, "hi": 1.0}).mean == pytest.approx(0.5)


def test_exact_quantile_and_cdf_round_trip():
    arm = arm_from_config({"family": "gaussian", "mean": 0.0, "sd": 1.0})
    q = arm.exact_quantile(0.05)
    assert q == pytest.approx(1.6448536269514722, abs=1e-9)
    assert arm.cdf(q) == pytest.approx(0.95, abs=1e-12)


def test_draw_reproducible_and_right_moments():
    arm = arm_from_config({"family": "gaussian", "mean": 2.0, "sd": 3.0})
    gen = np.random.default_rng(0)
    x = arm.draw(gen, 200_000)
    y = arm.draw(np.random.default_rng(0), 200_000)
    np.testing.assert_array_equal(x, y)
    assert x.mean() == pytest.approx(2.0, abs=0.05)
    assert x.std() == pytest.approx(3.0, abs=0.05)


def test_bernoulli_draw_is_zero_one():
    arm = arm_from_config({"family": "bernoulli", "mean": 0.3})
    x = arm.draw(np.random.default_rng(1), 10_000)
    assert set(np.unique(x)) <= {0.0, 1.0}
    assert x.mean() == pytest.approx(0.3, abs=0.02)


@given(
    st.sampled_from(
        [
            {"family": "gaussian", "mean": 0.0, "sd": 1.0},
            {"family": "exponential", "rate": 2.0},
            {"family": "uniform", "lo": -1.0, "hi": 3.0},
            {"family": "bernoulli", "mean": 0.4},
        ]
    ),
    st.floats(min_value=1.0, max_value=3.5),
    st.floats(min_value=0.1, max_value=0.5),
)
@settings(max_examples=40, deadline=None)
def test_centered_pnorm_nondecreasing_in_p(cfg, p, bump):
    # Lyapunov: ||X - mu||_p is nondecreasing in p
    arm = arm_from_config(cfg)
    assert arm.centered_pnorm(p) <= arm.centered_pnorm(p + bump) * (1 + 1e-9)


def test_exp_family_grid_arm():
    cfg = {
        "family": "exp-family-grid",
        "support": [0.0, 1.0, 2.0],
        "weights": [0.25, 0.5, 0.25],
        "theta": 0.0,
        "window": 3.0,
    }
    arm = arm_from_config(cfg)
    assert arm.mean == pytest.approx(1.0, abs=1e-6)
    x = arm.draw(np.random.default_rng(2), 50_000)
    assert set(np.unique(x)) <= {0.0, 1.0, 2.0}
    assert x.mean() == pytest.approx(1.0, abs=0.02)
    lp = arm.log_partition()
    assert lp.mean_at(0.0) == pytest.approx(1.0, abs=1e-6)


def test_arm_from_config_errors():
    with pytest.raises(ConfigError):
        arm_from_config({"family": "gamma"})
    with pytest.raises(ConfigError):
        arm_from_config({"mean": 0.0})
    with pytest.raises(ConfigError):
        arm_from_config({"family": "gaussian", "mean": 0.0, "sd": -1.0})
    with pytest.raises(ConfigError):
        arm_from_config({"family": "bernoulli", "mean": 1.5})
