import math

import numpy as np
import pytest

from banditmeans.errors import ConfigError
from banditmeans.policies import (
    chooser_from_config,
    rewinder_from_config,
    sampler_from_config,
    stopper_from_config,
)
from banditmeans.protocol import DataView


def _view(actions, rewards, k=2):
    a = np.asarray(actions, dtype=np.int32)
    r = np.asarray(rewards, dtype=float)
    return DataView(k, a, r, len(a))


def test_uniform_sampler_vector():
    s = sampler_from_config({"kind": "uniform-random"})
    v = _view([0], [1.0], k=4)
    p = s(2, v, np.random.default_rng(0))
    np.testing.assert_allclose(p, [0.25] * 4)


def test_epsilon_greedy_vector_composition():
    # epsilon/k everywhere plus 1-epsilon on the empirical best
    s = sampler_from_config({"kind": "epsilon-greedy", "epsilon": 0.2})
    v = _view([0, 1], [1.0, 5.0])
    p = s(3, v, np.random.default_rng(0))
    np.testing.assert_allclose(p, [0.1, 0.9])
    assert p.sum() == pytest.approx(1.0)


def test_epsilon_greedy_zero_is_pure_greedy():
    s = sampler_from_config({"kind": "epsilon-greedy", "epsilon": 0.0})
    v = _view([0, 1], [3.0, -1.0])
    np.testing.assert_allclose(s(3, v, np.random.default_rng(0)), [1.0, 0.0])


def test_ucb1_prefers_undersampled():
    s = sampler_from_config({"kind": "ucb1"})
    v = _view([0, 0, 0, 1], [0.0, 0.0, 0.0, 0.0])
    p = s(5, v, np.random.default_rng(0))
    np.testing.assert_allclose(p, [0.0, 1.0])  # equal means, fewer pulls wins


def test_thompson_samplers_return_one_hot():
    for cfg in ({"kind": "thompson-gaussian"}, {"kind": "thompson-bernoulli"}):
        s = sampler_from_config(cfg)
        v = _view([0, 1], [1.0, 0.0])
        p = s(3, v, np.random.default_rng(7))
        assert sorted(p) == [0.0, 1.0]


def test_thompson_gaussian_favors_better_arm():
    s = sampler_from_config({"kind": "thompson-gaussian"})
    v = _view([0, 1] * 50, [2.0, -2.0] * 50)
    gen = np.random.default_rng(3)
    picks = [int(np.argmax(s(101, v, gen))) for _ in range(200)]
    assert np.mean(picks) < 0.05


def test_outlier_gate_switches_on_large_first_draw():
    s = sampler_from_config({"kind": "outlier-gate", "alpha": 0.1})
    z = 1.6448536269514722  # upper 5% gaussian point
    stay = s(2, _view([0], [z - 0.01]), np.random.default_rng(0))
    leave = s(2, _view([0], [z + 0.01]), np.random.default_rng(0))
    np.testing.assert_allclose(stay, [1.0, 0.0])
    np.testing.assert_allclose(leave, [0.0, 1.0])
    # first pull always goes to the watched arm
    first = s(1, _view([], []), np.random.default_rng(0))
    np.testing.assert_allclose(first, [1.0, 0.0])


def test_duel_commit_plays_both_then_winner():
    s = sampler_from_config({"kind": "duel-commit"})
    gen = np.random.default_rng(0)
    np.testing.assert_allclose(s(1, _view([], []), gen), [1.0, 0.0])
    np.testing.assert_allclose(s(2, _view([0], [0.3]), gen), [0.0, 1.0])
    won = s(3, _view([0, 1], [0.3, 0.9]), gen)
    np.testing.assert_allclose(won, [0.0, 1.0])
    lost = s(3, _view([0, 1], [0.9, 0.3]), gen)
    np.testing.assert_allclose(lost, [1.0, 0.0])


def test_fixed_stopper():
    st = stopper_from_config({"kind": "fixed", "t_star": 4})
    v = _view([0] * 3, [0.0] * 3, k=1)
    assert not st(3, v, None)
    v4 = _view([0] * 4, [0.0] * 4, k=1)
    assert st(4, v4, None)


def test_poisson_plus_one_stopper_state():
    st = stopper_from_config({"kind": "poisson-plus-one", "rate": 3.0})
    st.reset(np.random.default_rng(0))
    t1 = next(t for t in range(1, 100) if st(t, _view([0] * t, [0.0] * t, k=1), None))
    st.reset(np.random.default_rng(0))
    t2 = next(t for t in range(1, 100) if st(t, _view([0] * t, [0.0] * t, k=1), None))
    assert t1 == t2 >= 1
    st.reset(np.random.default_rng(1))
    draws = set()
    for seed in range(20):
        st.reset(np.random.default_rng(seed))
        draws.add(next(t for t in range(1, 200) if st(t, _view([0] * t, [0.0] * t, k=1), None)))
    assert len(draws) > 3  # actually random


def test_lil_boundary_min_count_and_crossing():
    st = stopper_from_config({"kind": "lil", "arm": 0, "min_count": 3, "mean": 0.0, "sd": 1.0})
    big = [10.0, 10.0, 10.0]
    assert not st(2, _view([0, 0], big[:2], k=1), None)  # below min_count
    assert st(3, _view([0, 0, 0], big, k=1), None)
    # just past the sd*sqrt(n loglog n) envelope is a crossing
    n = 10
    s_star = math.sqrt(n * math.log(math.log(n)))
    rew = [(s_star + 1e-9) / n] * n
    assert st(n, _view([0] * n, rew, k=1), None)
    rew_low = [(s_star - 0.01) / n] * n
    assert not st(n, _view([0] * n, rew_low, k=1), None)
    with pytest.raises(ConfigError):
        stopper_from_config({"kind": "lil", "arm": 0, "min_count": 2, "mean": 0.0, "sd": 1.0})


def test_mean_threshold_stopper():
    st = stopper_from_config({"kind": "mean-threshold", "arm": 0, "level": 0.5})
    assert st(2, _view([0, 0], [0.6, 0.6], k=1), None)
    assert not st(2, _view([0, 0], [0.4, 0.4], k=1), None)


def test_line_crossing_stopper_clock():
    st = stopper_from_config({"kind": "line-crossing", "slope": 1.0, "intercept": 1.0, "dt": 0.5})
    assert st.dt == 0.5
    # need sum >= 1*t*0.5 + 1
    assert not st(2, _view([0, 0], [0.9, 0.9], k=1), None)
    assert st(2, _view([0, 0], [1.1, 1.1], k=1), None)


def test_choosers():
    v = _view([0, 0, 1], [1.0, 2.0, 9.0])
    assert chooser_from_config({"kind": "fixed", "arm": 1})(v, None) == 1
    assert chooser_from_config({"kind": "best-empirical"})(v, None) == 1
    assert chooser_from_config({"kind": "worst-empirical"})(v, None) == 0
    assert chooser_from_config({"kind": "most-sampled"})(v, None) == 0


def test_random_nonadaptive_chooser_distribution():
    c = chooser_from_config({"kind": "random-nonadaptive", "probs": [0.25, 0.75]})
    v = _view([0], [0.0])
    gen = np.random.default_rng(0)
    picks = np.array([c(v, gen) for _ in range(4000)])
    assert picks.mean() == pytest.approx(0.75, abs=0.03)
    with pytest.raises(ConfigError):
        chooser_from_config({"kind": "random-nonadaptive", "probs": [0.5, 0.6]})


def test_best_empirical_ignores_unseen_arms():
    v = _view([0, 0], [5.0, 5.0], k=3)
    assert chooser_from_config({"kind": "best-empirical"})(v, None) == 0
    assert chooser_from_config({"kind": "worst-empirical"})(v, None) == 0


def test_rewinders():
    v = _view([0, 0, 0, 0], [4.0, -4.0, 1.0, 1.0], k=1)
    assert rewinder_from_config({"kind": "none"})(v, 1, 0) == 4
    # prefix means: 4, 0, 1/3, 1/2 -> argmax at t=1
    assert rewinder_from_config({"kind": "argmax-mean"})(v, 1, 0) == 1
    # floor excludes t=1: best among t in {2,3,4} is t=4 (mean 1/2)
    assert rewinder_from_config({"kind": "argmax-mean"})(v, 2, 0) == 4
    assert rewinder_from_config({"kind": "fixed-fraction", "fraction": 0.5})(v, 1, 0) == 2
    assert rewinder_from_config({"kind": "fixed-fraction", "fraction": 0.5})(v, 3, 0) == 3
    with pytest.raises(ConfigError):
        rewinder_from_config({"kind": "fixed-fraction", "fraction": 0.0})


def test_argmax_mean_earliest_tie():
    v = _view([0, 0, 0], [1.0, 1.0, 1.0], k=1)
    assert rewinder_from_config({"kind": "argmax-mean"})(v, 1, 0) == 1


def test_factories_reject_unknown_kinds():
    with pytest.raises(ConfigError):
        sampler_from_config({"kind": "softmax"})
    with pytest.raises(ConfigError):
        stopper_from_config({"kind": "never"})
    with pytest.raises(ConfigError):
        chooser_from_config({"kind": "median"})
    with pytest.raises(ConfigError):
        rewinder_from_config({"kind": "latest"})
    with pytest.raises(ConfigError):
        sampler_from_config({"epsilon": 0.1})
    with pytest.raises(ConfigError):
        sampler_from_config({"kind": "epsilon-greedy"})  # missing epsilon
