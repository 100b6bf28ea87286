"""Engine path checks.

Every vectorized path must agree with the reference per-episode loop in
distribution (they share no randomness, so the comparison is purely
statistical), and the block structure must never leak into results.
"""

import math

import numpy as np
import pytest

from banditmeans._rng import block_stream
from banditmeans.engine import (
    BLOCK_SIZE,
    _clone_stream_for_replay,
    _stepwise_action_fn,
    simulate,
)
from banditmeans.errors import ConfigError

GAUSS = {"family": "gaussian", "mean": 0.2, "sd": 1.0}
BERN = {"family": "bernoulli", "mean": 0.35}

UNIFORM = {"kind": "uniform-random"}
NO_REW = {"kind": "none"}
BEST = {"kind": "best-empirical"}
ARM0 = {"kind": "fixed", "arm": 0}


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _assert_same_law(xa, xb, label, sigmas=4.0):
    ma, sa = _mean_se(xa)
    mb, sb = _mean_se(xb)
    tol = sigmas * math.hypot(sa, sb) + 1e-9
    assert abs(ma - mb) <= tol, f"{label}: {ma:.6g} vs {mb:.6g} exceeds tol {tol:.3g}"


def _compare_batches(a, b, label):
    assert a.k_arms == b.k_arms
    _assert_same_law(a.stop_time, b.stop_time, f"{label}/stop-time")
    _assert_same_law(a.truncated, b.truncated, f"{label}/truncated")
    for arm in range(a.k_arms):
        _assert_same_law(a.counts_stop[:, arm], b.counts_stop[:, arm], f"{label}/count{arm}")
        _assert_same_law(a.sums_stop[:, arm], b.sums_stop[:, arm], f"{label}/sum{arm}")
        _assert_same_law(
            a.sums_stop[:, arm] ** 2, b.sums_stop[:, arm] ** 2, f"{label}/sumsq{arm}"
        )
        _assert_same_law(a.chosen == arm, b.chosen == arm, f"{label}/chosen{arm}")
    _assert_same_law(a.rewound_time, b.rewound_time, f"{label}/rew-time")
    # rewound stats only at the chosen arm: fast paths track nothing else
    ra, rb = np.arange(a.n_reps), np.arange(b.n_reps)
    _assert_same_law(
        a.counts_rew[ra, a.chosen], b.counts_rew[rb, b.chosen], f"{label}/rew-count"
    )
    _assert_same_law(a.sums_rew[ra, a.chosen], b.sums_rew[rb, b.chosen], f"{label}/rew-sum")


# -- path dispatch -------------------------------------------------------------


def test_auto_picks_expected_paths():
    cases = [
        ([GAUSS], UNIFORM, {"kind": "fixed", "t_star": 10}, ARM0, NO_REW, 0.0, "walk"),
        (
            [GAUSS, GAUSS],
            {"kind": "outlier-gate", "alpha": 0.1},
            {"kind": "fixed", "t_star": 10},
            ARM0,
            NO_REW,
            0.0,
            "commit",
        ),
        ([GAUSS, BERN], UNIFORM, {"kind": "fixed", "t_star": 10}, BEST, NO_REW, 0.0, "multinomial"),
        (
            [GAUSS, GAUSS],
            {"kind": "epsilon-greedy", "epsilon": 0.1},
            {"kind": "fixed", "t_star": 10},
            BEST,
            NO_REW,
            1.0,
            "stepwise",
        ),
        # student-t breaks the multinomial sum law, so this falls back
        (
            [GAUSS, {"family": "student-t", "df": 5.0}],
            UNIFORM,
            {"kind": "fixed", "t_star": 10},
            BEST,
            NO_REW,
            0.0,
            "reference",
        ),
    ]
    for arms, samp, stop, choose, rew, warm, want in cases:
        _, path = simulate(arms, samp, stop, choose, rew, 8, 1, 100, warmup=warm)
        assert path == want, f"{want}: got {path}"


def test_reference_engine_can_be_forced():
    _, path = simulate(
        [GAUSS, BERN], UNIFORM, {"kind": "fixed", "t_star": 10}, BEST, NO_REW, 8, 1, 100,
        engine="reference",
    )
    assert path == "reference"


def test_simulate_argument_validation():
    stop = {"kind": "fixed", "t_star": 10}
    with pytest.raises(ConfigError):
        simulate([GAUSS], UNIFORM, stop, ARM0, NO_REW, 0, 1, 100)
    with pytest.raises(ConfigError):
        simulate([GAUSS], UNIFORM, stop, ARM0, NO_REW, 8, 1, 0)
    with pytest.raises(ConfigError):
        simulate([GAUSS], UNIFORM, stop, ARM0, NO_REW, 8, 1, 100, engine="fastest")
    with pytest.raises(ConfigError):
        # warmup needs 2 * 60 = 120 steps, cap is 100
        simulate([GAUSS, GAUSS], UNIFORM, stop, BEST, NO_REW, 8, 1, 100, warmup=60.0)
    with pytest.raises(ConfigError):
        # single-arm walk can only track arm 0
        simulate(
            [GAUSS], UNIFORM,
            {"kind": "lil", "arm": 1, "min_count": 5, "mean": 0.0, "sd": 1.0},
            ARM0, NO_REW, 8, 1, 100,
        )


# -- determinism and block invariance -----------------------------------------


def test_same_seed_same_batch():
    args = ([GAUSS, BERN], UNIFORM, {"kind": "fixed", "t_star": 30}, BEST, NO_REW, 500, 77, 1000)
    a, _ = simulate(*args)
    b, _ = simulate(*args)
    np.testing.assert_array_equal(a.stop_time, b.stop_time)
    np.testing.assert_array_equal(a.chosen, b.chosen)
    np.testing.assert_array_equal(a.counts_stop, b.counts_stop)
    np.testing.assert_array_equal(a.sums_stop, b.sums_stop)


def test_worker_count_does_not_change_results():
    n = BLOCK_SIZE + 900  # two blocks
    args = ([GAUSS, BERN], UNIFORM, {"kind": "fixed", "t_star": 25}, BEST, NO_REW, n, 78, 1000)
    one, _ = simulate(*args, workers=1)
    two, _ = simulate(*args, workers=2)
    assert one.n_reps == n
    np.testing.assert_array_equal(one.stop_time, two.stop_time)
    np.testing.assert_array_equal(one.chosen, two.chosen)
    np.testing.assert_array_equal(one.counts_stop, two.counts_stop)
    np.testing.assert_array_equal(one.sums_stop, two.sums_stop)


def test_replay_clone_restarts_the_block_stream():
    gen = block_stream(123, 0)
    gen.standard_normal(1000)  # advance well into the stream
    clone = _clone_stream_for_replay(gen)
    fresh = block_stream(123, 0)
    np.testing.assert_array_equal(clone.standard_normal(16), fresh.standard_normal(16))


# -- multinomial path ----------------------------------------------------------


def test_multinomial_matches_reference():
    arms = [GAUSS, BERN]
    stop = {"kind": "fixed", "t_star": 40}
    fast, path = simulate(arms, UNIFORM, stop, BEST, NO_REW, 2500, 901, 10_000)
    assert path == "multinomial"
    ref, _ = simulate(arms, UNIFORM, stop, BEST, NO_REW, 2500, 901, 10_000, engine="reference")
    _compare_batches(fast, ref, "multinomial")


def test_multinomial_warmup_floor_and_truncation():
    arms = [GAUSS, BERN]
    # t_star below the warmup total: both engines stop right as warmup ends
    early, _ = simulate(arms, UNIFORM, {"kind": "fixed", "t_star": 2}, BEST, NO_REW,
                        400, 902, 1000, warmup=3.0)
    ref, _ = simulate(arms, UNIFORM, {"kind": "fixed", "t_star": 2}, BEST, NO_REW,
                      400, 902, 1000, warmup=3.0, engine="reference")
    for b in (early, ref):
        assert np.all(b.stop_time == 6)
        assert np.all(b.counts_stop == 3.0)
        assert not np.any(b.truncated)
    # t_star beyond the cap: truncated flag set, stop pinned at the cap
    late, _ = simulate(arms, UNIFORM, {"kind": "fixed", "t_star": 80}, BEST, NO_REW, 400, 903, 50)
    ref2, _ = simulate(arms, UNIFORM, {"kind": "fixed", "t_star": 80}, BEST, NO_REW,
                       400, 903, 50, engine="reference")
    for b in (late, ref2):
        assert np.all(b.truncated)
        assert np.all(b.stop_time == 50)
    _assert_same_law(late.sums_stop[:, 0], ref2.sums_stop[:, 0], "late/sum0")


def test_vector_chooser_random_nonadaptive_frequencies():
    probs = [0.2, 0.8]
    batch, path = simulate(
        [GAUSS, BERN], UNIFORM, {"kind": "fixed", "t_star": 5},
        {"kind": "random-nonadaptive", "probs": probs}, NO_REW, 20_000, 904, 100,
    )
    assert path == "multinomial"
    for arm, p in enumerate(probs):
        got = float(np.mean(batch.chosen == arm))
        se = math.sqrt(p * (1 - p) / batch.n_reps)
        assert abs(got - p) <= 4 * se


# -- commit path ---------------------------------------------------------------


def test_commit_outlier_gate_matches_reference():
    arms = [{"family": "gaussian", "mean": 0.4, "sd": 1.0},
            {"family": "gaussian", "mean": 0.1, "sd": 2.0}]
    samp = {"kind": "outlier-gate", "alpha": 0.2}
    stop = {"kind": "fixed", "t_star": 50}
    choose = {"kind": "most-sampled"}
    fast, path = simulate(arms, samp, stop, choose, NO_REW, 2500, 905, 10_000)
    assert path == "commit"
    ref, _ = simulate(arms, samp, stop, choose, NO_REW, 2500, 905, 10_000, engine="reference")
    _compare_batches(fast, ref, "outlier-gate")


def test_commit_duel_matches_reference():
    arms = [{"family": "gaussian", "mean": 0.0, "sd": 1.0},
            {"family": "gaussian", "mean": 0.3, "sd": 1.5}]
    samp = {"kind": "duel-commit"}
    stop = {"kind": "fixed", "t_star": 40}
    fast, path = simulate(arms, samp, stop, BEST, NO_REW, 2500, 906, 10_000)
    assert path == "commit"
    ref, _ = simulate(arms, samp, stop, BEST, NO_REW, 2500, 906, 10_000, engine="reference")
    _compare_batches(fast, ref, "duel-commit")


# -- walk path -----------------------------------------------------------------


def test_walk_mean_threshold_matches_reference():
    arms = [{"family": "gaussian", "mean": 0.3, "sd": 1.0}]
    stop = {"kind": "mean-threshold", "level": 0.1, "arm": 0}
    fast, path = simulate(arms, UNIFORM, stop, ARM0, NO_REW, 3000, 907, 100_000)
    assert path == "walk"
    ref, _ = simulate(arms, UNIFORM, stop, ARM0, NO_REW, 3000, 907, 100_000, engine="reference")
    _compare_batches(fast, ref, "walk-threshold")


def test_walk_lil_matches_reference_and_respects_count_floor():
    arms = [{"family": "gaussian", "mean": 0.6, "sd": 1.0}]
    stop = {"kind": "lil", "arm": 0, "min_count": 5, "mean": 0.0, "sd": 1.0}
    fast, path = simulate(arms, UNIFORM, stop, ARM0, NO_REW, 2500, 908, 10_000)
    assert path == "walk"
    ref, _ = simulate(arms, UNIFORM, stop, ARM0, NO_REW, 2500, 908, 10_000, engine="reference")
    assert int(fast.stop_time.min()) >= 5
    assert int(ref.stop_time.min()) >= 5
    _compare_batches(fast, ref, "walk-lil")


def test_walk_poisson_target_matches_reference():
    arms = [GAUSS]
    stop = {"kind": "poisson-plus-one", "rate": 6.0}
    fast, path = simulate(arms, UNIFORM, stop, ARM0, NO_REW, 2500, 909, 1000)
    assert path == "walk"
    ref, _ = simulate(arms, UNIFORM, stop, ARM0, NO_REW, 2500, 909, 1000, engine="reference")
    assert int(fast.stop_time.min()) >= 1
    _compare_batches(fast, ref, "walk-poisson")


def test_walk_truncation_when_level_is_unreachable():
    arms = [{"family": "gaussian", "mean": 0.0, "sd": 1.0}]
    stop = {"kind": "mean-threshold", "level": 5.0, "arm": 0}
    fast, _ = simulate(arms, UNIFORM, stop, ARM0, NO_REW, 300, 910, 50)
    ref, _ = simulate(arms, UNIFORM, stop, ARM0, NO_REW, 300, 910, 50, engine="reference")
    for b in (fast, ref):
        assert np.all(b.truncated)
        assert np.all(b.stop_time == 50)


def test_walk_argmax_mean_rewind_matches_reference():
    arms = [{"family": "gaussian", "mean": 0.0, "sd": 1.0}]
    stop = {"kind": "fixed", "t_star": 60}
    rew = {"kind": "argmax-mean"}
    fast, path = simulate(arms, UNIFORM, stop, ARM0, rew, 2500, 911, 1000, warmup=2.0)
    assert path == "walk"
    ref, _ = simulate(arms, UNIFORM, stop, ARM0, rew, 2500, 911, 1000, warmup=2.0,
                      engine="reference")
    assert int(fast.rewound_time.min()) >= 2
    _compare_batches(fast, ref, "walk-argmax")
    # rewound mean must dominate the stopped mean pathwise
    assert np.all(
        fast.sums_rew[:, 0] / fast.counts_rew[:, 0]
        >= fast.sums_stop[:, 0] / fast.counts_stop[:, 0] - 1e-12
    )


def test_walk_fixed_fraction_rewind_is_a_true_prefix():
    arms = [GAUSS]  # mean 0.2, sd 1
    stop = {"kind": "fixed", "t_star": 100}
    rew = {"kind": "fixed-fraction", "fraction": 0.5}
    fast, path = simulate(arms, UNIFORM, stop, ARM0, rew, 3000, 912, 1000)
    assert path == "walk"
    assert np.all(fast.rewound_time == 50)
    assert np.all(fast.counts_rew[:, 0] == 50.0)
    m, se = _mean_se(fast.sums_rew[:, 0])
    assert abs(m - 10.0) <= 4 * se
    # the replay must capture the same path: the remainder after the
    # rewind point then has variance 50, not the 150 a desynced replay
    # of an independent walk would show
    rest = fast.sums_stop[:, 0] - fast.sums_rew[:, 0]
    v = float(np.var(rest, ddof=1))
    assert abs(v - 50.0) <= 5 * 50.0 * math.sqrt(2.0 / (fast.n_reps - 1))
    ref, _ = simulate(arms, UNIFORM, stop, ARM0, rew, 3000, 912, 1000, engine="reference")
    _compare_batches(fast, ref, "walk-fraction")


def test_walk_line_crossing_counts_are_in_clock_units():
    # net drift toward the line is 0.005 - 0.2 * 0.01 = 0.003 per step, so
    # hitting times concentrate near 1700 and the reference loop stays cheap
    arms = [{"family": "gaussian", "mean": 0.005, "sd": 0.1}]
    stop = {"kind": "line-crossing", "slope": 0.2, "intercept": 5.0, "dt": 0.01}
    fast, path = simulate(arms, UNIFORM, stop, ARM0, NO_REW, 1500, 913, 30_000)
    assert path == "walk"
    np.testing.assert_allclose(fast.counts_stop[:, 0], fast.stop_time * 0.01, rtol=1e-12)
    ref, _ = simulate(arms, UNIFORM, stop, ARM0, NO_REW, 250, 914, 30_000, engine="reference")
    np.testing.assert_allclose(ref.counts_stop[:, 0], ref.stop_time * 0.01, rtol=1e-12)
    _assert_same_law(fast.counts_stop[:, 0], ref.counts_stop[:, 0], "line/clock")
    _assert_same_law(fast.sums_stop[:, 0], ref.sums_stop[:, 0], "line/sum")


# -- stepwise path -------------------------------------------------------------


def test_stepwise_eps_greedy_matches_reference():
    arms = [{"family": "gaussian", "mean": 0.0, "sd": 1.0},
            {"family": "gaussian", "mean": 0.3, "sd": 1.0}]
    samp = {"kind": "epsilon-greedy", "epsilon": 0.2}
    stop = {"kind": "fixed", "t_star": 60}
    fast, path = simulate(arms, samp, stop, BEST, NO_REW, 2000, 915, 10_000, warmup=2.0)
    assert path == "stepwise"
    ref, _ = simulate(arms, samp, stop, BEST, NO_REW, 2000, 915, 10_000, warmup=2.0,
                      engine="reference")
    _compare_batches(fast, ref, "stepwise-fixed")


def test_stepwise_lil_with_rewind_matches_reference():
    arms = [{"family": "gaussian", "mean": 0.1, "sd": 1.0},
            {"family": "gaussian", "mean": 0.4, "sd": 1.0}]
    samp = {"kind": "epsilon-greedy", "epsilon": 0.3}
    stop = {"kind": "lil", "arm": 0, "min_count": 5, "mean": 0.0, "sd": 1.0}
    rew = {"kind": "argmax-mean"}
    fast, path = simulate(arms, samp, stop, BEST, rew, 1200, 916, 250, warmup=3.0)
    assert path == "stepwise"
    ref, _ = simulate(arms, samp, stop, BEST, rew, 1200, 916, 250, warmup=3.0,
                      engine="reference")
    assert 0.0 < fast.truncated_fraction < 1.0  # both regimes exercised
    _compare_batches(fast, ref, "stepwise-lil")


def test_stepwise_thompson_matches_reference():
    arms = [{"family": "bernoulli", "mean": 0.3}, {"family": "bernoulli", "mean": 0.6}]
    samp = {"kind": "thompson-bernoulli"}
    stop = {"kind": "fixed", "t_star": 50}
    fast, path = simulate(arms, samp, stop, BEST, NO_REW, 2000, 917, 10_000, warmup=1.0)
    assert path == "stepwise"
    ref, _ = simulate(arms, samp, stop, BEST, NO_REW, 2000, 917, 10_000, warmup=1.0,
                      engine="reference")
    _compare_batches(fast, ref, "stepwise-thompson")


def test_stepwise_action_probabilities():
    # pin the inverse-cdf arithmetic: eps/k everywhere, 1-eps lump on best
    m = 100_000
    gen = block_stream(42, 0)
    for k, eps, best in [(2, 0.3, 0), (3, 0.6, 1), (2, 1.0, 0)]:
        counts = np.full((m, k), 5.0)
        sums = np.zeros((m, k))
        sums[:, best] = 5.0  # empirical best by a wide margin
        act = _stepwise_action_fn({"kind": "epsilon-greedy", "epsilon": eps}, k)
        a = act(10, counts, sums, m, gen)
        for arm in range(k):
            want = eps / k + (1.0 - eps) * (arm == best)
            got = float(np.mean(a == arm))
            se = math.sqrt(max(want * (1 - want), 1e-12) / m)
            assert abs(got - want) <= 4 * se + 1e-12, (k, eps, arm, got, want)
