"""Batch simulation engines.

The reference engine in protocol.run_episode is the semantic ground
truth: one Python loop per episode, one substream per consumer.  It is
far too slow for tail studies at 10^5 episodes and 10^6-step horizons,
so this module adds vectorized paths that simulate whole blocks of
episodes at once and are checked against the reference engine for
statistical agreement in the test suite:

  * single-arm walks (any stopping rule) via chunked cumulative sums
  * fixed-horizon multinomial shortcuts for nonadaptive samplers, using
    closed-form reward-sum laws (equal in distribution, not pathwise)
  * the two commit-style two-arm samplers at a fixed horizon, collapsed
    to their exact two- or three-draw composites
  * a step-synchronous active-set engine for adaptive samplers

Episodes are partitioned into fixed-size blocks; each block draws from
its own counter-derived stream, so results are identical no matter how
many workers the blocks are spread over.  Fast paths aggregate per-arm
counts and sums only; anything needing full action histories goes
through the reference engine.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from ._rng import block_stream, episode_seed
from .arms import ArmSpec, arm_from_config
from .errors import ConfigError
from .estimators import EpisodeBatch
from .policies import (
    chooser_from_config,
    rewinder_from_config,
    sampler_from_config,
    stopper_from_config,
)
from .protocol import PolicyBundle, run_episode

__all__ = ["simulate", "BLOCK_SIZE"]

BLOCK_SIZE = 4096
_CHUNK_ELEM_BUDGET = 1 << 24  # floats per cumsum chunk, ~128 MB

_WALK_STOPPERS = ("fixed", "poisson-plus-one", "lil", "mean-threshold", "line-crossing")
_STEPWISE_SAMPLERS = ("epsilon-greedy", "ucb1", "thompson-gaussian", "thompson-bernoulli")
_SUM_LAW_FAMILIES = ("gaussian", "bernoulli")


# -- public entry ---------------------------------------------------------------


def simulate(
    arm_cfgs: Sequence[dict],
    sampler_cfg: dict,
    stopper_cfg: dict,
    chooser_cfg: dict,
    rewinder_cfg: dict,
    n_reps: int,
    root_seed: int,
    t_max: int,
    warmup: float = 0.0,
    engine: str = "auto",
    workers: int = 1,
) -> tuple[EpisodeBatch, str]:
    """Run n_reps episodes and return (batch, engine-path name).

    engine: "auto" picks the fastest valid vectorized path, "reference"
    forces the per-episode loop (any configuration, slow).
    """
    if n_reps < 1:
        raise ConfigError(f"n_reps must be >= 1, got {n_reps}")
    if t_max < 1:
        raise ConfigError(f"T_max must be >= 1, got {t_max}")
    arms = [arm_from_config(c) for c in arm_cfgs]
    k = len(arms)
    t0 = k * math.ceil(warmup) if warmup > 0 else 0
    if t0 > t_max:
        raise ConfigError(f"warmup needs {t0} steps but T_max is {t_max}")

    path = "reference" if engine == "reference" else _pick_path(
        arms, sampler_cfg, stopper_cfg, chooser_cfg, rewinder_cfg, warmup
    )
    if engine not in ("auto", "reference"):
        raise ConfigError(f"engine must be 'auto' or 'reference', got {engine!r}")

    if path == "reference":
        batch = _run_reference(
            arms, sampler_cfg, stopper_cfg, chooser_cfg, rewinder_cfg,
            n_reps, root_seed, t_max, warmup,
        )
        return batch, path

    args = [
        (
            list(arm_cfgs), sampler_cfg, stopper_cfg, chooser_cfg, rewinder_cfg,
            root_seed, j, _block_len(n_reps, j), t_max, warmup, path,
        )
        for j in range(_n_blocks(n_reps))
    ]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block_star, args))
    else:
        parts = [_run_block_star(a) for a in args]
    return EpisodeBatch.concat(parts), path


def _n_blocks(n_reps: int) -> int:
    return (n_reps + BLOCK_SIZE - 1) // BLOCK_SIZE


def _block_len(n_reps: int, j: int) -> int:
    return min(BLOCK_SIZE, n_reps - j * BLOCK_SIZE)


def _pick_path(arms, sampler_cfg, stopper_cfg, chooser_cfg, rewinder_cfg, warmup) -> str:
    k = len(arms)
    sk = sampler_cfg["kind"]
    tk = stopper_cfg["kind"]
    rk = rewinder_cfg["kind"]
    if k == 1 and tk in _WALK_STOPPERS:
        return "walk"
    if (
        k == 2
        and sk in ("outlier-gate", "duel-commit")
        and tk == "fixed"
        and rk == "none"
        and all(a.family == "gaussian" for a in arms)
        and int(stopper_cfg["t_star"]) >= 3
        and warmup == 0
    ):
        return "commit"
    if (
        k >= 2
        and sk == "uniform-random"
        and tk == "fixed"
        and rk == "none"
        and all(a.family in _SUM_LAW_FAMILIES for a in arms)
    ):
        return "multinomial"
    if (
        k >= 2
        and sk in _STEPWISE_SAMPLERS
        and tk in ("fixed", "lil", "mean-threshold")
        and rk in ("none", "argmax-mean")
        and warmup >= 1
    ):
        return "stepwise"
    return "reference"


def _run_block_star(args) -> EpisodeBatch:
    (
        arm_cfgs, sampler_cfg, stopper_cfg, chooser_cfg, rewinder_cfg,
        root_seed, block_idx, n, t_max, warmup, path,
    ) = args
    arms = [arm_from_config(c) for c in arm_cfgs]
    gen = block_stream(root_seed, block_idx)
    if path == "walk":
        return _walk_block(arms[0], stopper_cfg, rewinder_cfg, warmup, t_max, n, gen)
    if path == "commit":
        return _commit_block(arms, sampler_cfg, stopper_cfg, chooser_cfg, n, gen)
    if path == "multinomial":
        return _multinomial_block(arms, stopper_cfg, chooser_cfg, warmup, t_max, n, gen)
    if path == "stepwise":
        return _stepwise_block(
            arms, sampler_cfg, stopper_cfg, chooser_cfg, rewinder_cfg, warmup, t_max, n, gen
        )
    raise RuntimeError(f"unknown path {path!r}")


# -- reference loop ----------------------------------------------------------------


def _run_reference(
    arms, sampler_cfg, stopper_cfg, chooser_cfg, rewinder_cfg,
    n_reps, root_seed, t_max, warmup,
) -> EpisodeBatch:
    bundle = PolicyBundle(
        sampler=sampler_from_config(sampler_cfg),
        stopper=stopper_from_config(stopper_cfg),
        chooser=chooser_from_config(chooser_cfg),
        rewinder=rewinder_from_config(rewinder_cfg),
        min_pulls=warmup,
        horizon_cap=t_max,
    )
    records = [run_episode(arms, bundle, episode_seed(root_seed, i)) for i in range(n_reps)]
    return EpisodeBatch.from_records(records)


# -- single-arm chunked walks ---------------------------------------------------------


def _walk_condition(stopper_cfg: dict, t0: int):
    """Per-chunk stopping test for adaptive single-arm rules.

    Returns (cond_fn(cs, ts) -> bool matrix, target_draw_fn(gen, n) or None).
    Nonadaptive rules return a target sampler instead of a condition.
    """
    kind = stopper_cfg["kind"]
    floor = max(t0, 1)
    if kind == "fixed":
        t_star = int(stopper_cfg["t_star"])
        return None, lambda gen, n: np.full(n, max(t_star, floor), dtype=np.int64)
    if kind == "poisson-plus-one":
        rate = float(stopper_cfg["rate"])
        return None, lambda gen, n: np.maximum(1 + gen.poisson(rate, n), floor).astype(np.int64)
    if kind == "lil":
        if int(stopper_cfg.get("arm", 0)) != 0:
            raise ConfigError("single-arm walk: lil stopper must track arm 0")
        b = int(stopper_cfg["min_count"])
        if b < 3:
            raise ConfigError(f"lil needs min_count >= 3, got {b}")
        mean = float(stopper_cfg["mean"])
        sd = float(stopper_cfg["sd"])
        lo = max(b, floor, 3)

        def cond(cs, ts):
            ok = ts >= lo
            env = np.zeros_like(ts, dtype=float)
            env[ok] = sd * np.sqrt(ts[ok] * np.log(np.log(ts[ok])))
            return ok[None, :] & (cs - mean * ts[None, :] >= env[None, :])

        return cond, None
    if kind == "mean-threshold":
        if int(stopper_cfg.get("arm", 0)) != 0:
            raise ConfigError("single-arm walk: mean-threshold must track arm 0")
        level = float(stopper_cfg["level"])

        def cond(cs, ts):
            return (ts >= floor)[None, :] & (cs >= level * ts[None, :])

        return cond, None
    if kind == "line-crossing":
        slope = float(stopper_cfg["slope"])
        intercept = float(stopper_cfg["intercept"])
        dt = float(stopper_cfg["dt"])

        def cond(cs, ts):
            return (ts >= floor)[None, :] & (cs >= slope * dt * ts[None, :] + intercept)

        return cond, None
    raise ConfigError(f"walk path does not support stopper kind {stopper_cfg['kind']!r}")


def _walk_chunks(
    arm: ArmSpec,
    n: int,
    gen: np.random.Generator,
    t_max: int,
    cond_fn,
    targets: Optional[np.ndarray],
    t0: int,
    track_best: bool,
    capture_times: Optional[np.ndarray] = None,
):
    """Core chunked cumulative-sum walk over one block of episodes.

    Returns (stop_t, stop_s, truncated, best_mean, best_t, captured).
    best_* track the running-mean argmax over t in [max(t0,1), stop];
    captured[i] is the partial sum at capture_times[i] when requested.
    """
    floor = max(t0, 1)
    active = np.arange(n)
    carry = np.zeros(n)
    stop_t = np.zeros(n, dtype=np.int64)
    stop_s = np.zeros(n)
    truncated = np.zeros(n, dtype=bool)
    best_mean = np.full(n, -np.inf)
    best_t = np.zeros(n, dtype=np.int64)
    captured = np.full(n, np.nan) if capture_times is not None else None

    t_done = 0
    while active.size and t_done < t_max:
        m = active.size
        chunk = int(np.clip(_CHUNK_ELEM_BUDGET // m, 1024, 262144))
        chunk = min(chunk, t_max - t_done)
        draws = arm.draw(gen, m * chunk).reshape(m, chunk)
        cs = carry[active, None] + np.cumsum(draws, axis=1)
        ts = t_done + np.arange(1, chunk + 1, dtype=np.int64)

        if targets is not None:
            col = targets[active] - t_done - 1
            hit = (col >= 0) & (col < chunk)
            stop_col = np.where(hit, col, chunk - 1).astype(np.int64)
        else:
            cond = cond_fn(cs, ts)
            first = cond.argmax(axis=1)
            hit = cond[np.arange(m), first]
            stop_col = np.where(hit, first, chunk - 1).astype(np.int64)

        if capture_times is not None:
            ccol = capture_times[active] - t_done - 1
            grab = (ccol >= 0) & (ccol < chunk)
            rows = np.nonzero(grab)[0]
            captured[active[rows]] = cs[rows, ccol[rows].astype(np.int64)]

        if track_best:
            means = cs / ts[None, :]
            colidx = np.arange(chunk)
            ok = (ts >= floor)[None, :] & (colidx[None, :] <= stop_col[:, None])
            masked = np.where(ok, means, -np.inf)
            bcol = masked.argmax(axis=1)
            bval = masked[np.arange(m), bcol]
            upd = bval > best_mean[active]
            rows = active[upd]
            best_mean[rows] = bval[upd]
            best_t[rows] = ts[bcol[upd]]

        rows = np.nonzero(hit)[0]
        stopped = active[rows]
        stop_t[stopped] = ts[stop_col[rows]]
        stop_s[stopped] = cs[rows, stop_col[rows]]

        keep = ~hit
        carry[active[keep]] = cs[keep, -1]
        active = active[keep]
        t_done += chunk

    if active.size:
        truncated[active] = True
        stop_t[active] = t_max
        stop_s[active] = carry[active]
    return stop_t, stop_s, truncated, best_mean, best_t, captured


def _walk_block(
    arm: ArmSpec,
    stopper_cfg: dict,
    rewinder_cfg: dict,
    warmup: float,
    t_max: int,
    n: int,
    gen: np.random.Generator,
) -> EpisodeBatch:
    t0 = math.ceil(warmup) if warmup > 0 else 0
    cond_fn, target_fn = _walk_condition(stopper_cfg, t0)
    targets = target_fn(gen, n) if target_fn is not None else None
    rkind = rewinder_cfg["kind"]
    track = rkind == "argmax-mean"

    stop_t, stop_s, truncated, best_mean, best_t, _ = _walk_chunks(
        arm, n, gen, t_max, cond_fn, targets, t0, track
    )

    if rkind == "none":
        rew_t, rew_n, rew_s = stop_t, stop_t.astype(float), stop_s
    elif rkind == "argmax-mean":
        rew_t = best_t
        rew_n = best_t.astype(float)
        rew_s = best_mean * best_t
    elif rkind == "fixed-fraction":
        frac = float(rewinder_cfg["fraction"])
        rew_t = np.maximum(max(t0, 1), np.ceil(frac * stop_t).astype(np.int64))
        # replay the identical walk (same stream, same chunk pattern) and
        # capture the partial sums at the now-known rewind times
        gen2 = _clone_stream_for_replay(gen)
        targets2 = target_fn(gen2, n) if target_fn is not None else None
        _, _, _, _, _, captured = _walk_chunks(
            arm, n, gen2, t_max, cond_fn, targets2, t0, False, capture_times=rew_t
        )
        rew_n = rew_t.astype(float)
        rew_s = captured
    else:
        raise ConfigError(f"walk path does not support rewinder kind {rkind!r}")

    scale = float(stopper_cfg["dt"]) if stopper_cfg["kind"] == "line-crossing" else 1.0
    return EpisodeBatch(
        k_arms=1,
        stop_time=stop_t,
        rewound_time=rew_t,
        chosen=np.zeros(n, dtype=np.int64),
        truncated=truncated,
        counts_stop=(stop_t.astype(float) * scale)[:, None],
        sums_stop=stop_s[:, None],
        counts_rew=(rew_n * scale)[:, None],
        sums_rew=rew_s[:, None],
    )


def _clone_stream_for_replay(gen: np.random.Generator) -> np.random.Generator:
    # Philox state holds its key and counter; a fresh generator from the
    # same key replays the stream from the start of the block
    state = gen.bit_generator.state
    bg = np.random.Philox(key=state["state"]["key"])
    return np.random.Generator(bg)


# -- commit-style two-arm composites ---------------------------------------------------


def _commit_block(arms, sampler_cfg, stopper_cfg, chooser_cfg, n, gen) -> EpisodeBatch:
    """Exact terminal law of the outlier-gate and duel-commit samplers at
    a fixed horizon, using normal sum closure instead of stepping."""
    t_star = int(stopper_cfg["t_star"])
    mu = np.array([a.params["mean"] for a in arms])
    sd = np.array([a.params["sd"] for a in arms])
    counts = np.zeros((n, 2))
    sums = np.zeros((n, 2))

    if sampler_cfg["kind"] == "outlier-gate":
        alpha = float(sampler_cfg["alpha"])
        z = float(norm.isf(alpha / 2.0))
        y1 = mu[0] + sd[0] * gen.standard_normal(n)
        rest = gen.standard_normal(n)  # one bulk draw either way keeps use fixed
        gate = np.abs(y1) > z
        # gate open: arm 0 frozen at its single draw, arm 1 soaks up the rest
        counts[gate, 0] = 1.0
        sums[gate, 0] = y1[gate]
        counts[gate, 1] = t_star - 1
        sums[gate, 1] = mu[1] * (t_star - 1) + sd[1] * math.sqrt(t_star - 1) * rest[gate]
        # gate shut: arm 0 keeps accumulating, arm 1 never plays
        counts[~gate, 0] = t_star
        sums[~gate, 0] = y1[~gate] + mu[0] * (t_star - 1) + sd[0] * math.sqrt(t_star - 1) * rest[~gate]
    else:  # duel-commit
        y = mu[None, :] + sd[None, :] * gen.standard_normal((n, 2))
        rest = gen.standard_normal(n)
        winner = np.where(y[:, 0] > y[:, 1], 0, 1)
        loser = 1 - winner
        rows = np.arange(n)
        counts[rows, winner] = t_star - 1
        counts[rows, loser] = 1.0
        sums[rows, loser] = y[rows, loser]
        extra = t_star - 2
        sums[rows, winner] = (
            y[rows, winner] + mu[winner] * extra + sd[winner] * math.sqrt(extra) * rest
        )

    chosen = _vector_choose(chooser_cfg, counts, sums, gen)
    stop_t = np.full(n, t_star, dtype=np.int64)
    return EpisodeBatch(
        k_arms=2,
        stop_time=stop_t,
        rewound_time=stop_t.copy(),
        chosen=chosen,
        truncated=np.zeros(n, dtype=bool),
        counts_stop=counts,
        sums_stop=sums,
        counts_rew=counts.copy(),
        sums_rew=sums.copy(),
    )


# -- fixed-horizon multinomial shortcut ----------------------------------------------


def _multinomial_block(arms, stopper_cfg, chooser_cfg, warmup, t_max, n, gen) -> EpisodeBatch:
    k = len(arms)
    t_star = min(int(stopper_cfg["t_star"]), t_max)
    per_arm_warm = math.ceil(warmup) if warmup > 0 else 0
    t0 = k * per_arm_warm
    if t_star < t0:
        t_star = t0  # stopping cannot fire before warmup completes
    free = t_star - t0
    counts = gen.multinomial(free, np.full(k, 1.0 / k), size=n).astype(float) + per_arm_warm
    sums = np.zeros((n, k))
    for a, arm in enumerate(arms):
        na = counts[:, a]
        if arm.family == "gaussian":
            mu, sd = arm.params["mean"], arm.params["sd"]
            sums[:, a] = mu * na + sd * np.sqrt(na) * gen.standard_normal(n)
        else:  # bernoulli: binomial sum law
            sums[:, a] = gen.binomial(na.astype(np.int64), arm.params["mean"]).astype(float)

    chosen = _vector_choose(chooser_cfg, counts, sums, gen)
    truncated = np.full(n, int(stopper_cfg["t_star"]) > t_max, dtype=bool)
    stop_t = np.full(n, t_star, dtype=np.int64)
    return EpisodeBatch(
        k_arms=k,
        stop_time=stop_t,
        rewound_time=stop_t.copy(),
        chosen=chosen,
        truncated=truncated,
        counts_stop=counts,
        sums_stop=sums,
        counts_rew=counts.copy(),
        sums_rew=sums.copy(),
    )


# -- step-synchronous adaptive engine ---------------------------------------------------


def _stepwise_block(
    arms, sampler_cfg, stopper_cfg, chooser_cfg, rewinder_cfg, warmup, t_max, n, gen
) -> EpisodeBatch:
    k = len(arms)
    per_arm_warm = math.ceil(warmup)
    t0 = k * per_arm_warm
    counts = np.full((n, k), float(per_arm_warm))
    sums = np.zeros((n, k))
    for a, arm in enumerate(arms):
        # warmup draws, bulk per arm: same law as interleaved round-robin
        sums[:, a] = arm.draw(gen, n * per_arm_warm).reshape(n, per_arm_warm).sum(axis=1)

    track = rewinder_cfg["kind"] == "argmax-mean"
    means0 = sums / counts
    best_mean = means0.copy()
    best_t = np.full((n, k), t0, dtype=np.int64)
    best_cnt = counts.copy()

    stop_t = np.zeros(n, dtype=np.int64)
    truncated = np.zeros(n, dtype=bool)
    counts_stop = np.zeros((n, k))
    sums_stop = np.zeros((n, k))
    rew_t = np.zeros(n, dtype=np.int64)
    rew_cnt = np.zeros(n)
    rew_sum = np.zeros(n)

    stop_test = _stepwise_stop_test(stopper_cfg, k)
    act_fn = _stepwise_action_fn(sampler_cfg, k)

    active = np.arange(n)
    t = t0
    while active.size and t < t_max:
        t += 1
        sub_counts = counts[active]
        sub_sums = sums[active]
        action = act_fn(t, sub_counts, sub_sums, active.size, gen)

        rewards = np.empty(active.size)
        for a, arm in enumerate(arms):
            rows = np.nonzero(action == a)[0]
            if rows.size:
                rewards[rows] = arm.draw(gen, rows.size)
        counts[active, action] += 1.0
        sums[active, action] += rewards

        if track:
            new_mean = sums[active, action] / counts[active, action]
            upd = new_mean > best_mean[active, action]
            ridx = active[upd]
            aidx = action[upd]
            best_mean[ridx, aidx] = new_mean[upd]
            best_t[ridx, aidx] = t
            best_cnt[ridx, aidx] = counts[ridx, aidx]

        hit = stop_test(t, counts[active], sums[active])
        if np.any(hit):
            stopped = active[hit]
            stop_t[stopped] = t
            counts_stop[stopped] = counts[stopped]
            sums_stop[stopped] = sums[stopped]
            active = active[~hit]

    if active.size:
        truncated[active] = True
        stop_t[active] = t_max
        counts_stop[active] = counts[active]
        sums_stop[active] = sums[active]

    chosen = _vector_choose(chooser_cfg, counts_stop, sums_stop, gen)

    rows = np.arange(n)
    if rewinder_cfg["kind"] == "none":
        rew_t = stop_t.copy()
        counts_rew = counts_stop.copy()
        sums_rew = sums_stop.copy()
    else:  # argmax-mean: tracked for the chosen arm only
        rew_t = best_t[rows, chosen]
        counts_rew = np.full((n, k), np.nan)
        sums_rew = np.full((n, k), np.nan)
        counts_rew[rows, chosen] = best_cnt[rows, chosen]
        sums_rew[rows, chosen] = best_mean[rows, chosen] * best_cnt[rows, chosen]

    return EpisodeBatch(
        k_arms=k,
        stop_time=stop_t,
        rewound_time=rew_t,
        chosen=chosen,
        truncated=truncated,
        counts_stop=counts_stop,
        sums_stop=sums_stop,
        counts_rew=counts_rew,
        sums_rew=sums_rew,
    )


def _stepwise_stop_test(stopper_cfg: dict, k: int):
    kind = stopper_cfg["kind"]
    if kind == "fixed":
        t_star = int(stopper_cfg["t_star"])
        return lambda t, counts, sums: np.full(len(counts), t >= t_star)
    if kind == "lil":
        arm = int(stopper_cfg.get("arm", 0))
        b = int(stopper_cfg["min_count"])
        mean = float(stopper_cfg["mean"])
        sd = float(stopper_cfg["sd"])
        if not 0 <= arm < k:
            raise ConfigError(f"lil tracks arm {arm}, but there are {k} arms")

        def test(t, counts, sums):
            na = counts[:, arm]
            ok = na >= b
            out = np.zeros(len(counts), dtype=bool)
            if np.any(ok):
                nn = na[ok]
                out[ok] = sums[ok, arm] - mean * nn >= sd * np.sqrt(nn * np.log(np.log(nn)))
            return out

        return test
    if kind == "mean-threshold":
        arm = int(stopper_cfg.get("arm", 0))
        level = float(stopper_cfg["level"])
        return lambda t, counts, sums: (counts[:, arm] >= 1) & (
            sums[:, arm] >= level * counts[:, arm]
        )
    raise ConfigError(f"stepwise path does not support stopper kind {kind!r}")


def _stepwise_action_fn(sampler_cfg: dict, k: int):
    kind = sampler_cfg["kind"]
    if kind == "epsilon-greedy":
        eps = float(sampler_cfg["epsilon"])
        slot = eps / k

        def act(t, counts, sums, m, gen):
            best = np.argmax(sums / counts, axis=1)
            u = gen.random(m)
            # inverse cdf of eps/k everywhere plus a (1-eps) lump on best
            w = u - slot * best
            before = np.floor(u / slot).astype(np.int64) if eps > 0 else best
            after = np.floor((u - (1.0 - eps)) / slot).astype(np.int64) if eps > 0 else best
            a = np.where(w < 0, before, np.where(w < (1.0 - eps) + slot, best, after))
            return np.clip(a, 0, k - 1)

        return act
    if kind == "ucb1":
        c = float(sampler_cfg.get("c", math.sqrt(2.0)))

        def act(t, counts, sums, m, gen):
            idx = sums / counts + c * np.sqrt(math.log(max(t, 2)) / counts)
            return np.argmax(idx, axis=1)

        return act
    if kind == "thompson-gaussian":
        pm = float(sampler_cfg.get("prior_mean", 0.0))
        ps = float(sampler_cfg.get("prior_sd", 1.0))
        os_ = float(sampler_cfg.get("obs_sd", 1.0))

        def act(t, counts, sums, m, gen):
            prec = 1.0 / ps**2 + counts / os_**2
            post = (pm / ps**2 + sums / os_**2) / prec
            draws = post + gen.standard_normal((m, k)) / np.sqrt(prec)
            return np.argmax(draws, axis=1)

        return act
    if kind == "thompson-bernoulli":
        a0 = float(sampler_cfg.get("a", 1.0))
        b0 = float(sampler_cfg.get("b", 1.0))

        def act(t, counts, sums, m, gen):
            draws = gen.beta(a0 + sums, b0 + (counts - sums))
            return np.argmax(draws, axis=1)

        return act
    raise ConfigError(f"stepwise path does not support sampler kind {kind!r}")


# -- shared chooser vectorization --------------------------------------------------------


def _vector_choose(chooser_cfg: dict, counts: np.ndarray, sums: np.ndarray, gen) -> np.ndarray:
    kind = chooser_cfg["kind"]
    n, k = counts.shape
    if kind == "fixed":
        arm = int(chooser_cfg["arm"])
        if not 0 <= arm < k:
            raise ConfigError(f"chooser arm {arm} outside [0, {k})")
        return np.full(n, arm, dtype=np.int64)
    if kind == "most-sampled":
        return np.argmax(counts, axis=1)
    if kind in ("best-empirical", "worst-empirical"):
        with np.errstate(invalid="ignore"):
            means = np.where(counts > 0, sums / np.maximum(counts, 1.0), np.nan)
        fill = -np.inf if kind == "best-empirical" else np.inf
        means = np.where(np.isnan(means), fill, means)
        return np.argmax(means, axis=1) if kind == "best-empirical" else np.argmin(means, axis=1)
    if kind == "random-nonadaptive":
        p = np.asarray(chooser_cfg["probs"], dtype=float)
        if p.shape != (k,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ConfigError(f"chooser probs must be a length-{k} probability vector")
        u = gen.random(n)
        return np.minimum(np.searchsorted(np.cumsum(p), u, side="right"), k - 1).astype(np.int64)
    raise ConfigError(f"unknown chooser kind {kind!r}")
