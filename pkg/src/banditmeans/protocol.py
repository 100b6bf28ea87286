"""Episode protocol: adaptive sampling, stopping, choosing, rewinding.

One episode unrolls as: at each step t a sampler maps the observed
prefix to a probability vector over arms, an action is drawn from it,
the chosen arm yields a reward, and a stopping rule decides whether to
halt.  After halting at time T, a chooser picks the arm whose mean is
reported and a rewinder picks the time tau <= T whose running estimate
is reported.  The chooser and rewinder see the full stopped history, so
tau need not be a stopping time; that is the whole point.

An engine-enforced warmup plays the arms round-robin until each has at
least ceil(min_pulls) observations, and no stopping rule fires before
warmup ends.  A hard horizon cap marks episodes as truncated; whether
truncated episodes enter an estimate is decided downstream, never here.

Rewards are pre-laid per arm: the j-th pull of arm k consumes the j-th
variate of arm k's dedicated substream, so the joint law is exactly the
stacked-iid construction the analysis assumes, and every consumer of
randomness (each arm, the sampler, the stopper, the chooser) owns an
independent stream derived from the episode seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from ._rng import ARM_BASE, CHOOSER_TAG, SAMPLER_TAG, STOPPER_TAG, substream
from .arms import ArmSpec
from .errors import ConfigError, UndefinedStatError

__all__ = [
    "EpisodeRecord",
    "DataView",
    "PolicyBundle",
    "run_episode",
    "view",
    "sample_mean",
    "discounted_counts",
    "DiscountedCounts",
]

_PROB_TOL = 1e-9


class DataView:
    """Read-only window onto the first t observations of an episode.

    Policies receive these instead of the raw record so they cannot peek
    past t or mutate history.  Arrays are exposed with the write flag
    cleared; counts and sums are recomputed from the prefix.
    """

    __slots__ = ("t", "k_arms", "_actions", "_rewards")

    def __init__(self, k_arms: int, actions: np.ndarray, rewards: np.ndarray, t: int):
        if t < 0 or t > len(actions):
            raise ValueError(f"view time {t} outside [0, {len(actions)}]")
        self.t = t
        self.k_arms = k_arms
        a = actions[:t].view()
        r = rewards[:t].view()
        a.flags.writeable = False
        r.flags.writeable = False
        self._actions = a
        self._rewards = r

    @property
    def actions(self) -> np.ndarray:
        return self._actions

    @property
    def rewards(self) -> np.ndarray:
        return self._rewards

    def count(self, k: int) -> int:
        return int(np.count_nonzero(self._actions == k))

    def total(self, k: int) -> float:
        return float(self._rewards[self._actions == k].sum())

    def counts(self) -> np.ndarray:
        return np.bincount(self._actions, minlength=self.k_arms).astype(np.int64)

    def totals(self) -> np.ndarray:
        return np.bincount(self._actions, weights=self._rewards, minlength=self.k_arms)

    def mean(self, k: int) -> float:
        n = self.count(k)
        if n == 0:
            raise UndefinedStatError(f"arm {k} has no observations at t={self.t}")
        return self.total(k) / n


@dataclass
class EpisodeRecord:
    """Everything one episode produced."""

    seed: int
    k_arms: int
    actions: np.ndarray  # shape (stop_time,), values in [0, k_arms)
    rewards: np.ndarray
    stop_time: int
    chosen_arm: int
    rewound_time: int
    truncated: bool
    stop_clock: Optional[float] = None  # continuous time at stop, when the rule has one

    def view(self, t: Optional[int] = None) -> DataView:
        return DataView(self.k_arms, self.actions, self.rewards, self.stop_time if t is None else t)

    def counts(self, t: Optional[int] = None) -> np.ndarray:
        return self.view(t).counts()

    def totals(self, t: Optional[int] = None) -> np.ndarray:
        return self.view(t).totals()


def view(rec: EpisodeRecord, t: int) -> DataView:
    return rec.view(t)


def sample_mean(rec, k: int, t: Optional[int] = None) -> float:
    """Running mean of arm k at time t (default: at the stop)."""
    v = rec.view(t) if isinstance(rec, EpisodeRecord) else rec
    return v.mean(k)


class DiscountedCounts(NamedTuple):
    raw: int
    log_discounted: float  # N / log N, needs N >= 2
    loglog_discounted: float  # N / log log N, needs N >= 3


def discounted_counts(rec, k: int, t: Optional[int] = None) -> DiscountedCounts:
    """Raw and discounted observation counts of arm k at time t.

    N/log N is undefined below N = 2 and raises; N/loglog N needs N >= 3
    (log log N <= 0 otherwise) and comes back as nan at N = 2, the one
    integer count where the first discount exists but the second does not.
    """
    v = rec.view(t) if isinstance(rec, EpisodeRecord) else rec
    n = v.count(k)
    if n < 2:
        raise UndefinedStatError(f"N/log N needs N >= 2, arm {k} has N = {n}")
    nloglog = n / math.log(math.log(n)) if n >= 3 else math.nan
    return DiscountedCounts(n, n / math.log(n), nloglog)


@dataclass
class PolicyBundle:
    """The four policy slots plus engine-level knobs.

    sampler(t, view, gen) -> probability vector over arms
    stopper(t, view, gen) -> True to halt (may carry per-episode state;
        the engine calls stopper.reset(gen) at episode start if present)
    chooser(view, gen) -> arm index
    rewinder(view, t_lo, chosen) -> time in [t_lo, view.t]

    min_pulls is the warmup floor b: round-robin until every arm has
    ceil(b) observations, and never stop before that.  horizon_cap is
    the hard truncation limit.
    """

    sampler: Callable
    stopper: Callable
    chooser: Callable
    rewinder: Callable
    min_pulls: float = 0.0
    horizon_cap: int = 1_000_000

    def __post_init__(self):
        if self.min_pulls < 0:
            raise ConfigError(f"min_pulls must be >= 0, got {self.min_pulls}")
        if self.horizon_cap < 1:
            raise ConfigError(f"horizon_cap must be >= 1, got {self.horizon_cap}")

    def warmup_steps(self, k_arms: int) -> int:
        if self.min_pulls == 0:
            return 0
        return k_arms * math.ceil(self.min_pulls)


class _ArmBuffer:
    """Chunked lazy draws from one arm's substream; pull j is draw j."""

    __slots__ = ("_arm", "_gen", "_buf", "_used")

    def __init__(self, arm: ArmSpec, gen: np.random.Generator, chunk: int = 64):
        self._arm = arm
        self._gen = gen
        self._buf = arm.draw(gen, chunk)
        self._used = 0

    def next(self) -> float:
        if self._used == len(self._buf):
            grow = self._arm.draw(self._gen, 2 * len(self._buf))
            self._buf = np.concatenate([self._buf, grow])
        y = self._buf[self._used]
        self._used += 1
        return float(y)


def run_episode(arms: Sequence[ArmSpec], bundle: PolicyBundle, seed: int) -> EpisodeRecord:
    """Reference per-episode engine: pure in (arms, bundle, seed)."""
    k = len(arms)
    if k < 1:
        raise ConfigError("need at least one arm")
    gen_sampler = substream(seed, SAMPLER_TAG)
    gen_stopper = substream(seed, STOPPER_TAG)
    gen_chooser = substream(seed, CHOOSER_TAG)
    buffers = [_ArmBuffer(arm, substream(seed, ARM_BASE + i)) for i, arm in enumerate(arms)]

    if hasattr(bundle.stopper, "reset"):
        bundle.stopper.reset(gen_stopper)

    warmup = bundle.warmup_steps(k)
    cap = bundle.horizon_cap
    actions = np.empty(min(cap, 1024), dtype=np.int32)
    rewards = np.empty(min(cap, 1024), dtype=np.float64)

    t = 0
    truncated = False
    while True:
        t += 1
        if t - 1 == len(actions):  # grow arrays geometrically
            actions = np.concatenate([actions, np.empty(len(actions), dtype=np.int32)])
            rewards = np.concatenate([rewards, np.empty(len(rewards), dtype=np.float64)])
        if t <= warmup:
            a = (t - 1) % k
        else:
            probs = np.asarray(
                bundle.sampler(t, DataView(k, actions, rewards, t - 1), gen_sampler),
                dtype=float,
            )
            if probs.shape != (k,) or np.any(probs < -_PROB_TOL) or abs(probs.sum() - 1.0) > _PROB_TOL:
                raise ValueError(f"sampler returned an invalid probability vector: {probs}")
            a = int(np.searchsorted(np.cumsum(probs), gen_sampler.random(), side="right"))
            a = min(a, k - 1)
        actions[t - 1] = a
        rewards[t - 1] = buffers[a].next()

        if t >= max(warmup, 1):
            if bundle.stopper(t, DataView(k, actions, rewards, t), gen_stopper):
                break
        if t >= cap:
            truncated = True
            break

    stop_time = t
    final = DataView(k, actions, rewards, stop_time)
    chosen = int(bundle.chooser(final, gen_chooser))
    if not 0 <= chosen < k:
        raise ValueError(f"chooser returned arm {chosen} outside [0, {k})")
    t_lo = max(warmup, 1)
    rewound = int(bundle.rewinder(final, t_lo, chosen))
    if not t_lo <= rewound <= stop_time:
        raise ValueError(f"rewinder returned {rewound} outside [{t_lo}, {stop_time}]")

    clock = None
    dt = getattr(bundle.stopper, "dt", None)
    if dt is not None:
        clock = stop_time * dt

    return EpisodeRecord(
        seed=seed,
        k_arms=k,
        actions=actions[:stop_time].copy(),
        rewards=rewards[:stop_time].copy(),
        stop_time=stop_time,
        chosen_arm=chosen,
        rewound_time=rewound,
        truncated=truncated,
        stop_clock=clock,
    )
