"""Policy zoo: samplers, stopping rules, choosers and rewinders.

Each policy is a small callable object built by a `*_from_config`
factory from a {"kind": ..., params...} mapping, so bundles are cheap
to construct, picklable, and print their own configuration.

Conventions shared with the engine:
  * arm indices are 0-based; ties in any argmax/argmin break to the
    lowest index, and time ties in the rewinder break to the earliest t
  * samplers return a probability vector; randomized samplers (the
    posterior-draw ones) realize their internal randomness from the
    sampler stream and return the resulting one-hot vector
  * stopping rules that need randomness (the nonadaptive drawn horizon)
    take it from the stopper stream inside reset()
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy import stats

from .errors import ConfigError

__all__ = [
    "sampler_from_config",
    "stopper_from_config",
    "chooser_from_config",
    "rewinder_from_config",
]


def _means_or(view, fill: float) -> np.ndarray:
    counts = view.counts()
    totals = view.totals()
    out = np.full(view.k_arms, fill, dtype=float)
    seen = counts > 0
    out[seen] = totals[seen] / counts[seen]
    return out


def _one_hot(k: int, idx: int) -> np.ndarray:
    out = np.zeros(k)
    out[idx] = 1.0
    return out


# -- samplers -----------------------------------------------------------------


class UniformRandom:
    kind = "uniform-random"

    def __call__(self, t, view, gen):
        return np.full(view.k_arms, 1.0 / view.k_arms)


class EpsilonGreedy:
    kind = "epsilon-greedy"

    def __init__(self, epsilon: float):
        if not 0.0 <= epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in [0, 1], got {epsilon}")
        self.epsilon = epsilon

    def __call__(self, t, view, gen):
        # unsampled arms rank first so the greedy part forces coverage
        best = int(np.argmax(_means_or(view, math.inf)))
        probs = np.full(view.k_arms, self.epsilon / view.k_arms)
        probs[best] += 1.0 - self.epsilon
        return probs


class Ucb1:
    kind = "ucb1"

    def __init__(self, c: float = math.sqrt(2.0)):
        if c < 0:
            raise ConfigError(f"ucb width must be >= 0, got {c}")
        self.c = c

    def __call__(self, t, view, gen):
        counts = view.counts()
        if np.any(counts == 0):
            return _one_hot(view.k_arms, int(np.argmax(counts == 0)))
        means = view.totals() / counts
        index = means + self.c * np.sqrt(math.log(max(t, 2)) / counts)
        return _one_hot(view.k_arms, int(np.argmax(index)))


class ThompsonGaussian:
    """Posterior draws under a conjugate normal prior with known obs_sd."""

    kind = "thompson-gaussian"

    def __init__(self, prior_mean: float = 0.0, prior_sd: float = 1.0, obs_sd: float = 1.0):
        if prior_sd <= 0 or obs_sd <= 0:
            raise ConfigError("thompson-gaussian needs prior_sd, obs_sd > 0")
        self.prior_mean = prior_mean
        self.prior_sd = prior_sd
        self.obs_sd = obs_sd

    def __call__(self, t, view, gen):
        counts = view.counts()
        totals = view.totals()
        prec = 1.0 / self.prior_sd**2 + counts / self.obs_sd**2
        post_mean = (self.prior_mean / self.prior_sd**2 + totals / self.obs_sd**2) / prec
        draws = post_mean + gen.standard_normal(view.k_arms) / np.sqrt(prec)
        return _one_hot(view.k_arms, int(np.argmax(draws)))


class ThompsonBernoulli:
    kind = "thompson-bernoulli"

    def __init__(self, a: float = 1.0, b: float = 1.0):
        if a <= 0 or b <= 0:
            raise ConfigError("thompson-bernoulli needs beta prior a, b > 0")
        self.a = a
        self.b = b

    def __call__(self, t, view, gen):
        counts = view.counts()
        wins = view.totals()
        draws = gen.beta(self.a + wins, self.b + (counts - wins))
        return _one_hot(view.k_arms, int(np.argmax(draws)))


class OutlierGate:
    """Two arms: play arm 0 once, then commit to arm 1 for the rest of
    the episode iff the first observation exceeded a two-sided normal
    threshold, else keep playing arm 0."""

    kind = "outlier-gate"

    def __init__(self, alpha: float):
        if not 0.0 < alpha < 1.0:
            raise ConfigError(f"gate alpha must be in (0, 1), got {alpha}")
        self.alpha = alpha
        self.threshold = float(stats.norm.isf(alpha / 2.0))

    def __call__(self, t, view, gen):
        if view.k_arms != 2:
            raise ConfigError("outlier-gate is a two-arm rule")
        if view.t == 0:
            return _one_hot(2, 0)
        gate_open = abs(float(view.rewards[0])) > self.threshold
        return _one_hot(2, 1 if gate_open else 0)


class DuelCommit:
    """Two arms: one pull each, then commit forever to the one whose
    first observation won the duel (arm 0 on a strict win, else arm 1)."""

    kind = "duel-commit"

    def __call__(self, t, view, gen):
        if view.k_arms != 2:
            raise ConfigError("duel-commit is a two-arm rule")
        if view.t == 0:
            return _one_hot(2, 0)
        if view.t == 1:
            return _one_hot(2, 1)
        winner = 0 if float(view.rewards[0]) > float(view.rewards[1]) else 1
        return _one_hot(2, winner)


# -- stopping rules -----------------------------------------------------------


class FixedHorizon:
    kind = "fixed"

    def __init__(self, t_star: int):
        if t_star < 1:
            raise ConfigError(f"fixed horizon must be >= 1, got {t_star}")
        self.t_star = int(t_star)

    def __call__(self, t, view, gen):
        return t >= self.t_star


class PoissonPlusOne:
    """Nonadaptive random horizon 1 + Poisson(rate), drawn per episode."""

    kind = "poisson-plus-one"

    def __init__(self, rate: float):
        if rate < 0:
            raise ConfigError(f"poisson rate must be >= 0, got {rate}")
        self.rate = rate
        self._stop: Optional[int] = None

    def reset(self, gen):
        self._stop = 1 + int(gen.poisson(self.rate))

    def __call__(self, t, view, gen):
        if self._stop is None:
            raise RuntimeError("poisson-plus-one used without reset()")
        return t >= self._stop


class LilBoundary:
    """Halt once arm `arm` has >= min_count pulls and its standardized
    partial sum clears the iterated-logarithm curve:

        S - mean*N >= sd * sqrt(N * loglog N).

    Almost surely finite, but with very heavy tails; pair it with a cap
    and decide downstream how capped episodes are treated.
    """

    kind = "lil"

    def __init__(self, arm: int, min_count: int, mean: float, sd: float):
        if min_count < 3:
            raise ConfigError(f"lil needs min_count >= 3 (loglog N > 0), got {min_count}")
        if sd <= 0:
            raise ConfigError(f"lil needs sd > 0, got {sd}")
        self.arm = int(arm)
        self.min_count = int(min_count)
        self.mean = mean
        self.sd = sd

    def __call__(self, t, view, gen):
        n = view.count(self.arm)
        if n < self.min_count:
            return False
        s = view.total(self.arm)
        return s - self.mean * n >= self.sd * math.sqrt(n * math.log(math.log(n)))


class MeanThreshold:
    kind = "mean-threshold"

    def __init__(self, arm: int, level: float):
        self.arm = int(arm)
        self.level = level

    def __call__(self, t, view, gen):
        n = view.count(self.arm)
        return n >= 1 and view.total(self.arm) / n >= self.level


class LineCrossing:
    """Discretized drift-vs-line race: halt when the partial sum of the
    single arm's increments reaches slope * (t*dt) + intercept.  The dt
    attribute lets the engine record the continuous time t*dt at stop."""

    kind = "line-crossing"

    def __init__(self, slope: float, intercept: float, dt: float):
        if dt <= 0:
            raise ConfigError(f"line-crossing needs dt > 0, got {dt}")
        if intercept <= 0:
            raise ConfigError(f"line-crossing needs intercept > 0, got {intercept}")
        self.slope = slope
        self.intercept = intercept
        self.dt = dt

    def __call__(self, t, view, gen):
        s = float(view.rewards.sum())
        return s >= self.slope * (t * self.dt) + self.intercept


# -- choosers -------------------------------------------------------------------


class FixedChoice:
    kind = "fixed"

    def __init__(self, arm: int):
        if arm < 0:
            raise ConfigError(f"chooser arm must be >= 0, got {arm}")
        self.arm = int(arm)

    def __call__(self, view, gen):
        return self.arm


class RandomNonadaptive:
    kind = "random-nonadaptive"

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ConfigError(f"chooser probs must be a probability vector, got {probs}")
        self.probs = p

    def __call__(self, view, gen):
        u = gen.random()
        return min(int(np.searchsorted(np.cumsum(self.probs), u, side="right")), len(self.probs) - 1)


class BestEmpirical:
    kind = "best-empirical"

    def __call__(self, view, gen):
        return int(np.argmax(_means_or(view, -math.inf)))


class MostSampled:
    kind = "most-sampled"

    def __call__(self, view, gen):
        return int(np.argmax(view.counts()))


class WorstEmpirical:
    kind = "worst-empirical"

    def __call__(self, view, gen):
        return int(np.argmin(_means_or(view, math.inf)))


# -- rewinders --------------------------------------------------------------------


class NoRewind:
    kind = "none"

    def __call__(self, view, t_lo, chosen):
        return view.t


class ArgmaxMean:
    """tau = earliest time in [t_lo, T] maximizing the chosen arm's
    running mean.  The mean only moves when the chosen arm is pulled, so
    it suffices to scan t_lo and the later pull times."""

    kind = "argmax-mean"

    def __call__(self, view, t_lo, chosen):
        pulls = np.nonzero(view.actions == chosen)[0] + 1  # 1-based pull times
        if pulls.size == 0:
            return view.t  # chosen arm never sampled: nothing to maximize
        means = np.cumsum(view.rewards[pulls - 1]) / np.arange(1, pulls.size + 1)
        n_lo = int(np.searchsorted(pulls, t_lo, side="right"))
        best_t, best_m = view.t, -math.inf
        if n_lo >= 1:
            best_t, best_m = t_lo, float(means[n_lo - 1])
        for j in range(n_lo, pulls.size):
            if float(means[j]) > best_m:
                best_t, best_m = int(pulls[j]), float(means[j])
        return best_t


class FixedFraction:
    kind = "fixed-fraction"

    def __init__(self, fraction: float):
        if not 0.0 < fraction <= 1.0:
            raise ConfigError(f"rewind fraction must be in (0, 1], got {fraction}")
        self.fraction = fraction

    def __call__(self, view, t_lo, chosen):
        return max(t_lo, math.ceil(self.fraction * view.t))


# -- factories ----------------------------------------------------------------------

_SAMPLERS = {
    "uniform-random": lambda p: UniformRandom(),
    "epsilon-greedy": lambda p: EpsilonGreedy(float(p["epsilon"])),
    "ucb1": lambda p: Ucb1(float(p.get("c", math.sqrt(2.0)))),
    "thompson-gaussian": lambda p: ThompsonGaussian(
        float(p.get("prior_mean", 0.0)), float(p.get("prior_sd", 1.0)), float(p.get("obs_sd", 1.0))
    ),
    "thompson-bernoulli": lambda p: ThompsonBernoulli(float(p.get("a", 1.0)), float(p.get("b", 1.0))),
    "outlier-gate": lambda p: OutlierGate(float(p["alpha"])),
    "duel-commit": lambda p: DuelCommit(),
}

_STOPPERS = {
    "fixed": lambda p: FixedHorizon(int(p["t_star"])),
    "poisson-plus-one": lambda p: PoissonPlusOne(float(p["rate"])),
    "lil": lambda p: LilBoundary(
        int(p.get("arm", 0)), int(p["min_count"]), float(p["mean"]), float(p["sd"])
    ),
    "mean-threshold": lambda p: MeanThreshold(int(p.get("arm", 0)), float(p["level"])),
    "line-crossing": lambda p: LineCrossing(float(p["slope"]), float(p["intercept"]), float(p["dt"])),
}

_CHOOSERS = {
    "fixed": lambda p: FixedChoice(int(p["arm"])),
    "random-nonadaptive": lambda p: RandomNonadaptive(p["probs"]),
    "best-empirical": lambda p: BestEmpirical(),
    "most-sampled": lambda p: MostSampled(),
    "worst-empirical": lambda p: WorstEmpirical(),
}

_REWINDERS = {
    "none": lambda p: NoRewind(),
    "argmax-mean": lambda p: ArgmaxMean(),
    "fixed-fraction": lambda p: FixedFraction(float(p["fraction"])),
}


def _build(table: dict, cfg: dict, what: str):
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"{what} config must be a mapping with a 'kind': {cfg!r}")
    kind = cfg["kind"]
    if kind not in table:
        raise ConfigError(f"unknown {what} kind {kind!r} (have: {sorted(table)})")
    params = {k: v for k, v in cfg.items() if k != "kind"}
    try:
        return table[kind](params)
    except KeyError as exc:
        raise ConfigError(f"{what} '{kind}' missing parameter {exc}") from None


def sampler_from_config(cfg: dict):
    return _build(_SAMPLERS, cfg, "sampler")


def stopper_from_config(cfg: dict):
    return _build(_STOPPERS, cfg, "stopper")


def chooser_from_config(cfg: dict):
    return _build(_CHOOSERS, cfg, "chooser")


def rewinder_from_config(cfg: dict):
    return _build(_REWINDERS, cfg, "rewinder")
