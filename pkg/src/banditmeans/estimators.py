"""Monte Carlo estimators over batches of completed episodes.

EpisodeBatch is a columnar view of many episodes: per-arm counts and
sums at the stop time and at the rewound time, plus the chosen arm,
stop/rewind times and the truncation flag.  Every estimator reads from
it, selects the target arm per episode, applies an optional count
normalization, and reports an MCEstimate with a plain standard error.

Truncated episodes (the horizon cap fired before the stopping rule) are
excluded by default and the exclusion count is carried on the estimate;
pass include_truncated=True to keep them, which is the right call when
the capped rule is itself the object of study.

Episodes where the requested statistic is undefined (an unsampled
target arm, a discounted count below its threshold) raise: scenarios
are expected to arrange warmup so this cannot happen, and silently
dropping such episodes would bias the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .cgf import CgfFamily
from .errors import UndefinedStatError

__all__ = [
    "MCEstimate",
    "EpisodeBatch",
    "EffSampleSizes",
    "DependenceReport",
    "estimate_bias",
    "estimate_l1_risk",
    "estimate_l2_risk",
    "estimate_r_quasinorm",
    "estimate_bregman_risk",
    "estimate_eff_sizes",
    "estimate_deviation_curve",
    "estimate_dependence",
]

R_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)

NORMALIZATIONS = ("none", "count", "log-discounted", "loglog-discounted")


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_reps: int
    n_truncated_excluded: int
    n_domain_excluded: int = 0  # bregman statistic outside the conjugate domain

    def __post_init__(self):
        if self.n_reps < 2:
            raise ValueError(f"an estimate needs n_reps >= 2, got {self.n_reps}")


def _mc(values: np.ndarray, n_excluded: int, n_domain: int = 0) -> MCEstimate:
    m = len(values)
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1))
    return MCEstimate(mean, sd / math.sqrt(m), m, n_excluded, n_domain)


@dataclass
class EpisodeBatch:
    """Columnar sufficient statistics for a batch of episodes.

    Count columns are floats: for rules that carry a continuous clock
    (the discretized drift race) counts hold clock time, not steps, so
    every estimator downstream works in the continuous parametrization.
    """

    k_arms: int
    stop_time: np.ndarray  # (n,) int
    rewound_time: np.ndarray  # (n,) int
    chosen: np.ndarray  # (n,) int
    truncated: np.ndarray  # (n,) bool
    counts_stop: np.ndarray  # (n, k) float
    sums_stop: np.ndarray
    counts_rew: np.ndarray
    sums_rew: np.ndarray

    def __post_init__(self):
        n = len(self.stop_time)
        for name in ("rewound_time", "chosen", "truncated"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"batch column {name} has inconsistent length")
        for name in ("counts_stop", "sums_stop", "counts_rew", "sums_rew"):
            if getattr(self, name).shape != (n, self.k_arms):
                raise ValueError(f"batch column {name} must have shape (n, k_arms)")

    @property
    def n_reps(self) -> int:
        return len(self.stop_time)

    @property
    def truncated_fraction(self) -> float:
        return float(np.mean(self.truncated))

    @classmethod
    def from_records(cls, records: Sequence) -> "EpisodeBatch":
        if not records:
            raise ValueError("cannot build a batch from zero episodes")
        k = records[0].k_arms
        n = len(records)
        out = cls(
            k_arms=k,
            stop_time=np.array([r.stop_time for r in records], dtype=np.int64),
            rewound_time=np.array([r.rewound_time for r in records], dtype=np.int64),
            chosen=np.array([r.chosen_arm for r in records], dtype=np.int64),
            truncated=np.array([r.truncated for r in records], dtype=bool),
            counts_stop=np.zeros((n, k)),
            sums_stop=np.zeros((n, k)),
            counts_rew=np.zeros((n, k)),
            sums_rew=np.zeros((n, k)),
        )
        for i, r in enumerate(records):
            out.counts_stop[i] = r.counts()
            out.sums_stop[i] = r.totals()
            out.counts_rew[i] = r.counts(r.rewound_time)
            out.sums_rew[i] = r.totals(r.rewound_time)
            if r.stop_clock is not None:
                # continuous parametrization: a step contributes dt, not 1
                scale = r.stop_clock / r.stop_time
                out.counts_stop[i] *= scale
                out.counts_rew[i] *= scale
        return out

    @classmethod
    def concat(cls, parts: Sequence["EpisodeBatch"]) -> "EpisodeBatch":
        if not parts:
            raise ValueError("nothing to concatenate")
        k = parts[0].k_arms
        if any(p.k_arms != k for p in parts):
            raise ValueError("cannot concatenate batches with different arm counts")
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
        return cls(
            k_arms=k,
            stop_time=cat("stop_time"),
            rewound_time=cat("rewound_time"),
            chosen=cat("chosen"),
            truncated=cat("truncated"),
            counts_stop=cat("counts_stop"),
            sums_stop=cat("sums_stop"),
            counts_rew=cat("counts_rew"),
            sums_rew=cat("sums_rew"),
        )


def _gather(
    batch: EpisodeBatch,
    means: Optional[np.ndarray],
    target: Union[str, int],
    at: str,
    include_truncated: bool,
):
    """Per-episode (count, sum, true mean) of the target arm, plus the
    number of truncated episodes dropped."""
    if at == "stop":
        counts, sums = batch.counts_stop, batch.sums_stop
    elif at == "rewound":
        counts, sums = batch.counts_rew, batch.sums_rew
    else:
        raise ValueError(f"at must be 'stop' or 'rewound', got {at!r}")

    keep = np.ones(batch.n_reps, dtype=bool) if include_truncated else ~batch.truncated
    n_excluded = int(batch.n_reps - keep.sum())
    if keep.sum() < 2:
        raise UndefinedStatError("fewer than 2 usable episodes after truncation filtering")

    if target == "chosen":
        idx = batch.chosen[keep]
    else:
        arm = int(target)
        if not 0 <= arm < batch.k_arms:
            raise ValueError(f"target arm {arm} outside [0, {batch.k_arms})")
        idx = np.full(int(keep.sum()), arm, dtype=np.int64)

    rows = np.nonzero(keep)[0]
    n_sel = counts[rows, idx]
    s_sel = sums[rows, idx]
    if np.any(~np.isfinite(n_sel)):
        # fast engine paths only track rewound stats for the chosen arm
        raise UndefinedStatError("target arm has no recorded stats at this time")
    if np.any(n_sel <= 0):
        bad = int(np.count_nonzero(n_sel <= 0))
        raise UndefinedStatError(f"{bad} episodes have an unsampled target arm")
    if means is None:
        mu = None
    else:
        means = np.asarray(means, dtype=float)
        if means.shape != (batch.k_arms,):
            raise ValueError(f"means must have shape ({batch.k_arms},)")
        mu = means[idx]
    return n_sel, s_sel, mu, n_excluded


def _weights(n: np.ndarray, normalization: str) -> np.ndarray:
    if normalization == "none":
        return np.ones_like(n)
    if normalization == "count":
        return n
    if normalization == "log-discounted":
        if np.any(n < 2):
            raise UndefinedStatError("N/log N undefined for episodes with N < 2")
        return n / np.log(n)
    if normalization == "loglog-discounted":
        if np.any(n < 3):
            raise UndefinedStatError("N/loglog N undefined for episodes with N < 3")
        return n / np.log(np.log(n))
    raise ValueError(f"unknown normalization {normalization!r} (have: {NORMALIZATIONS})")


# -- scalar-risk estimators -----------------------------------------------------


def estimate_bias(
    batch: EpisodeBatch,
    means,
    target: Union[str, int] = "chosen",
    at: str = "stop",
    include_truncated: bool = False,
) -> MCEstimate:
    n, s, mu, n_exc = _gather(batch, means, target, at, include_truncated)
    return _mc(s / n - mu, n_exc)


def estimate_l1_risk(
    batch: EpisodeBatch,
    means,
    target: Union[str, int] = "chosen",
    at: str = "stop",
    normalization: str = "none",
    include_truncated: bool = False,
) -> MCEstimate:
    n, s, mu, n_exc = _gather(batch, means, target, at, include_truncated)
    return _mc(_weights(n, normalization) * np.abs(s / n - mu), n_exc)


def estimate_l2_risk(
    batch: EpisodeBatch,
    means,
    target: Union[str, int] = "chosen",
    at: str = "stop",
    normalization: str = "none",
    include_truncated: bool = False,
) -> MCEstimate:
    n, s, mu, n_exc = _gather(batch, means, target, at, include_truncated)
    return _mc(_weights(n, normalization) * (s / n - mu) ** 2, n_exc)


def _bregman_values(fam: CgfFamily, dev: np.ndarray) -> np.ndarray:
    # vector fast paths for the families with cheap closed conjugates
    if fam.kind == "sub-gaussian":
        sd = fam.params["sd"]
        return 0.5 * dev * dev / (sd * sd)
    return np.array([fam.conjugate(float(z)) for z in dev])


def estimate_bregman_risk(
    batch: EpisodeBatch,
    means,
    fam: CgfFamily,
    target: Union[str, int] = "chosen",
    at: str = "stop",
    normalization: str = "count",
    include_truncated: bool = False,
) -> MCEstimate:
    """Mean of weight * conj(mu_hat - mu).

    Episodes whose deviation falls outside the conjugate's effective
    domain (possible for bounded-support families) are excluded and
    counted in n_domain_excluded rather than poisoning the mean.
    """
    n, s, mu, n_exc = _gather(batch, means, target, at, include_truncated)
    w = _weights(n, normalization)
    vals = w * _bregman_values(fam, s / n - mu)
    finite = np.isfinite(vals)
    n_dom = int(np.count_nonzero(~finite))
    if n_dom == len(vals):
        raise UndefinedStatError("every episode fell outside the conjugate domain")
    return _mc(vals[finite], n_exc, n_dom)


def estimate_r_quasinorm(
    batch: EpisodeBatch,
    means,
    r: float,
    loss: str = "l2",
    fam: Optional[CgfFamily] = None,
    target: Union[str, int] = "chosen",
    at: str = "stop",
    normalization: str = "none",
    include_truncated: bool = False,
) -> MCEstimate:
    """(E[loss^r])^(1/r) with a delta-method standard error."""
    if r <= 0:
        raise ValueError(f"quasi-norm order must be > 0, got {r}")
    n, s, mu, n_exc = _gather(batch, means, target, at, include_truncated)
    w = _weights(n, normalization)
    if loss == "l2":
        base = w * (s / n - mu) ** 2
    elif loss == "bregman":
        if fam is None:
            raise ValueError("bregman loss needs a family")
        base = w * _bregman_values(fam, s / n - mu)
    else:
        raise ValueError(f"loss must be 'l2' or 'bregman', got {loss!r}")
    powed = base**r
    m = len(powed)
    mean_r = float(np.mean(powed))
    se_r = float(np.std(powed, ddof=1)) / math.sqrt(m)
    if mean_r <= 0:
        return MCEstimate(0.0, 0.0, m, n_exc)
    value = mean_r ** (1.0 / r)
    stderr = (1.0 / r) * mean_r ** (1.0 / r - 1.0) * se_r
    return MCEstimate(value, stderr, m, n_exc)


# -- effective sample sizes -------------------------------------------------------


@dataclass(frozen=True)
class EffSampleSizes:
    """Harmonic-style effective sizes of the per-episode counts.

    plain(r) inverts E[N^-r]; the discounted variants do the same with
    N/log N and N/loglog N.  n_eff is plain(1).  A small table on the
    default r grid is precomputed for reports.
    """

    n_eff: float
    plain: Callable[[float], float]
    log_discounted: Callable[[float], float]
    loglog_discounted: Callable[[float], float]
    n_reps: int
    table: dict = field(default_factory=dict)


def _inv_moment(vals: np.ndarray) -> Callable[[float], float]:
    def f(r: float) -> float:
        if r <= 0:
            raise ValueError(f"effective-size order must be > 0, got {r}")
        return float(np.mean(vals ** (-r)) ** (-1.0 / r))

    return f


def estimate_eff_sizes(
    batch: EpisodeBatch,
    target: Union[str, int] = "chosen",
    at: str = "stop",
    include_truncated: bool = False,
) -> EffSampleSizes:
    n, _, _, _ = _gather(batch, None, target, at, include_truncated)
    plain = _inv_moment(n)
    log_disc = _inv_moment(_weights(n, "log-discounted")) if np.all(n >= 2) else _undefined
    loglog_disc = _inv_moment(_weights(n, "loglog-discounted")) if np.all(n >= 3) else _undefined
    table = {
        "plain": {r: plain(r) for r in R_GRID},
    }
    if log_disc is not _undefined:
        table["log-discounted"] = {r: log_disc(r) for r in R_GRID}
    if loglog_disc is not _undefined:
        table["loglog-discounted"] = {r: loglog_disc(r) for r in R_GRID}
    return EffSampleSizes(
        n_eff=plain(1.0),
        plain=plain,
        log_discounted=log_disc,
        loglog_discounted=loglog_disc,
        n_reps=len(n),
        table=table,
    )


def _undefined(r: float) -> float:
    raise UndefinedStatError("discounted effective size undefined: some counts below threshold")


# -- tail curves and dependence ---------------------------------------------------


def estimate_deviation_curve(
    batch: EpisodeBatch,
    means,
    delta_grid,
    statistic: str = "bregman",
    fam: Optional[CgfFamily] = None,
    sds=None,
    target: Union[str, int] = "chosen",
    at: str = "stop",
    normalization: str = "count",
    include_truncated: bool = False,
) -> np.ndarray:
    """Empirical tail P(statistic >= delta) on a grid.

    statistic 'bregman' uses weight * conj(mu_hat - mu); 'scaled-l2'
    uses weight * ((mu_hat - mu)/sd)^2 with per-arm true sds.  Returns
    an array with columns (delta, p_hat, binomial stderr).
    """
    n, s, mu, _ = _gather(batch, means, target, at, include_truncated)
    w = _weights(n, normalization)
    dev = s / n - mu
    if statistic == "bregman":
        if fam is None:
            raise ValueError("bregman statistic needs a family")
        stat = w * _bregman_values(fam, dev)
    elif statistic == "scaled-l2":
        if sds is None:
            raise ValueError("scaled-l2 statistic needs per-arm sds")
        sds = np.asarray(sds, dtype=float)
        if sds.shape != (batch.k_arms,):
            raise ValueError(f"sds must have shape ({batch.k_arms},)")
        if isinstance(target, str):
            keep = np.ones(batch.n_reps, dtype=bool) if include_truncated else ~batch.truncated
            sd_sel = sds[batch.chosen[keep]]
        else:
            sd_sel = sds[int(target)]
        stat = w * (dev / sd_sel) ** 2
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    m = len(stat)
    out = np.empty((len(delta_grid), 3))
    for j, d in enumerate(delta_grid):
        p = float(np.mean(stat >= d))
        out[j] = (d, p, math.sqrt(p * (1.0 - p) / m))
    return out


@dataclass(frozen=True)
class DependenceReport:
    """Empirical law of the chosen arm and the dependence functionals it feeds.

    iq_upper(q) evaluates 1 + sum_k p_k^2 (|1/p_k - 1|^q - 1) at the
    empirical choice law; cap(q) is the distribution-free ceiling
    ((k-1)/k) ((k-1)^(q-1) + 1), valid for q in [1, 2].
    """

    p_hat: np.ndarray
    entropy: float
    n_reps: int

    def iq_upper(self, q: float) -> float:
        if q < 1.0:
            raise ValueError(f"dependence order must be >= 1, got {q}")
        total = 1.0
        for p in self.p_hat:
            if p > 0:
                total += p * p * (abs(1.0 / p - 1.0) ** q - 1.0)
        return total

    def cap(self, q: float) -> float:
        if not 1.0 <= q <= 2.0:
            raise ValueError(f"the ceiling is only valid for q in [1, 2], got {q}")
        k = len(self.p_hat)
        if k < 2:
            return 0.0
        return (k - 1.0) / k * ((k - 1.0) ** (q - 1.0) + 1.0)


def estimate_dependence(batch: EpisodeBatch, include_truncated: bool = False) -> DependenceReport:
    keep = np.ones(batch.n_reps, dtype=bool) if include_truncated else ~batch.truncated
    if keep.sum() < 2:
        raise UndefinedStatError("fewer than 2 usable episodes after truncation filtering")
    chosen = batch.chosen[keep]
    p_hat = np.bincount(chosen, minlength=batch.k_arms) / len(chosen)
    nz = p_hat[p_hat > 0]
    entropy = float(-(nz * np.log(nz)).sum())
    return DependenceReport(p_hat=p_hat, entropy=entropy, n_reps=int(keep.sum()))
