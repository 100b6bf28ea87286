"""Reward distributions.

An ArmSpec fixes one arm's reward law and exposes exactly what the
estimators and bounds need from it: iid draws, the true mean, centered
absolute moments of any order p >= 1 (as the p-norm sigma_p, +inf when
the moment diverges), exact quantiles and the cdf.  Closed forms are
used wherever the family admits one; the rest goes through adaptive
quadrature and is cached per (family, p).

Families: gaussian, bernoulli, exponential, student-t (df > 2 so the
variance exists), uniform, and a discrete exponential family tilted on
a fixed support grid whose log-partition is tabulated and splined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

from . import cgf
from .errors import ConfigError

__all__ = ["ArmSpec", "arm_from_config"]

_QUAD_EPSABS = 1e-11
_QUAD_EPSREL = 1e-9


@dataclass
class ArmSpec:
    """One arm's reward distribution.  Treat as immutable once built."""

    family: str
    params: dict
    mean: float
    envelope: Optional[dict] = None  # config of a CgfFamily this arm satisfies
    _pnorm_cache: dict = field(default_factory=dict, repr=False)
    _grid: Optional[tuple] = field(default=None, repr=False)  # (support, pmf, log_partition)

    # -- sampling ------------------------------------------------------------

    def draw(self, gen: np.random.Generator, n: int) -> np.ndarray:
        p = self.params
        if self.family == "gaussian":
            return gen.normal(p["mean"], p["sd"], size=n)
        if self.family == "bernoulli":
            # inverse-cdf on one uniform per draw keeps stream use fixed
            return (gen.random(n) < p["mean"]).astype(float)
        if self.family == "exponential":
            return gen.exponential(1.0 / p["rate"], size=n)
        if self.family == "student-t":
            return p["loc"] + p["scale"] * gen.standard_t(p["df"], size=n)
        if self.family == "uniform":
            return gen.uniform(p["lo"], p["hi"], size=n)
        if self.family == "exp-family-grid":
            support, pmf, _ = self._grid
            idx = np.searchsorted(np.cumsum(pmf), gen.random(n), side="right")
            return support[np.minimum(idx, len(support) - 1)]
        raise ConfigError(f"unknown family {self.family!r}")

    def sample(self, gen: np.random.Generator) -> float:
        return float(self.draw(gen, 1)[0])

    # -- moments -------------------------------------------------------------

    def centered_pnorm(self, p: float) -> float:
        """sigma_p = E[|Y - mean|^p]^(1/p); +inf when the moment diverges."""
        if p < 1:
            raise ValueError(f"moment order must be >= 1, got {p}")
        key = float(p)
        if key not in self._pnorm_cache:
            self._pnorm_cache[key] = self._centered_pnorm_uncached(key)
        return self._pnorm_cache[key]

    def variance(self) -> float:
        s2 = self.centered_pnorm(2.0)
        return s2 * s2

    def _centered_pnorm_uncached(self, p: float) -> float:
        pr = self.params
        if self.family == "gaussian":
            sd = pr["sd"]
            return sd * (2.0 ** (p / 2) * special.gamma((p + 1) / 2) / math.sqrt(math.pi)) ** (1.0 / p)
        if self.family == "bernoulli":
            m = pr["mean"]
            return ((1 - m) * m**p + m * (1 - m) ** p) ** (1.0 / p)
        if self.family == "uniform":
            half = (pr["hi"] - pr["lo"]) / 2.0
            return half * (1.0 / (p + 1.0)) ** (1.0 / p)
        if self.family == "student-t":
            df, scale = pr["df"], pr["scale"]
            if p >= df:
                return math.inf
            # E|T|^p = df^(p/2) G((p+1)/2) G((df-p)/2) / (sqrt(pi) G(df/2))
            lg = (
                0.5 * p * math.log(df)
                + special.gammaln((p + 1) / 2)
                + special.gammaln((df - p) / 2)
                - 0.5 * math.log(math.pi)
                - special.gammaln(df / 2)
            )
            return scale * math.exp(lg / p)
        if self.family == "exponential":
            rate = pr["rate"]
            if p == 1.0:
                return 2.0 / (rate * math.e)
            if p == 2.0:
                return 1.0 / rate
            dist = stats.expon(scale=1.0 / rate)
            return self._quad_pnorm(dist, self.mean, p)
        if self.family == "exp-family-grid":
            support, pmf, _ = self._grid
            return float(np.sum(pmf * np.abs(support - self.mean) ** p) ** (1.0 / p))
        raise ConfigError(f"unknown family {self.family!r}")

    @staticmethod
    def _quad_pnorm(dist, mean: float, p: float) -> float:
        f = lambda y: np.abs(y - mean) ** p * dist.pdf(y)
        lo, hi = dist.support()
        val, _ = integrate.quad(f, lo, mean, epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=200)
        val2, _ = integrate.quad(f, mean, hi, epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=200)
        return (val + val2) ** (1.0 / p)

    # -- distribution functions ------------------------------------------------

    def exact_quantile(self, alpha: float) -> float:
        """Upper-tail quantile: the smallest q with P(Y > q) <= alpha."""
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {alpha}")
        if self.family == "exp-family-grid":
            support, pmf, _ = self._grid
            tail = np.cumsum(pmf[::-1])[::-1]  # P(Y >= support[i])
            ok = np.nonzero(tail <= alpha)[0]
            return float(support[ok[0] - 1]) if ok.size and ok[0] > 0 else float(support[-1])
        return float(self._scipy_dist().isf(alpha))

    def cdf(self, x: float) -> float:
        if self.family == "exp-family-grid":
            support, pmf, _ = self._grid
            return float(np.sum(pmf[support <= x]))
        return float(self._scipy_dist().cdf(x))

    def _scipy_dist(self):
        p = self.params
        if self.family == "gaussian":
            return stats.norm(p["mean"], p["sd"])
        if self.family == "bernoulli":
            return stats.bernoulli(p["mean"])
        if self.family == "exponential":
            return stats.expon(scale=1.0 / p["rate"])
        if self.family == "student-t":
            return stats.t(p["df"], loc=p["loc"], scale=p["scale"])
        if self.family == "uniform":
            return stats.uniform(p["lo"], p["hi"] - p["lo"])
        raise ConfigError(f"no distribution object for family {self.family!r}")

    # -- envelope hookup ---------------------------------------------------------

    def log_partition(self) -> cgf.LogPartition:
        """Tabulated log-partition of a grid family (errors otherwise)."""
        if self.family != "exp-family-grid":
            raise ConfigError("log_partition is only defined for exp-family-grid arms")
        return self._grid[2]


# -- constructors ---------------------------------------------------------------


def gaussian(mean: float, sd: float, envelope: Optional[dict] = None) -> ArmSpec:
    if not math.isfinite(mean) or sd <= 0:
        raise ConfigError(f"gaussian needs finite mean and sd > 0, got {mean}, {sd}")
    env = envelope if envelope is not None else {"kind": "sub-gaussian", "sd": sd}
    return ArmSpec("gaussian", {"mean": mean, "sd": sd}, mean, env)


def bernoulli(mean: float) -> ArmSpec:
    if not 0.0 < mean < 1.0:
        raise ConfigError(f"bernoulli mean must be in (0, 1), got {mean}")
    return ArmSpec("bernoulli", {"mean": mean}, mean, {"kind": "bernoulli", "mean": mean})


def exponential(rate: float) -> ArmSpec:
    if rate <= 0:
        raise ConfigError(f"exponential rate must be > 0, got {rate}")
    return ArmSpec("exponential", {"rate": rate}, 1.0 / rate)


def student_t(df: float, loc: float = 0.0, scale: float = 1.0) -> ArmSpec:
    # df > 2 so the variance is finite; heavier tails are out of scope
    if df <= 2:
        raise ConfigError(f"student-t needs df > 2, got {df}")
    if scale <= 0:
        raise ConfigError(f"student-t scale must be > 0, got {scale}")
    return ArmSpec("student-t", {"df": df, "loc": loc, "scale": scale}, loc)


def uniform(lo: float, hi: float) -> ArmSpec:
    if not lo < hi:
        raise ConfigError(f"uniform needs lo < hi, got {lo}, {hi}")
    return ArmSpec("uniform", {"lo": lo, "hi": hi}, 0.5 * (lo + hi))


def exp_family_grid(
    support: Sequence[float],
    weights: Sequence[float],
    theta: float,
    window: float = 4.0,
    n_grid: int = 801,
) -> ArmSpec:
    """Discrete exponential family: pmf(y_i) proportional to w_i exp(theta y_i)."""
    support = np.asarray(support, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(support)
    support, weights = support[order], weights[order]
    lp = cgf.tabulated_log_partition(support, weights, theta - window, theta + window, n_grid)
    logits = theta * support + np.log(weights)
    logits -= logits.max()
    pmf = np.exp(logits)
    pmf /= pmf.sum()
    mean = float(np.sum(pmf * support))
    spec = ArmSpec(
        "exp-family-grid",
        {
            "support": support.tolist(),
            "weights": weights.tolist(),
            "theta": theta,
            "window": window,
            "n_grid": n_grid,
        },
        mean,
        {
            "kind": "exp-family",
            "support": support.tolist(),
            "weights": weights.tolist(),
            "theta": theta,
            "window": window,
            "n_grid": n_grid,
        },
    )
    spec._grid = (support, pmf, lp)
    return spec


_BUILDERS = {
    "gaussian": lambda p: gaussian(float(p["mean"]), float(p["sd"])),
    "bernoulli": lambda p: bernoulli(float(p["mean"])),
    "exponential": lambda p: exponential(float(p["rate"])),
    "student-t": lambda p: student_t(
        float(p["df"]), float(p.get("loc", 0.0)), float(p.get("scale", 1.0))
    ),
    "uniform": lambda p: uniform(float(p["lo"]), float(p["hi"])),
    "exp-family-grid": lambda p: exp_family_grid(
        p["support"],
        p["weights"],
        float(p["theta"]),
        float(p.get("window", 4.0)),
        int(p.get("n_grid", 801)),
    ),
}


def arm_from_config(cfg: dict) -> ArmSpec:
    if not isinstance(cfg, dict) or "family" not in cfg:
        raise ConfigError(f"arm config must be a mapping with a 'family': {cfg!r}")
    family = cfg["family"]
    if family not in _BUILDERS:
        raise ConfigError(f"unknown arm family {family!r}")
    params = {k: v for k, v in cfg.items() if k != "family"}
    try:
        return _BUILDERS[family](params)
    except KeyError as exc:
        raise ConfigError(f"arm family '{family}' missing parameter {exc}") from None
