"""Convex increment envelopes and their Legendre transforms.

A family here is a convex function psi with psi(0) = psi'(0) = 0 that
upper-bounds the cumulant generating function of a centered reward
increment on an interval around zero.  Everything downstream (bias
boxes, Bregman losses, stopped-risk bounds) is phrased through the
convex conjugate

    conj(z) = sup_u { u*z - psi(u) },

its two monotone inverse branches, and the Bregman divergence
conj(mu_hat - mu).  Closed forms are used where they exist and are
cross-checked in the tests against a dense-grid oracle; the generic
numeric path handles tabulated log-partition families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import ConfigError

__all__ = [
    "CgfFamily",
    "LogPartition",
    "InfiniteConjugateError",
    "ConjugateRangeError",
    "sub_gaussian",
    "sub_exponential",
    "bernstein",
    "bernoulli_cgf",
    "exp_family",
    "family_from_config",
    "kl_between_means",
    "bernstein_lower_bound",
    "numeric_conjugate_oracle",
]

_BISECT_XTOL = 1e-12


class InfiniteConjugateError(ValueError):
    """The supremum defining the conjugate diverges at the given point."""


class ConjugateRangeError(ValueError):
    """Requested inverse level exceeds the reachable supremum on a branch."""


@dataclass(frozen=True)
class LogPartition:
    """A log-partition (cumulant) function with first two derivatives.

    Built either from analytic callables or from tabulated values on a
    natural-parameter grid, in which case a cubic spline supplies the
    function and both derivatives.
    """

    value: Callable[[float], float]
    deriv: Callable[[float], float]
    deriv2: Callable[[float], float]
    domain: tuple[float, float]

    @classmethod
    def from_grid(cls, thetas: Sequence[float], values: Sequence[float]) -> "LogPartition":
        th = np.asarray(thetas, dtype=float)
        va = np.asarray(values, dtype=float)
        if th.ndim != 1 or th.size < 4:
            raise ConfigError("log-partition grid needs at least 4 points")
        if not np.all(np.diff(th) > 0):
            raise ConfigError("log-partition grid must be strictly increasing")
        spline = CubicSpline(th, va)
        d1 = spline.derivative(1)
        d2 = spline.derivative(2)
        return cls(
            value=lambda t: float(spline(t)),
            deriv=lambda t: float(d1(t)),
            deriv2=lambda t: float(d2(t)),
            domain=(float(th[0]), float(th[-1])),
        )

    def mean_at(self, theta: float) -> float:
        return self.deriv(theta)

    def natural_at(self, mean: float) -> float:
        """Invert the mean map (deriv is increasing by convexity)."""
        lo, hi = self.domain
        f = lambda t: self.deriv(t) - mean
        flo, fhi = f(lo), f(hi)
        if flo > 0 or fhi < 0:
            raise ConjugateRangeError(
                f"mean {mean} outside the range [{self.deriv(lo):.6g}, {self.deriv(hi):.6g}] "
                "covered by the log-partition grid"
            )
        return float(brentq(f, lo, hi, xtol=_BISECT_XTOL))


@dataclass
class CgfFamily:
    """One convex envelope family.

    `domain` is the interval where psi is finite; `closed_domain` marks
    families whose endpoints are attainable (tabulated log-partitions).
    `value` returns +inf outside the domain, the usual extended-value
    convention for convex functions.
    """

    kind: str
    params: dict
    domain: tuple[float, float]
    closed_domain: bool = False
    symmetric: bool = False
    _value: Callable[[float], float] = field(repr=False, default=None)
    _deriv: Callable[[float], float] = field(repr=False, default=None)
    _conjugate: Optional[Callable[[float], float]] = field(repr=False, default=None)
    _inv_plus: Optional[Callable[[float], float]] = field(repr=False, default=None)
    # reachable sup of the conjugate on each branch, +inf when unbounded
    branch_sup_plus: float = math.inf
    branch_sup_minus: float = math.inf
    # effective domain edge of the conjugate on each branch (z beyond -> +inf)
    conj_edge_plus: float = math.inf
    conj_edge_minus: float = math.inf

    # -- evaluation ---------------------------------------------------------

    def value(self, u: float) -> float:
        lo, hi = self.domain
        if self.closed_domain:
            if u < lo or u > hi:
                return math.inf
        elif u <= lo or u >= hi:
            return math.inf
        return self._value(u)

    def deriv(self, u: float) -> float:
        lo, hi = self.domain
        inside = (lo <= u <= hi) if self.closed_domain else (lo < u < hi)
        if not inside:
            raise ValueError(f"derivative requested outside domain ({lo}, {hi}): {u}")
        return self._deriv(u)

    # -- conjugate and friends ---------------------------------------------

    def conjugate(self, z: float) -> float:
        if self._conjugate is not None:
            return self._conjugate(z)
        return self._conjugate_numeric(z)

    def bregman(self, mu_hat: float, mu: float) -> float:
        """Divergence of the estimate from the truth: conj(mu_hat - mu)."""
        return self.conjugate(mu_hat - mu)

    def inv_conjugate_plus(self, level: float) -> float:
        """Smallest z >= 0 with conj(z) >= level."""
        return self._inverse(level, +1)

    def inv_conjugate_minus(self, level: float) -> float:
        """The nonpositive z of smallest magnitude with conj(z) >= level."""
        return self._inverse(level, -1)

    # -- numeric machinery --------------------------------------------------

    def _conjugate_numeric(self, z: float) -> float:
        if z == 0.0:
            return 0.0
        # concave objective g(u) = u*z - psi(u); the maximizer sits where
        # psi'(u) = z when that slope is reached inside the domain, else
        # at (or in the limit toward) the edge on the side of sign(z)
        lo, hi = self.domain
        sgn = 1 if z > 0 else -1
        edge = hi if z > 0 else lo
        grad = lambda u: self._deriv(u) - z

        if self.closed_domain:
            if sgn * grad(edge) <= 0:
                return edge * z - self._value(edge)
            u_star = float(brentq(grad, min(0.0, edge), max(0.0, edge), xtol=_BISECT_XTOL))
            return u_star * z - self._value(u_star)

        # open domain: march from 0 toward the edge until grad changes sign
        if math.isinf(edge):
            probes = [sgn * 2.0**j for j in range(0, 63)]
        else:
            probes = [edge * (1.0 - 2.0**-j) for j in range(1, 53)]
        prev = 0.0
        for u_try in probes:
            if sgn * grad(u_try) >= 0:
                a, b = sorted((prev, u_try))
                u_star = float(brentq(grad, a, b, xtol=_BISECT_XTOL))
                return u_star * z - self._value(u_star)
            prev = u_try
        # slope never reached z: g keeps increasing toward the edge; take
        # the limit along the probe sequence if it settles, else diverge
        tail = [u * z - self._value(u) for u in probes[-8:]]
        tail = [v for v in tail if math.isfinite(v)]
        if len(tail) >= 2 and abs(tail[-1] - tail[-2]) <= 1e-9 * max(1.0, abs(tail[-1])):
            return tail[-1]
        raise InfiniteConjugateError(
            f"conjugate of {self.kind} family diverges at z={z:.6g}"
        )

    def _inverse(self, level: float, sign: int) -> float:
        if level < 0:
            raise ValueError(f"inverse level must be >= 0, got {level}")
        if level == 0.0:
            return 0.0
        sup = self.branch_sup_plus if sign > 0 else self.branch_sup_minus
        if level > sup + 1e-12:
            raise ConjugateRangeError(
                f"level {level:.6g} above reachable supremum {sup:.6g} on "
                f"{'plus' if sign > 0 else 'minus'} branch of {self.kind} family"
            )
        if sign > 0 and self._inv_plus is not None:
            return self._inv_plus(level)
        if sign < 0 and self.symmetric and self._inv_plus is not None:
            return -self._inv_plus(level)
        edge = self.conj_edge_plus if sign > 0 else self.conj_edge_minus
        f = lambda z: self.conjugate(sign * z) - level
        z_hi = 1.0
        cap = edge if math.isfinite(edge) else math.inf
        for _ in range(200):
            z_try = min(z_hi, cap) if math.isfinite(cap) else z_hi
            if f(z_try) >= 0:
                return sign * float(brentq(f, 0.0, z_try, xtol=_BISECT_XTOL))
            if math.isfinite(cap) and z_try >= cap:
                # level is below the sup but the bracket closed on the edge
                return sign * cap
            z_hi *= 2.0
        raise ConjugateRangeError(
            f"no bracket found inverting conjugate at level {level:.6g}"
        )


# -- constructors ------------------------------------------------------------


def sub_gaussian(sd: float) -> CgfFamily:
    """psi(u) = sd^2 u^2 / 2 on the whole line."""
    if sd <= 0:
        raise ConfigError(f"sub-gaussian sd must be > 0, got {sd}")
    v = sd * sd
    return CgfFamily(
        kind="sub-gaussian",
        params={"sd": sd},
        domain=(-math.inf, math.inf),
        symmetric=True,
        _value=lambda u: 0.5 * v * u * u,
        _deriv=lambda u: v * u,
        _conjugate=lambda z: 0.5 * z * z / v,
        _inv_plus=lambda l: sd * math.sqrt(2.0 * l),
    )


def sub_exponential(nu: float, alpha: float) -> CgfFamily:
    """psi(u) = nu^2 u^2 / 2 on (-1/alpha, 1/alpha).

    Conjugate is quadratic for |z| <= nu^2/alpha and linear beyond,
    where the maximizer would leave the domain.
    """
    if nu <= 0 or alpha <= 0:
        raise ConfigError(f"sub-exponential needs nu, alpha > 0, got {nu}, {alpha}")
    v = nu * nu
    knee = v / alpha

    def conj(z: float) -> float:
        az = abs(z)
        if az <= knee:
            return 0.5 * az * az / v
        return az / alpha - 0.5 * v / (alpha * alpha)

    def inv_plus(l: float) -> float:
        thresh = 0.5 * knee * knee / v  # conj at the knee
        if l <= thresh:
            return nu * math.sqrt(2.0 * l)
        return alpha * l + 0.5 * v / alpha

    return CgfFamily(
        kind="sub-exponential",
        params={"nu": nu, "alpha": alpha},
        domain=(-1.0 / alpha, 1.0 / alpha),
        symmetric=True,
        _value=lambda u: 0.5 * v * u * u,
        _deriv=lambda u: v * u,
        _conjugate=conj,
        _inv_plus=inv_plus,
    )


def bernstein(sd: float, scale: float) -> CgfFamily:
    """psi(u) = u^2 sd^2 / (2 (1 - scale |u|)) on (-1/scale, 1/scale).

    conj(z) = (sd/scale)^2 * h(scale |z| / sd^2) with
    h(t) = 1 + t - sqrt(1 + 2 t); verified against the grid oracle.
    """
    if sd <= 0 or scale <= 0:
        raise ConfigError(f"bernstein needs sd, scale > 0, got {sd}, {scale}")
    v = sd * sd

    def val(u: float) -> float:
        return 0.5 * u * u * v / (1.0 - scale * abs(u))

    def der(u: float) -> float:
        a = abs(u)
        d = 1.0 - scale * a
        # d/du of u^2 v / (2 d) with d = 1 - scale |u|
        return math.copysign(1.0, u) * v * a * (2.0 * d + scale * a) / (2.0 * d * d) if u != 0 else 0.0

    def conj(z: float) -> float:
        t = scale * abs(z) / v
        return (v / (scale * scale)) * (1.0 + t - math.sqrt(1.0 + 2.0 * t))

    def inv_plus(l: float) -> float:
        m = l * scale * scale / v
        return (m + math.sqrt(2.0 * m)) * v / scale

    return CgfFamily(
        kind="bernstein",
        params={"sd": sd, "scale": scale},
        domain=(-1.0 / scale, 1.0 / scale),
        symmetric=True,
        _value=val,
        _deriv=der,
        _conjugate=conj,
        _inv_plus=inv_plus,
    )


def bernoulli_cgf(mean: float) -> CgfFamily:
    """Exact centered Bernoulli cumulant: psi(u) = log(1-m+m e^u) - m u.

    The conjugate is the binary relative entropy kl(m+z, m), finite on
    [-m, 1-m] and infinite beyond.
    """
    if not 0.0 < mean < 1.0:
        raise ConfigError(f"bernoulli mean must be in (0, 1), got {mean}")
    m = mean

    def val(u: float) -> float:
        # stable for large |u|
        if u > 0:
            return u + math.log(m + (1.0 - m) * math.exp(-u)) - m * u
        return math.log(1.0 - m + m * math.exp(u)) - m * u

    def der(u: float) -> float:
        eu = math.exp(u)
        return m * eu / (1.0 - m + m * eu) - m

    def conj(z: float) -> float:
        p = m + z
        if p < -1e-12 or p > 1.0 + 1e-12:
            return math.inf
        p = min(max(p, 0.0), 1.0)
        return _binary_kl(p, m)

    return CgfFamily(
        kind="bernoulli",
        params={"mean": mean},
        domain=(-math.inf, math.inf),
        _value=val,
        _deriv=der,
        _conjugate=conj,
        branch_sup_plus=_binary_kl(1.0, m),
        branch_sup_minus=_binary_kl(0.0, m),
        conj_edge_plus=1.0 - m,
        conj_edge_minus=m,
    )


def exp_family(lp: LogPartition, theta: float) -> CgfFamily:
    """Centered cumulant of a one-parameter exponential family at theta:

        psi(u) = B(theta+u) - B(theta) - u B'(theta),

    defined for theta+u in the log-partition domain.  Conjugate and
    inverses go through the generic numeric path.
    """
    lo, hi = lp.domain
    if not lo <= theta <= hi:
        raise ConfigError(f"theta {theta} outside log-partition domain [{lo}, {hi}]")
    b0 = lp.value(theta)
    m0 = lp.deriv(theta)
    return CgfFamily(
        kind="exp-family",
        params={"theta": theta},
        domain=(lo - theta, hi - theta),
        closed_domain=True,
        _value=lambda u: lp.value(theta + u) - b0 - u * m0,
        _deriv=lambda u: lp.deriv(theta + u) - m0,
        # sup over a compact natural-parameter window: conjugate is finite
        # (and eventually linear) for every z, so both branches reach any level
    )


def family_from_config(cfg: dict) -> CgfFamily:
    """Build a family from its config mapping ({"kind": ..., params...})."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"envelope config must be a mapping with a 'kind': {cfg!r}")
    kind = cfg["kind"]
    params = {k: v for k, v in cfg.items() if k != "kind"}
    try:
        if kind == "sub-gaussian":
            return sub_gaussian(float(params["sd"]))
        if kind == "sub-exponential":
            return sub_exponential(float(params["nu"]), float(params["alpha"]))
        if kind == "bernstein":
            return bernstein(float(params["sd"]), float(params["scale"]))
        if kind == "bernoulli":
            return bernoulli_cgf(float(params["mean"]))
        if kind == "exp-family":
            support = np.asarray(params["support"], dtype=float)
            weights = np.asarray(params["weights"], dtype=float)
            theta = float(params["theta"])
            window = float(params.get("window", 4.0))
            n_grid = int(params.get("n_grid", 801))
            lp = tabulated_log_partition(support, weights, theta - window, theta + window, n_grid)
            return exp_family(lp, theta)
    except KeyError as exc:
        raise ConfigError(f"envelope '{kind}' missing parameter {exc}") from None
    raise ConfigError(f"unknown envelope kind {kind!r}")


# -- exponential-family helpers ----------------------------------------------


def tabulated_log_partition(
    support: np.ndarray,
    weights: np.ndarray,
    theta_lo: float,
    theta_hi: float,
    n_grid: int = 801,
) -> LogPartition:
    """Tabulate B(theta) = log sum_i w_i exp(theta y_i) on a grid and spline it."""
    support = np.asarray(support, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if support.ndim != 1 or support.size < 2:
        raise ConfigError("exp-family support needs at least 2 points")
    if weights.shape != support.shape:
        raise ConfigError("exp-family weights must match the support shape")
    if np.any(weights <= 0):
        raise ConfigError("exp-family weights must be strictly positive")
    if theta_hi <= theta_lo:
        raise ConfigError("log-partition grid window is empty")
    thetas = np.linspace(theta_lo, theta_hi, n_grid)
    logw = np.log(weights)
    # logsumexp over the support for every grid theta
    expo = thetas[:, None] * support[None, :] + logw[None, :]
    mx = expo.max(axis=1, keepdims=True)
    values = (mx[:, 0] + np.log(np.exp(expo - mx).sum(axis=1)))
    return LogPartition.from_grid(thetas, values)


def kl_between_means(lp: LogPartition, mean_new: float, mean_base: float) -> float:
    """Exponential-family divergence between the members with the given means.

    Computed directly from the natural parameters,
    kl = B'(t1) (t1 - t0) - B(t1) + B(t0), which must agree with the
    Bregman form conj(mean_new - mean_base) of the family centered at t0.
    """
    t1 = lp.natural_at(mean_new)
    t0 = lp.natural_at(mean_base)
    return lp.deriv(t1) * (t1 - t0) - lp.value(t1) + lp.value(t0)


# -- small standalone pieces --------------------------------------------------


def bernstein_lower_bound(sd: float, scale: float, z: float) -> float:
    """Closed lower bound (z^2/2) / (sd^2 + scale |z|) for the bernstein conjugate."""
    return 0.5 * z * z / (sd * sd + scale * abs(z))


def numeric_conjugate_oracle(fam: CgfFamily, z: float, n_grid: int = 200_001) -> float:
    """Dense-grid evaluation of the conjugate, for testing closed forms.

    Slow by design; raises if the grid cannot cover the maximizer.
    """
    if n_grid < 1000:
        raise ValueError("oracle grid too coarse to be trustworthy")
    lo, hi = fam.domain
    if math.isinf(lo) or math.isinf(hi):
        # expand a window until the slope at the edge brackets z
        w = 1.0
        for _ in range(80):
            edge = w if z >= 0 else -w
            if (fam._deriv(edge) - z) * (1 if z >= 0 else -1) > 0:
                break
            w *= 2.0
        else:
            raise InfiniteConjugateError(f"oracle window never bracketed z={z}")
        lo, hi = -w, w
    elif not fam.closed_domain:
        shave = 1e-9 * (hi - lo)
        lo, hi = lo + shave, hi - shave
    grid = np.linspace(lo, hi, n_grid)
    vals = grid * z - np.array([fam._value(u) for u in grid])
    return float(np.max(vals))


def _binary_kl(p: float, q: float) -> float:
    def xlog(a: float, b: float) -> float:
        if a == 0.0:
            return 0.0
        return a * math.log(a / b)

    return xlog(p, q) + xlog(1.0 - p, 1.0 - q)
