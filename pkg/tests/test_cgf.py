import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from banditmeans.cgf import (
    ConjugateRangeError,
    LogPartition,
    bernoulli_cgf,
    bernstein,
    bernstein_lower_bound,
    exp_family,
    family_from_config,
    kl_between_means,
    numeric_conjugate_oracle,
    sub_exponential,
    sub_gaussian,
    tabulated_log_partition,
)
from banditmeans.errors import ConfigError

# frozen closed-form values, independently derived
SUB_EXP_CONJ = {0.5: 0.125, 1.0: 0.5, 2.0: 1.5, 3.0: 2.5}
BERNSTEIN_CONJ = {
    (1.0, 1.0, 1.0): 0.267949192431123,
    (0.5, 1.0, 1.0): 0.085786437626905,
    (2.0, 1.0, 0.5): 1.071796769724491,
    (1.0, 2.0, 0.3): 0.116420912192789,
    (3.0, 1.0, 1.0): 1.354248688935410,
    (-1.5, 1.0, 1.0): 0.5,
}
BERNOULLI_KL_075_05 = 0.130812035941137


def test_sub_gaussian_conjugate_closed_form():
    fam = sub_gaussian(2.0)
    for z in (-3.0, -0.5, 0.0, 0.5, 3.0):
        assert fam.conjugate(z) == pytest.approx(z * z / 8.0, abs=1e-12)


def test_sub_exponential_conjugate_frozen_values():
    fam = sub_exponential(1.0, 1.0)
    for z, want in SUB_EXP_CONJ.items():
        assert fam.conjugate(z) == pytest.approx(want, abs=1e-12)


def test_bernstein_conjugate_frozen_values():
    for (z, sd, scale), want in BERNSTEIN_CONJ.items():
        fam = bernstein(sd, scale)
        assert fam.conjugate(z) == pytest.approx(want, abs=1e-9)


def test_bernoulli_conjugate_is_binary_kl():
    fam = bernoulli_cgf(0.5)
    assert fam.conjugate(0.25) == pytest.approx(BERNOULLI_KL_075_05, abs=1e-12)
    # symmetry of the base point 1/2
    assert fam.conjugate(-0.25) == pytest.approx(BERNOULLI_KL_075_05, abs=1e-12)


@pytest.mark.parametrize(
    "fam,zs",
    [
        (sub_gaussian(1.0), (-2.0, -0.3, 0.4, 1.5)),
        (sub_gaussian(0.5), (-0.8, 0.2, 0.9)),
        (sub_exponential(1.0, 1.0), (-2.5, -0.5, 0.5, 2.5, 6.0)),
        (sub_exponential(2.0, 0.7), (-1.5, 0.8, 4.0)),
        (bernstein(1.0, 1.0), (-3.0, -0.4, 0.6, 2.0)),
        (bernstein(0.7, 0.3), (-1.0, 0.5, 1.4)),
        (bernoulli_cgf(0.3), (-0.2, 0.1, 0.5)),
        (bernoulli_cgf(0.5), (-0.4, 0.3)),
    ],
)
def test_closed_forms_match_numeric_legendre_oracle(fam, zs):
    for z in zs:
        want = numeric_conjugate_oracle(fam, z)
        assert fam.conjugate(z) == pytest.approx(want, abs=1e-6)


def test_exp_family_conjugate_matches_oracle():
    # discrete three-point family on a compact window
    lp = tabulated_log_partition([-1.0, 0.0, 2.0], [0.25, 0.5, 0.25], -2.0, 2.0, 4001)
    fam = exp_family(lp, 0.0)
    for z in (-0.8, -0.2, 0.3, 1.0):
        want = numeric_conjugate_oracle(fam, z)
        assert fam.conjugate(z) == pytest.approx(want, abs=1e-6)


def test_exp_family_kl_equals_bregman_gaussian():
    # standard normal as an exponential family: both loss routes agree
    thetas = np.linspace(-3, 3, 6001)
    lp = LogPartition.from_grid(thetas, 0.5 * thetas**2)
    fam = exp_family(lp, 0.0)
    kl = kl_between_means(lp, 1.0, 0.0)
    assert kl == pytest.approx(0.5, abs=1e-6)
    assert fam.conjugate(1.0) == pytest.approx(kl, abs=1e-6)


def test_exp_family_kl_equals_bregman_bernoulli():
    # Bernoulli(p) log-partition log(1 - p + p e^theta) at theta=0
    p = 0.5
    thetas = np.linspace(-4, 4, 8001)
    vals = np.log1p(p * np.expm1(thetas))
    lp = LogPartition.from_grid(thetas, vals)
    fam = exp_family(lp, 0.0)
    want = BERNOULLI_KL_075_05
    assert kl_between_means(lp, 0.75, 0.5) == pytest.approx(want, abs=1e-6)
    assert fam.conjugate(0.25) == pytest.approx(want, abs=1e-6)


def test_inverse_conjugate_round_trip():
    for fam in (sub_gaussian(1.3), sub_exponential(1.0, 0.5), bernstein(0.9, 0.6)):
        for level in (0.01, 0.2, 1.0):
            z = fam.inv_conjugate_plus(level)
            assert z > 0
            assert fam.conjugate(z) == pytest.approx(level, rel=1e-8)
            z = fam.inv_conjugate_minus(level)
            assert z < 0
            assert fam.conjugate(z) == pytest.approx(level, rel=1e-8)


def test_sub_gaussian_inverse_explicit():
    fam = sub_gaussian(1.0)
    assert fam.inv_conjugate_plus(0.5) == pytest.approx(1.0, abs=1e-10)
    assert fam.inv_conjugate_minus(0.5) == pytest.approx(-1.0, abs=1e-10)


def test_bernoulli_inverse_respects_range():
    fam = bernoulli_cgf(0.3)
    # deviations above 1 - mean are impossible
    with pytest.raises(ConjugateRangeError):
        fam.inv_conjugate_plus(math.log(1.0 / 0.3) + 1.0)
    z = fam.inv_conjugate_plus(0.05)
    assert 0.0 < z < 0.7


def test_sub_exponential_knee_continuity():
    # the conjugate switches form at the knee; both sides must agree there
    nu, alpha = 1.5, 0.8
    fam = sub_exponential(nu, alpha)
    knee = nu * nu / alpha
    lo = fam.conjugate(knee - 1e-9)
    hi = fam.conjugate(knee + 1e-9)
    assert lo == pytest.approx(hi, abs=1e-6)


@given(st.floats(min_value=0.05, max_value=4.0), st.floats(min_value=-5.0, max_value=5.0))
@settings(max_examples=60, deadline=None)
def test_conjugate_nonnegative_and_zero_at_origin(sd, z):
    fam = sub_gaussian(sd)
    assert fam.conjugate(0.0) == 0.0
    assert fam.conjugate(z) >= 0.0


@given(
    st.floats(min_value=0.2, max_value=2.0),
    st.floats(min_value=0.2, max_value=2.0),
    st.floats(min_value=0.0, max_value=3.0),
)
@settings(max_examples=60, deadline=None)
def test_bernstein_dominates_its_lower_bound(sd, scale, z):
    fam = bernstein(sd, scale)
    assert fam.conjugate(z) >= bernstein_lower_bound(sd, scale, z) - 1e-12


def test_bregman_is_shifted_conjugate():
    fam = sub_gaussian(1.0)
    assert fam.bregman(1.7, 0.5) == pytest.approx(fam.conjugate(1.2), abs=1e-12)


def test_family_from_config_kinds():
    assert family_from_config({"kind": "sub-gaussian", "sd": 1.0}).conjugate(1.0) == pytest.approx(0.5)
    assert family_from_config({"kind": "sub-exponential", "nu": 1.0, "alpha": 1.0}).conjugate(1.0) == pytest.approx(0.5)
    assert family_from_config({"kind": "bernstein", "sd": 1.0, "scale": 1.0}).conjugate(1.0) > 0
    assert family_from_config({"kind": "bernoulli", "mean": 0.5}).conjugate(0.25) > 0


def test_family_from_config_rejects_unknown():
    with pytest.raises(ConfigError):
        family_from_config({"kind": "cauchy"})
    with pytest.raises(ConfigError):
        family_from_config({"sd": 1.0})
