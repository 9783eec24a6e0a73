import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from privleak.analytic import (
    bound_dp_advantage,
    curve,
    curve_attribute_binary,
    curve_attribute_general,
    curve_membership_bounded,
    curve_membership_threshold,
    expected_colluding_advantage,
    max_advantage,
)
from privleak.attribute import AttributeSchema
from privleak.errors import DomainError
from privleak.membership import equal_density_threshold

mpmath.mp.dps = 50


def _known_mp(r):
    r = mpmath.mpf(r)
    a = mpmath.sqrt(mpmath.log(r) / (r * r - 1))
    return float(mpmath.erf(r * a) - mpmath.erf(a))


def _unknown_mp(r):
    r = mpmath.mpf(r)
    return float(mpmath.erf(1 / mpmath.sqrt(2)) - mpmath.erf(1 / (mpmath.sqrt(2) * r)))


def test_threshold_known_ratio_two_value():
    assert curve_membership_threshold(2.0, "known") == pytest.approx(_known_mp(2), abs=1e-14)
    assert round(curve_membership_threshold(2.0, "known"), 4) == 0.3227


def test_threshold_unknown_ratio_two_value():
    assert curve_membership_threshold(2.0, "unknown") == pytest.approx(_unknown_mp(2), abs=1e-14)
    assert round(curve_membership_threshold(2.0, "unknown"), 4) == 0.2998


@pytest.mark.parametrize("r", [1.001, 1.5, 2.0, 4.0, 10.0, 1e4])
def test_threshold_known_matches_gaussian_integral(r):
    # P(|e| < cut) under sigma_S=1 minus under sigma_D=r, computed by quadrature
    cut = equal_density_threshold(1.0, r)
    inside = lambda s: integrate.quad(lambda x: stats.norm.pdf(x, scale=s), -cut, cut, epsabs=1e-13)[0]
    assert curve_membership_threshold(r, "known") == pytest.approx(inside(1.0) - inside(r), abs=1e-10)
    assert curve_membership_threshold(r, "known") == pytest.approx(_known_mp(r), abs=1e-12)


def test_threshold_edges():
    assert curve_membership_threshold(1.0) == 0.0
    assert curve_membership_threshold(1.0, "unknown") == 0.0
    assert curve_membership_threshold(math.inf) == 1.0
    assert curve_membership_threshold(math.inf, "unknown") == pytest.approx(math.erf(1 / math.sqrt(2)))
    with pytest.raises(DomainError):
        curve_membership_threshold(0.9)
    with pytest.raises(DomainError):
        curve_membership_threshold(math.nan)
    with pytest.raises(DomainError):
        curve_membership_threshold(2.0, "sideways")


@given(st.floats(1.0, 1e6), st.floats(0.0, 10.0))
def test_threshold_curves_monotone(r, dr):
    for mode in ("known", "unknown"):
        assert curve_membership_threshold(r + dr, mode) >= curve_membership_threshold(r, mode) - 1e-12


@given(st.floats(1.0001, 1e6))
def test_known_dominates_unknown(r):
    known = curve_membership_threshold(r, "known")
    unknown = curve_membership_threshold(r, "unknown")
    assert unknown <= known + 1e-12
    assert 0.0 <= unknown and known <= 1.0


def test_equal_density_threshold_value():
    # the formula sigma_D * sqrt(2 ln r / (r^2 - 1)) at (1, 2)
    assert equal_density_threshold(1.0, 2.0) == pytest.approx(2 * math.sqrt(2 * math.log(2) / 3), rel=1e-15)
    assert equal_density_threshold(1.0, 2.0) == pytest.approx(1.359555986891745, abs=1e-12)
    c = equal_density_threshold(1.0, 3.0)
    assert stats.norm.pdf(c, scale=1.0) == pytest.approx(stats.norm.pdf(c, scale=3.0), rel=1e-12)


def test_bounded_curve():
    assert curve_membership_bounded(0.3, 1.0) == 0.3
    assert curve_membership_bounded(0.3, 2.0) == 0.15
    with pytest.raises(DomainError):
        curve_membership_bounded(0.1, 0.0)


def test_attribute_binary_value_and_oracle():
    v = curve_attribute_binary(2.0, 1.0, 2.0)
    ref = 0.5 * float(mpmath.erf(mpmath.mpf(2) / (2 * mpmath.sqrt(2))) - mpmath.erf(mpmath.mpf(1) / (2 * mpmath.sqrt(2))))
    assert v == pytest.approx(ref, abs=1e-15)
    assert v == pytest.approx(0.14988228479452984, abs=1e-15)


def test_attribute_binary_zero_when_no_overfitting_or_no_influence():
    assert curve_attribute_binary(0.0, 1.0, 2.0) == 0.0
    assert curve_attribute_binary(3.0, 1.5, 1.5) == 0.0
    with pytest.raises(DomainError):
        curve_attribute_binary(-1.0, 1.0, 2.0)


@given(st.floats(0.01, 10), st.floats(0.1, 5), st.floats(1.0, 5))
def test_attribute_general_reduces_to_binary(tau, s, r):
    schema = AttributeSchema.model_inversion((0, 1))
    general = curve_attribute_general(schema, [0.0, tau], s, s * r)
    assert general == pytest.approx(curve_attribute_binary(tau, s, s * r), abs=1e-12)


@pytest.mark.parametrize("m", [2, 4, 8])
def test_attribute_general_limit_uniform_prior(m):
    schema = AttributeSchema.model_inversion(tuple(range(m)))
    v = curve_attribute_general(schema, np.arange(m) * 10.0, 1e-6, 1e9)
    assert v == pytest.approx(1 - 1 / m, abs=1e-6)


def test_attribute_general_matches_quadrature_for_skewed_prior():
    schema = AttributeSchema.model_inversion(("a", "b", "c"), [0.5, 0.3, 0.2])
    tau = np.array([0.0, 1.0, 2.5])
    sS, sD = 0.7, 1.6

    # locate every pairwise crossing numerically so quad sees the discontinuities
    logp = np.log(schema.prior)
    pair = lambda i, j: lambda y: (logp[i] - (y - tau[i]) ** 2 / (2 * sS**2)) - (logp[j] - (y - tau[j]) ** 2 / (2 * sS**2))
    cuts = [optimize.brentq(pair(i, j), -50, 50, xtol=1e-14) for i in range(3) for j in range(i + 1, 3)]

    def correct(sigma):
        total = 0.0
        for i, p in enumerate(schema.prior):
            def win(y, i=i):
                s = np.log(schema.prior) - (y - tau) ** 2 / (2 * sS**2)
                return float(np.argmax(s) == i) * stats.norm.pdf(y, loc=tau[i], scale=sigma)
            total += p * integrate.quad(win, -30, 30, limit=400, points=cuts, epsabs=1e-12)[0]
        return total

    expected = correct(sS) - correct(sD)
    assert curve_attribute_general(schema, tau, sS, sD) == pytest.approx(expected, abs=1e-6)


def test_dp_bound_and_collusion():
    assert bound_dp_advantage(0.0) == 0.0
    assert bound_dp_advantage(1.0) == pytest.approx(math.e - 1)
    assert bound_dp_advantage(1e-12) == pytest.approx(1e-12, rel=1e-6)
    with pytest.raises(DomainError):
        bound_dp_advantage(-0.1)
    assert expected_colluding_advantage(8, 3, 0.0) == pytest.approx(1 - 2.0**-24)
    assert max_advantage(0.1) == pytest.approx(0.9)
    with pytest.raises(DomainError):
        expected_colluding_advantage(0, 3, 0.0)
    with pytest.raises(DomainError):
        max_advantage(1.5)


def test_curve_dispatch():
    pts = curve("membership-threshold-known", [1.0, 2.0])
    assert [p.value for p in pts] == [0.0, curve_membership_threshold(2.0)]
    pts = curve("attribute-binary", [2.0], sigma_S=1.0, sigma_D=2.0)
    assert pts[0].value == curve_attribute_binary(2.0, 1.0, 2.0)
    with pytest.raises(DomainError):
        curve("nope", [1.0])
