import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from rvm1d.profiles import PlasmaProfile, Profile, product_sup, profile_sup

finite = st.floats(-3.0, 3.0, allow_nan=False)


def test_kinds_evaluate():
    s = np.array([0.0, 0.5, 1.0])
    assert np.all(Profile.zero()(s) == 0)
    assert np.all(Profile.constant(2.5)(s) == 2.5)
    assert np.allclose(Profile.linear(2.0, 1.0)(s), [1.0, 2.0, 3.0])
    c = Profile.cosine([[2.0, math.pi, 0.0]], offset=1.0)
    assert np.allclose(c(s), [3.0, 1.0, -1.0])
    g = Profile.gaussian(3.0, 0.5, 0.1)
    assert g(0.5) == 3.0


def test_bad_parameters_rejected():
    with pytest.raises(ValueError):
        Profile("cosine", {"modes": []})
    with pytest.raises(ValueError):
        Profile("gaussian", {"amplitude": 1, "center": 0, "width": 0})
    with pytest.raises(ValueError):
        Profile("spline", {})
    with pytest.raises(ValueError):
        PlasmaProfile.bump(-1.0, 0.5, 0.1, 1.0)


@settings(max_examples=40, deadline=None)
@given(a=finite, k=st.floats(0.1, 12.0), ph=finite, off=finite, s=st.floats(0.0, 1.0))
def test_cosine_derivative_matches_finite_difference(a, k, ph, off, s):
    p = Profile.cosine([[a, k, ph]], offset=off)
    h = 1e-6
    fd = (p(s + h) - p(s - h)) / (2 * h)
    assert abs(p.derivative(s) - fd) <= 1e-5 * max(1.0, abs(a) * k * k)


def test_gaussian_derivative():
    g = Profile.gaussian(1.3, 0.4, 0.2)
    h = 1e-6
    assert g.derivative(0.47) == pytest.approx((g(0.47 + h) - g(0.47 - h)) / (2 * h), rel=1e-8)


def _dense(p, a, b):
    s = np.linspace(a, b, 200001)
    return float(np.abs(p(s)).max())


@settings(max_examples=60, deadline=None)
@given(a=finite, k=st.floats(0.0, 20.0), ph=finite, off=finite,
       lo=st.floats(0.0, 0.9), width=st.floats(0.01, 1.0))
def test_single_mode_sup_is_closed_form(a, k, ph, off, lo, width):
    p = Profile.cosine([[a, k, ph]], offset=off)
    hi = lo + width
    exact = profile_sup(p, lo, hi)
    dense = _dense(p, lo, hi)
    assert exact >= dense - 1e-12
    assert exact <= dense + 1e-6 * (1 + abs(a) * k)


@settings(max_examples=30, deadline=None)
@given(a1=finite, a2=finite, k1=st.floats(0.5, 10), k2=st.floats(0.5, 10), p1=finite, p2=finite)
def test_multi_mode_sup_refined(a1, a2, k1, k2, p1, p2):
    p = Profile.cosine([[a1, k1, p1], [a2, k2, p2]])
    sup = profile_sup(p, 0.0, 1.0)
    dense = _dense(p, 0.0, 1.0)
    assert sup >= dense - 1e-12
    assert sup <= dense + 1e-8


def test_sup_other_kinds():
    assert profile_sup(Profile.linear(-2.0, 1.0), 0.0, 1.0) == 1.0
    assert profile_sup(Profile.gaussian(2.0, 3.0, 0.5), 0.0, 1.0) == pytest.approx(
        2.0 * math.exp(-4.0 / 0.5), rel=1e-14)
    assert profile_sup(Profile.constant(-3.0), 0, 1) == 3.0


def test_product_sup():
    p = Profile.cosine([[0.5, 2 * math.pi, 0.0]])
    q = Profile.cosine([[0.5, 2 * math.pi, 0.0]])
    assert product_sup(p, q, 0.0, 1.0) == pytest.approx(0.25, abs=1e-12)
    assert product_sup(Profile.zero(), q, 0, 1) == 0.0
    assert product_sup(Profile.constant(2.0), q, 0, 1) == pytest.approx(1.0)


def test_bump_values_and_support():
    f0 = PlasmaProfile.bump(0.5, 0.5, 0.2, 1.0)
    assert f0(0.5, 0.0, 0.0) == 0.5
    assert f0(0.3, 0.0, 0.0) == 0.0 and f0(0.5, 1.0, 0.0) == 0.0
    assert f0.x_support == pytest.approx((0.3, 0.7))
    assert f0.v_support_radius == 1.0
    assert PlasmaProfile.zero().x_support is None


def test_bump_l1_norm_against_quadrature():
    f0 = PlasmaProfile.bump(0.7, 0.45, 0.15, 0.8)
    val, _ = integrate.tplquad(lambda v2, v1, x: f0(x, v1, v2), 0.3, 0.6, -0.8, 0.8,
                               lambda x, v1: -math.sqrt(max(0.64 - v1 * v1, 0.0)),
                               lambda x, v1: math.sqrt(max(0.64 - v1 * v1, 0.0)),
                               epsabs=1e-11, epsrel=1e-10)
    assert f0.l1_norm() == pytest.approx(val, rel=1e-8)


def test_bump_energy_norm_against_cartesian_quadrature():
    for centre in ((0.0, 0.0), (0.3, -0.2)):
        f0 = PlasmaProfile.bump(1.0, 0.5, 0.2, 0.6, *centre)
        c1, c2 = centre

        def integrand(v2, v1):
            return math.sqrt(1 + v1 * v1 + v2 * v2) * f0(0.5, v1, v2) / 1.0

        val, _ = integrate.dblquad(integrand, c1 - 0.6, c1 + 0.6,
                                   lambda v1: c2 - math.sqrt(max(0.36 - (v1 - c1) ** 2, 0.0)),
                                   lambda v1: c2 + math.sqrt(max(0.36 - (v1 - c1) ** 2, 0.0)),
                                   epsabs=1e-12, epsrel=1e-10)
        # x factor: int cos^2 over the window = halfwidth
        assert f0.energy_norm() == pytest.approx(0.2 * val, rel=1e-7)


def test_round_trips():
    for p in (Profile.zero(), Profile.linear(1, 2), Profile.cosine([[1, 2, 3]], 0.5),
              Profile.gaussian(1, 0.5, 0.1), Profile.constant(-1.0)):
        assert Profile.from_dict(p.to_dict()) == p
    f0 = PlasmaProfile.bump(0.5, 0.5, 0.2, 1.0, 0.1, 0.0)
    assert PlasmaProfile.from_dict(f0.to_dict()) == f0
