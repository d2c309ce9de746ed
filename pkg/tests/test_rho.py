import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats

from mmstruct.exceptions import NoBracket, NotBounded
from mmstruct.rho import (RhoFunction, alpha1, calibrate_breakdown, calibrate_efficiency,
                          calibrate_winsorize, describe, efficiency_constants, expected_radial,
                          expected_rho, verify_mm_pair)

cutoffs = st.floats(0.5, 8.0)
radii = st.floats(0.0, 20.0)
families = st.sampled_from(["biweight", "huber"])


def test_biweight_values():
    f = RhoFunction.biweight(2.0)
    s = np.array([0.0, 1.0, 2.0, 3.0])
    assert_allclose(f.rho(s), [0.0, 0.5 - 1 / 8 + 1 / 96, 4 / 6, 4 / 6], rtol=1e-15)
    assert f.sup == pytest.approx(4 / 6)
    assert_allclose(f.psi(s), [0.0, 1.0 * (1 - 0.25) ** 2, 0.0, 0.0], atol=1e-15)


def test_huber_values():
    f = RhoFunction.huber(1.5)
    assert_allclose(f.rho(np.array([1.0, 3.0])), [0.5, -1.125 + 4.5])
    assert_allclose(f.psi(np.array([1.0, 3.0])), [1.0, 1.5])
    assert f.sup == np.inf and not f.bounded


@settings(max_examples=200, deadline=None)
@given(families, cutoffs, radii)
def test_derivatives_match_finite_differences(kind, c, s):
    f = RhoFunction(kind, c)
    h = 1e-6
    if abs(s - c) < 1e-4 or s < 2 * h:
        return
    fd = (f.rho(s + h) - f.rho(s - h)) / (2 * h)
    assert_allclose(f.psi(s), fd, rtol=1e-6, atol=1e-8)
    fd2 = (f.psi(s + h) - f.psi(s - h)) / (2 * h)
    assert_allclose(f.psi_prime(s), fd2, rtol=1e-6, atol=1e-8)
    fdu = (f.u(s + h) - f.u(s - h)) / (2 * h)
    assert_allclose(f.u_prime_over_s(s) * s, fdu, rtol=1e-5, atol=1e-7)
    assert_allclose(f.u(s) * s, f.psi(s), rtol=1e-13, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(families, cutoffs, st.lists(radii, min_size=2, max_size=20))
def test_rho_nondecreasing_and_u_nonincreasing(kind, c, s):
    f = RhoFunction(kind, c)
    s = np.sort(np.array(s))
    assert np.all(np.diff(f.rho(s)) >= -1e-15)
    assert np.all(np.diff(f.u(s)) <= 1e-15)


def test_u_at_zero_is_one():
    assert RhoFunction.biweight(3.0).u(0.0) == 1.0
    assert RhoFunction.huber(3.0).u(0.0) == 1.0


@pytest.mark.parametrize("k", [1, 2, 4])
def test_expected_radial_matches_adaptive_quadrature(k):
    g = lambda r: np.cos(r) * r
    ref = integrate.quad(lambda r: g(r) * stats.chi.pdf(r, k), 0, np.inf)[0]
    assert_allclose(expected_radial(g, k), ref, rtol=1e-9, atol=1e-12)


def test_quadratic_limit_constants():
    f = RhoFunction.huber(1e6)
    for k in (1, 3):
        a1, lam = efficiency_constants(f, k)
        assert a1 == pytest.approx(1.0, abs=1e-12)
        assert lam == pytest.approx(1.0, abs=1e-10)
        assert expected_rho(f, k) == pytest.approx(k / 2, rel=1e-10)


@pytest.mark.parametrize("c", [0.5, 1.345, 2.5])
def test_huber_alpha1_k1_is_normal_mass(c):
    assert alpha1(RhoFunction.huber(c), 1) == pytest.approx(2 * stats.norm.cdf(c) - 1, rel=1e-9)


def test_biweight_alpha1_monte_carlo():
    f = calibrate_efficiency("biweight", 2, 0.95).rho
    rng = np.random.default_rng(11)
    r = np.linalg.norm(rng.standard_normal((1_000_000, 2)), axis=1)
    vals = 0.5 * f.u(r) + 0.5 * f.psi_prime(r)
    se = vals.std() / np.sqrt(r.size)
    assert abs(vals.mean() - alpha1(f, 2)) < 3 * se


def test_breakdown_calibration_k1():
    res = calibrate_breakdown("biweight", 1, 0.5)
    assert res.cutoff == pytest.approx(1.5476449809, abs=1e-8)
    assert abs(expected_rho(res.rho, 1) / (res.cutoff ** 2 / 6) - 0.5) <= 1e-8
    assert res.r0 == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("k,target", [(1, 0.8), (2, 0.9), (3, 0.95)])
def test_efficiency_calibration_fixed_point(k, target):
    res = calibrate_efficiency("biweight", k, target)
    assert res.efficiency == pytest.approx(target, abs=1e-8)
    assert res.lambda_ == pytest.approx(1 / target, rel=1e-8)


def test_lambda_at_least_one_over_grid():
    for k in (1, 2, 3, 5):
        for c in np.linspace(0.5, 10, 20):
            for kind in ("biweight", "huber"):
                assert efficiency_constants(RhoFunction(kind, c), k)[1] >= 1 - 1e-10


def test_winsorize_tail_probability():
    res = calibrate_winsorize(2, 0.1)
    assert stats.chi2.sf(res.cutoff ** 2, 2) == pytest.approx(0.1, rel=1e-10)
    assert res.r0 is None and res.family == "huber"


def test_calibration_errors():
    with pytest.raises(NotBounded):
        calibrate_breakdown("huber", 2, 0.5)
    with pytest.raises(NoBracket):
        calibrate_breakdown("biweight", 2, 0.7)
    with pytest.raises(NoBracket):
        calibrate_efficiency("biweight", 2, 1.0)
    with pytest.raises(ValueError):
        RhoFunction.biweight(-1.0)


def test_mm_pair_ordering():
    r0 = calibrate_breakdown("biweight", 2, 0.5).rho
    r1 = calibrate_efficiency("biweight", 2, 0.95).rho
    assert verify_mm_pair(r0, r1)
    assert not verify_mm_pair(r1, r0)


def test_describe_roundtrip():
    d = describe(RhoFunction.biweight(4.0), 2).to_dict()
    assert set(d) == {"family", "k", "cutoff", "b0", "r0", "alpha1", "lambda", "efficiency"}
    assert RhoFunction.from_dict(RhoFunction.biweight(4.0).to_dict()) == RhoFunction.biweight(4.0)
