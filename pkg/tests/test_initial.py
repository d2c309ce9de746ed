import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from mmstruct.covariance import CovarianceStructure
from mmstruct.data import BalancedSample
from mmstruct.exceptions import DegenerateScale, DegenerateScaleWarning, NotBounded, RankDeficient
from mmstruct.initial import InitialConfig, initial_fit, mscale
from mmstruct.rho import RhoFunction, calibrate_breakdown, expected_rho

from conftest import gaussian_sample

RHO0 = calibrate_breakdown("biweight", 2, 0.5).rho
AR1 = CovarianceStructure.ar1(2)
V_TRUE = AR1.build([1.0, 0.5])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=5, max_size=40), st.floats(0.01, 100.0))
def test_mscale_solves_constraint_and_is_equivariant(d, a):
    d = np.array(d)
    b0 = 0.5 * RHO0.sup
    s = mscale(d, RHO0, b0)
    assert RHO0.rho(d / s).mean() == pytest.approx(b0, rel=1e-9)
    assert mscale(a * d, RHO0, b0) == pytest.approx(a * s, rel=1e-9)


def test_mscale_degenerate():
    d = np.r_[np.zeros(6), np.ones(4)]
    with pytest.raises(DegenerateScale):
        mscale(d, RHO0, 0.5 * RHO0.sup)
    with pytest.raises(NotBounded):
        mscale(np.ones(3), RhoFunction.huber(1.0), 0.1)


def test_gaussian_consistency_of_b0():
    s = gaussian_sample(400, 2, 2, V_TRUE, seed=5)
    fit = initial_fit(s, AR1, RHO0, None, InitialConfig(seed=0, n_subsets=30))
    assert fit.b0 == pytest.approx(expected_rho(RHO0, 2))
    assert abs(fit.scale_constraint_residual) <= 1e-10
    assert_allclose(fit.theta0, [1.0, 0.5], atol=0.2)
    assert_allclose(fit.beta0, [1.0, 2.0], atol=0.2)


def test_concentration_paths_are_monotone():
    s = gaussian_sample(100, 2, 2, V_TRUE, seed=8)
    fit = initial_fit(s, AR1, RHO0, None, InitialConfig(seed=3, n_subsets=20, record_paths=True))
    for path in fit.scale_paths:
        steps = np.diff(path) / np.array(path[:-1])
        assert np.all(steps <= 1e-9)


def test_seed_determinism():
    s = gaussian_sample(60, 2, 2, V_TRUE, seed=1)
    a = initial_fit(s, AR1, RHO0, None, InitialConfig(seed=4, n_subsets=15))
    b = initial_fit(s, AR1, RHO0, None, InitialConfig(seed=4, n_subsets=15))
    assert_allclose(a.beta0, b.beta0, rtol=0, atol=0)
    assert_allclose(a.V0, b.V0, rtol=0, atol=0)


def test_equivariance():
    s = gaussian_sample(60, 2, 2, V_TRUE, seed=2)
    cfg = InitialConfig(seed=7, n_subsets=20)
    base = initial_fit(s, AR1, RHO0, None, cfg)
    b = np.array([3.0, -2.0])
    shifted = initial_fit(s.with_y(s.y + s.X @ b), AR1, RHO0, None, cfg)
    assert_allclose(shifted.beta0, base.beta0 + b, atol=1e-9)
    scaled = initial_fit(s.with_y(4.0 * s.y), AR1, RHO0, None, cfg)
    assert_allclose(scaled.V0, 16.0 * base.V0, rtol=1e-7)


def test_exact_fit_warns():
    n = 20
    X = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    y = np.tile([1.0, 2.0], (n, 1))
    y[:3] += 5.0
    with pytest.warns(DegenerateScaleWarning):
        fit = initial_fit(BalancedSample(y, X), AR1, RHO0, None, InitialConfig(seed=0, n_subsets=10))
    assert_allclose(fit.beta0, [1.0, 2.0], atol=1e-12)
    assert fit.warnings


def test_config_required():
    s = gaussian_sample(20, 2, 2, V_TRUE)
    with pytest.raises(ValueError):
        initial_fit(s, AR1, RHO0)
    assert InitialConfig.from_dict({"seed": 3, "n_subsets": 9, "other": 1}).n_subsets == 9


def test_rank_is_checked_on_the_stacked_design():
    rng = np.random.default_rng(5)
    # subject-level covariate repeated on both occasions: each X_i has rank 1
    X = np.ones((40, 2, 2))
    X[:, :, 1] = rng.standard_normal(40)[:, None]
    s = BalancedSample(rng.standard_normal((40, 2)), X)
    assert not s.full_rank_flags.any() and s.pooled_full_rank
    initial_fit(s, AR1, RHO0, config=InitialConfig(seed=0, n_subsets=10))
    X = np.ones((40, 2, 2))
    with pytest.raises(RankDeficient):
        initial_fit(BalancedSample(s.y, X), AR1, RHO0, config=InitialConfig(seed=0, n_subsets=10))
