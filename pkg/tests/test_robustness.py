import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from mmstruct.covariance import CovarianceStructure
from mmstruct.data import BalancedSample
from mmstruct.initial import InitialConfig
from mmstruct.mm import MMConfig
from mmstruct.rho import RhoFunction, calibrate_breakdown, calibrate_efficiency
from mmstruct.robustness import (ContaminationScenario, ExactFitPoint, LeveragePoint,
                                 SweepConfig, YShift, bound_from_counts, breakdown_bound,
                                 contaminate, contamination_sweep, scenario_grid, v_distance,
                                 write_sweep_csv)

UN2 = CovarianceStructure.unstructured(2)
RHO0 = calibrate_breakdown("biweight", 2, 0.5).rho
RHO1 = calibrate_efficiency("biweight", 2, 0.95).rho


def equal_design_sample(n, seed):
    rng = np.random.default_rng(seed)
    return BalancedSample(rng.standard_normal((n, 2)), np.broadcast_to(np.eye(2), (n, 2, 2)).copy())


def test_bound_examples():
    s = equal_design_sample(20, 0)
    b = breakdown_bound(s, 0.45, 0.45)
    assert b.kappa == 2 and b.bound_beta == 0.45 and b.bound_max == 0.45
    assert bound_from_counts(40, 4, 0.45)[1] == 18 / 40
    assert breakdown_bound(s, 0.5).feasibility is False


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 500), st.data())
def test_bound_invariants(n, data):
    kappa = data.draw(st.integers(1, n - 1))
    r0 = data.draw(st.floats(0.01, 0.5))
    bb, bm, feas = bound_from_counts(n, kappa, r0)
    assert 0 < bb <= bm <= ((n + 1) // 2) / n or bm == 0
    if feas:
        assert bb == pytest.approx(np.ceil(n * r0 - 1e-9) / n)


def test_contaminate_modes():
    s = equal_design_sample(10, 1)
    assert contaminate(s, ContaminationScenario(0)) is s
    sc = ContaminationScenario(3, YShift(10.0, (1.0, 0.0)), seed=2)
    bad = contaminate(s, sc)
    idx = sc.indices(10)
    assert_allclose(bad.y[idx] - s.y[idx], [[10.0, 0.0]] * 3)
    assert np.sum(np.any(bad.y != s.y, axis=1)) == 3
    lev = contaminate(s, ContaminationScenario(2, LeveragePoint(5.0)))
    ex = contaminate(s, ContaminationScenario(2, ExactFitPoint((1.0, -1.0))))
    i = ContaminationScenario(2).indices(10)
    assert_allclose(lev.X[i], 5.0 * s.X[i])
    assert_allclose(ex.y[i], [[1.0, -1.0]] * 2)
    with pytest.raises(ValueError):
        ContaminationScenario(10).indices(10)


def test_v_distance():
    A = np.diag([2.0, 1.0])
    assert v_distance(A, A) == 0.0
    assert v_distance(A, np.diag([2.0, 0.5])) == pytest.approx(1.0)
    assert v_distance(A, np.diag([5.0, 1.0])) == pytest.approx(3.0)


def test_sweep_rows_and_monotone_explosions(tmp_path):
    s = equal_design_sample(40, 3)
    cfg = SweepConfig(InitialConfig(seed=0, n_subsets=30), MMConfig(strict=False, extra_starts=0))
    rows = contamination_sweep(s, UN2, RHO0, RHO1, scenario_grid(40, [0.0, 0.2, 0.6]), cfg)
    assert len(rows) == 9
    assert all(r["beta_dev"] == 0.0 for r in rows[:3])
    frac = [np.mean([r["exploded"] for r in rows if r["m_over_n"] == f]) for f in (0.0, 0.2, 0.6)]
    assert frac == sorted(frac) and frac[-1] == 1.0
    write_sweep_csv(rows, tmp_path / "t.csv")
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header.startswith("m_over_n,magnitude,beta_dev,v_dist,exploded")


def test_huber_with_fixed_v0_stays_bounded():
    s = equal_design_sample(50, 4)
    cfg = SweepConfig(InitialConfig(seed=0, n_subsets=30), MMConfig(strict=False, extra_starts=0),
                      fix_V0=True)
    rows = contamination_sweep(s, UN2, RHO0, RhoFunction.huber(1.345),
                               scenario_grid(50, [0.2, 0.4]), cfg)
    for m in (10, 20):
        devs = [r["beta_dev"] for r in rows if r["m"] == m]
        assert not any(r["exploded"] for r in rows if r["m"] == m)
        assert devs[-1] <= 1.01 * devs[0] + 1e-9
