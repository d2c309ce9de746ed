"""Breakdown bounds and replacement-contamination experiments.

The exact breakdown point is a supremum over all contaminations and is not
computable.  :func:`contamination_sweep` probes three adversarial families
and reports what happened; it is an empirical lower-bound check, nothing
more.
"""
import csv
from dataclasses import dataclass, field, replace
from math import ceil, floor
from typing import Optional

import numpy as np

from .data import BalancedSample, kappa as sample_kappa
from .exceptions import MMError
from .initial import InitialConfig, initial_fit
from .mm import MMConfig, fit_mm

MAGNITUDES = (1e2, 1e4, 1e6)
EXPLODE_FACTOR = 10.0
SWEEP_COLUMNS = ("m_over_n", "magnitude", "beta_dev", "v_dist", "exploded", "m", "mode", "error")


@dataclass(frozen=True)
class BreakdownBound:
    r0: float
    kappa: int
    n: int
    bound_beta: float
    bound_max: float
    feasibility: bool
    kappa_exact: bool = True

    def to_dict(self):
        return {"r0": self.r0, "kappa": self.kappa, "n": self.n,
                "bound_beta": self.bound_beta, "bound_max": self.bound_max,
                "feasibility": self.feasibility, "kappa_exact": self.kappa_exact}


def bound_from_counts(n, kappa, r0, v0_breakdown=None):
    """Integer arithmetic behind :func:`breakdown_bound`.

    ``bound_max = floor((n - kappa + 1)/2)/n`` caps every equivariant
    estimator, so ``bound_beta`` is clipped to it when ``r0`` is infeasible.
    """
    if not 0.0 < r0 <= 0.5:
        raise ValueError("r0 must lie in (0, 1/2]")
    if not 1 <= kappa <= n:
        raise ValueError("need 1 <= kappa <= n")
    # the small offset keeps n*r0 = 10.000000000000002 from rounding up
    m_r0 = ceil(n * r0 - 1e-9)
    if v0_breakdown is None:
        v0_breakdown = m_r0 / n
    m_max = floor((n - kappa + 1) / 2)
    bound_beta = min(v0_breakdown, m_r0 / n, m_max / n)
    feasible = 2 * n * r0 <= (n - kappa) * (1 + 1e-12)
    return bound_beta, m_max / n, bool(feasible)


def breakdown_bound(sample, r0, v0_breakdown=None, kappa=None):
    """Lower bound on the replacement breakdown point of ``beta1``.

    ``v0_breakdown`` defaults to ``ceil(n r0)/n``, the breakdown point of
    the first-stage covariance when the constraint level is ``r0``.
    ``kappa`` defaults to :func:`mmstruct.data.kappa` of the sample.
    """
    exact = True
    if kappa is None:
        kappa, exact = sample_kappa(sample)
    n = sample.n
    bb, bm, feas = bound_from_counts(n, int(kappa), r0, v0_breakdown)
    return BreakdownBound(r0, int(kappa), n, bb, bm, feas, exact)


# contamination modes ----------------------------------------------------------

@dataclass(frozen=True)
class YShift:
    """Move ``y_i`` by ``magnitude * direction`` (unit direction, default all ones)."""
    magnitude: float = 1e6
    direction: Optional[tuple] = None

    name = "YShift"

    def apply(self, sample, idx, beta_ref):
        k = sample.k
        d = np.ones(k) if self.direction is None else np.asarray(self.direction, dtype=float)
        d = d / np.linalg.norm(d)
        y = sample.y.copy()
        y[idx] += self.magnitude * d
        return BalancedSample(y, sample.X)


@dataclass(frozen=True)
class LeveragePoint:
    """Scale ``X_i`` by ``magnitude`` and put ``y_i`` exactly on the
    hyperplane ``beta = magnitude * 1_q``."""
    magnitude: float = 1e6

    name = "LeveragePoint"

    def apply(self, sample, idx, beta_ref):
        X = sample.X.copy()
        X[idx] *= self.magnitude
        y = sample.y.copy()
        y[idx] = X[idx] @ np.full(sample.q, self.magnitude)
        return BalancedSample(y, X)


@dataclass(frozen=True)
class ExactFitPoint:
    """Replace ``y_i`` by ``X_i (magnitude * beta_star)``, an exact fit."""
    beta_star: tuple
    magnitude: float = 1.0

    name = "ExactFitPoint"

    def apply(self, sample, idx, beta_ref):
        b = self.magnitude * np.asarray(self.beta_star, dtype=float)
        y = sample.y.copy()
        y[idx] = sample.X[idx] @ b
        return BalancedSample(y, sample.X)


@dataclass(frozen=True)
class ContaminationScenario:
    m: int
    mode: object = field(default_factory=YShift)
    seed: int = 0

    def indices(self, n):
        if not 0 <= self.m < n:
            raise ValueError(f"need 0 <= m < n, got m={self.m}, n={n}")
        rng = np.random.default_rng([self.seed, self.m])
        return np.sort(rng.choice(n, size=self.m, replace=False))


def contaminate(sample, scenario, beta_ref=None):
    """Replace ``scenario.m`` subjects of ``sample``."""
    idx = scenario.indices(sample.n)
    if idx.size == 0:
        return sample
    return scenario.mode.apply(sample, idx, beta_ref)


def v_distance(A, B):
    """``max(|l1(A) - l1(B)|, |1/lk(A) - 1/lk(B)|)`` with ``l1 >= ... >= lk``."""
    a = np.linalg.eigvalsh(A)
    b = np.linalg.eigvalsh(B)
    return float(max(abs(a[-1] - b[-1]), abs(1.0 / a[0] - 1.0 / b[0])))


def scenario_grid(n, fractions, mode=None, seed=0):
    """Scenarios with ``m = round(f n)`` replaced subjects per fraction."""
    mode = mode or YShift()
    return [ContaminationScenario(int(round(f * n)), mode, seed) for f in fractions]


@dataclass
class SweepConfig:
    initial: InitialConfig
    mm: MMConfig = field(default_factory=lambda: MMConfig(strict=False))
    magnitudes: tuple = MAGNITUDES
    fix_V0: bool = False
    b0: Optional[float] = None


def _refit(sample, structure, rho0, rho1, config, clean_init):
    if config.fix_V0:
        return fit_mm(sample, clean_init, rho1, config.mm)
    init = initial_fit(sample, structure, rho0, config.b0, config.initial)
    return fit_mm(sample, init, rho1, config.mm)


def contamination_sweep(sample, structure, rho0, rho1, scenarios, config):
    """Refit the pipeline on every (scenario, magnitude) cell.

    Returns a list of row dicts with keys :data:`SWEEP_COLUMNS`.  A row is
    ``exploded`` when its deviation is at least ten times the deviation at
    the previous magnitude (the clean fit, deviation 0, precedes the first
    one), where deviations below the clean scale ``sqrt(tr V0)`` are
    treated as equal to it.  Fit errors land in the ``error`` column.
    """
    clean_init = initial_fit(sample, structure, rho0, config.b0, config.initial)
    clean = fit_mm(sample, clean_init, rho1, config.mm)
    floor_dev = float(np.sqrt(np.trace(clean.V0)))
    rows = []
    for sc in scenarios:
        prev = 0.0
        for mag in config.magnitudes:
            mode = replace(sc.mode, magnitude=mag)
            row = {"m": sc.m, "m_over_n": sc.m / sample.n, "mode": mode.name,
                   "magnitude": mag, "beta_dev": np.nan, "v_dist": np.nan,
                   "exploded": False, "error": ""}
            try:
                bad = contaminate(sample, replace(sc, mode=mode), clean.beta1)
                f = _refit(bad, structure, rho0, rho1, config, clean_init)
                dev = float(np.linalg.norm(f.beta1 - clean.beta1))
                row["beta_dev"] = dev
                row["v_dist"] = v_distance(f.V0, clean.V0)
                row["exploded"] = bool(dev >= EXPLODE_FACTOR * max(prev, floor_dev))
                prev = dev
            except (MMError, ValueError, np.linalg.LinAlgError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({c: r[c] for c in SWEEP_COLUMNS})
