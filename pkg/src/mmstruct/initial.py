"""First-stage estimator ``(beta0, theta0)``.

A fast-S style search: random elemental subsets give starting values,
concentration steps (weighted GLS for ``beta``, weighted residual scatter
projected onto the covariance structure for ``theta``) refine them, and
the candidate with the smallest M-scale wins.  The winning covariance is
rescaled so that

    (1/n) sum_i rho0(d(s_i, beta0, V0)) = b0

holds exactly.
"""
import warnings
from dataclasses import dataclass, field
from math import ceil
from typing import List, Optional

import numpy as np
from scipy import optimize

from .data import MahalanobisContext, distances, residuals
from .exceptions import (AllCandidatesSingular, DegenerateInput, DegenerateScale,
                         DegenerateScaleWarning, MMError, NotBounded, RankDeficient)
from .rho import expected_rho

SCALE_RTOL = 1e-12
MONOTONE_SLACK = 1e-9


def mscale(d, rho0, b0):
    """Solve ``mean(rho0(d / s)) = b0`` for ``s > 0``.

    Raises :class:`DegenerateScale` when too many distances are exactly zero
    for a positive solution to exist.
    """
    if not rho0.bounded:
        raise NotBounded("the M-scale needs a bounded rho0")
    a0 = rho0.sup
    if not 0.0 < b0 < a0:
        raise ValueError(f"b0 must lie in (0, {a0})")
    d = np.abs(np.asarray(d, dtype=float))
    n = d.size
    pos = d[d > 0]
    # as s -> 0 the mean tends to a0 * (fraction of nonzero d)
    if pos.size == 0 or a0 * pos.size <= b0 * n:
        raise DegenerateScale(f"{n - pos.size} of {n} distances are zero; no positive scale")

    def gap(s):
        return rho0.rho(d / s).mean() - b0

    lo = pos.min() / rho0.cutoff
    hi = np.sqrt(np.mean(d * d) / (2.0 * b0))
    if gap(hi) > 0:                     # rho <= s^2/2 makes this impossible
        hi *= 2.0
    if gap(lo) == 0.0:
        return float(lo)
    if gap(hi) == 0.0:
        return float(hi)
    return float(optimize.brentq(gap, lo, hi, xtol=1e-300, rtol=SCALE_RTOL, maxiter=500))


@dataclass
class InitialConfig:
    seed: int
    n_subsets: int = 500
    n_concentration: int = 10
    r0: float = 0.5
    record_paths: bool = False

    @classmethod
    def from_dict(cls, d):
        known = {"seed", "n_subsets", "n_concentration", "r0", "record_paths"}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class InitialFit:
    beta0: np.ndarray
    theta0: np.ndarray
    V0: np.ndarray
    scale_constraint_residual: float
    candidates_evaluated: int
    scale: float
    b0: float
    structure: object = None
    rho0: object = None
    warnings: List[str] = field(default_factory=list)
    scale_paths: Optional[List[List[float]]] = None

    def to_dict(self):
        return {"beta0": self.beta0.tolist(), "theta0": self.theta0.tolist(),
                "V0": self.V0.tolist(), "b0": self.b0, "scale": self.scale,
                "scale_constraint_residual": self.scale_constraint_residual,
                "candidates_evaluated": self.candidates_evaluated,
                "rho0": self.rho0.to_dict() if self.rho0 is not None else None,
                "warnings": list(self.warnings)}


def _unit_det(structure, theta):
    V = structure.build(theta)
    sign, logdet = np.linalg.slogdet(V)
    return structure.scale(theta, np.exp(-logdet / structure.k))


def _wgls(Xw, yw, w):
    A = np.einsum("n,niq,nir->qr", w, Xw, Xw)
    b = np.einsum("n,niq,ni->q", w, Xw, yw)
    return np.linalg.solve(A, b)


class _Candidate:
    """State of one concentration run."""

    def __init__(self, sample, structure, rho0, b0, beta, theta):
        self.sample, self.structure, self.rho0, self.b0 = sample, structure, rho0, b0
        self.set(beta, theta)

    def evaluate(self, beta, theta):
        ctx = MahalanobisContext(self.structure.build(theta))
        d = distances(self.sample, beta, ctx)
        return mscale(d, self.rho0, self.b0), ctx, d

    def set(self, beta, theta):
        self.beta, self.theta = beta, theta
        self.s, self.ctx, self.d = self.evaluate(beta, theta)

    def step(self):
        """One concentration step; returns False when no progress is made."""
        sample, ctx = self.sample, self.ctx
        w = self.rho0.u(self.d / self.s)
        beta = _wgls(ctx.whiten_design(sample.X), ctx.whiten(sample.y), w)
        r = residuals(sample, beta)
        scatter = np.einsum("n,ni,nj->ij", w, r, r) / w.sum()
        tries = []
        try:
            tries.append(_unit_det(self.structure, self.structure.project(scatter)))
        except DegenerateInput:
            pass
        tries.append(self.theta)
        for theta in tries:
            try:
                s, ctx_new, d = self.evaluate(beta, theta)
            except (DegenerateScale, MMError, np.linalg.LinAlgError):
                continue
            if s <= self.s * (1.0 + MONOTONE_SLACK):
                progress = s < self.s * (1.0 - SCALE_RTOL)
                self.beta, self.theta, self.s, self.ctx, self.d = beta, theta, s, ctx_new, d
                return progress
        return False


def _elemental_start(sample, structure, rng, h):
    n, k, q = sample.n, sample.k, sample.q
    for _ in range(50):
        idx = rng.choice(n, size=h, replace=False)
        Xs = sample.X[idx].reshape(-1, q)
        if np.linalg.matrix_rank(Xs) < q:
            continue
        beta = np.linalg.lstsq(Xs, sample.y[idx].reshape(-1), rcond=None)[0]
        r = residuals(sample.subset(idx), beta)
        scatter = r.T @ r / h
        if not np.trace(scatter) > 0:
            r = residuals(sample, beta)
            scatter = r.T @ r / n
        if not np.trace(scatter) > 0:
            return beta, None
        return beta, _unit_det(structure, structure.project(scatter))
    return None


def initial_fit(sample, structure, rho0, b0=None, config=None):
    """High-breakdown starting values with the M-scale constraint enforced.

    Parameters
    ----------
    sample : BalancedSample
    structure : CovarianceStructure
    rho0 : RhoFunction
        Bounded loss of the scale constraint.
    b0 : float, optional
        Constraint level; defaults to ``E[rho0(||z||)]`` under ``N(0, I_k)``
        which makes the scale consistent at the Gaussian model.
    config : InitialConfig
        Number of subsets, concentration steps and the RNG seed.
    """
    if config is None:
        raise ValueError("an InitialConfig with an explicit seed is required")
    if not rho0.bounded:
        raise NotBounded("rho0 must be bounded")
    if b0 is None:
        b0 = expected_rho(rho0, sample.k)
    n, k, q = sample.n, sample.k, sample.q
    if not sample.pooled_full_rank:
        raise RankDeficient("the stacked design must have full column rank")
    if n * k <= q + structure.n_params:
        raise RankDeficient("need n*k > q + l observations")

    h = min(n, ceil((q + structure.n_params) / k) + 1)
    best = None
    degenerate = None
    evaluated = 0
    paths = [] if config.record_paths else None
    for j in range(config.n_subsets):
        rng = np.random.default_rng([config.seed, j])
        start = _elemental_start(sample, structure, rng, h)
        if start is None:
            continue
        beta, theta = start
        if theta is None:
            degenerate = beta
            continue
        try:
            cand = _Candidate(sample, structure, rho0, b0, beta, theta)
        except DegenerateScale:
            degenerate = beta
            continue
        except (MMError, np.linalg.LinAlgError):
            continue
        path = [cand.s]
        for _ in range(config.n_concentration):
            try:
                moved = cand.step()
            except (MMError, np.linalg.LinAlgError):
                break
            path.append(cand.s)
            if not moved:
                break
        evaluated += 1
        if paths is not None:
            paths.append(path)
        key = (cand.s, np.linalg.norm(cand.beta))
        if best is None or key[0] < best[0][0] * (1 - 1e-12) or (
                abs(key[0] - best[0][0]) <= 1e-12 * best[0][0] and key[1] < best[0][1]):
            best = (key, cand)

    if degenerate is not None:
        # some candidate fits so many subjects exactly that the scale is zero
        return _degenerate_fit(sample, structure, rho0, b0, degenerate, evaluated, paths)
    if best is None:
        raise AllCandidatesSingular("no subset produced a usable candidate")

    cand = best[1]
    theta0 = structure.scale(cand.theta, cand.s ** 2)
    V0 = structure.build(theta0)
    d = distances(sample, cand.beta, MahalanobisContext(V0))
    resid = float(rho0.rho(d).mean() - b0)
    return InitialFit(cand.beta, theta0, V0, resid, evaluated, cand.s, b0,
                      structure, rho0, [], paths)


def _degenerate_fit(sample, structure, rho0, b0, beta, evaluated, paths):
    tau = 1e-8 * np.mean(np.sum(sample.y ** 2, axis=1)) / sample.k
    if not tau > 0:
        tau = 1e-8
    theta0 = structure.project(tau * np.eye(sample.k))
    V0 = structure.build(theta0)
    d = distances(sample, beta, MahalanobisContext(V0))
    msg = "exact fit: M-scale is zero; V0 set to a tiny multiple of the identity"
    warnings.warn(msg, DegenerateScaleWarning)
    return InitialFit(beta, theta0, V0, float(rho0.rho(d).mean() - b0), evaluated, 0.0,
                      b0, structure, rho0, [msg], paths)
