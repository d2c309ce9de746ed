"""Second-stage regression M-estimator.

Given the first-stage covariance ``V0``, ``beta1`` minimizes

    R_n(beta) = (1/n) sum_i rho1(d(s_i, beta, V0))

where ``d`` is the Mahalanobis distance of the residual ``y_i - X_i beta``.
The minimizer is computed by iteratively reweighted GLS with weights
``u1(d_i) = rho1'(d_i)/d_i``.  Because ``t -> rho1(sqrt(t))`` is concave for
both the biweight and Huber losses, every IRLS step is a majorize-minimize
step and never increases ``R_n``.
"""
import enum
from dataclasses import dataclass, field
from math import ceil
from typing import List, Optional

import numpy as np

from .data import MahalanobisContext
from .exceptions import (NotConverged, PathologicalSample, RankDeficient,
                         SingularWeightedDesign)
from .initial import InitialConfig, InitialFit, initial_fit
from .rho import verify_mm_pair

MONOTONE_SLACK = 1e-12
TIE_TOL = 1e-12


class Existence(enum.Enum):
    OK = "ok"
    PATHOLOGICAL = "pathological"


@dataclass
class MMConfig:
    tol: float = 1e-10
    score_tol: float = 1e-8
    max_iter: int = 500
    extra_starts: int = 20
    seed: int = 0
    strict: bool = True
    record_path: bool = False


@dataclass
class MMFit:
    initial: InitialFit
    beta1: np.ndarray
    objective: float
    distances: np.ndarray
    weights: np.ndarray
    iterations: int
    converged: bool
    starts_used: int
    score_norm: float
    rho1: object = None
    objective_paths: Optional[List[List[float]]] = None
    report: object = None
    messages: List[str] = field(default_factory=list)

    @property
    def V0(self):
        return self.initial.V0

    def context(self):
        return MahalanobisContext(self.initial.V0)

    def to_dict(self):
        out = {"initial": self.initial.to_dict(), "beta1": self.beta1.tolist(),
               "objective": self.objective, "distances": self.distances.tolist(),
               "weights": self.weights.tolist(), "iterations": self.iterations,
               "converged": self.converged, "starts_used": self.starts_used,
               "score_norm": self.score_norm,
               "rho1": self.rho1.to_dict() if self.rho1 is not None else None,
               "messages": list(self.messages)}
        if self.report is not None:
            out["asymptotics"] = self.report.to_dict()
        return out


class _Whitened:
    """Data premultiplied by ``L^T`` so distances are Euclidean norms."""

    def __init__(self, sample, ctx, obs_weights=None):
        self.y = ctx.whiten(sample.y)
        self.X = ctx.whiten_design(sample.X)
        if obs_weights is None:
            self.omega = np.full(sample.n, 1.0 / sample.n)
        else:
            w = np.asarray(obs_weights, dtype=float)
            self.omega = w / w.sum()

    def resid(self, beta):
        return self.y - self.X @ beta

    def objective(self, beta, rho1):
        return float(self.omega @ rho1.rho(np.linalg.norm(self.resid(beta), axis=1)))

    def score(self, beta, rho1):
        r = self.resid(beta)
        u = rho1.u(np.linalg.norm(r, axis=1))
        return np.einsum("n,niq,ni->q", self.omega * u, self.X, r)

    def wgls(self, w):
        A = np.einsum("n,niq,nir->qr", w, self.X, self.X)
        b = np.einsum("n,niq,ni->q", w, self.X, self.y)
        return A, b


def objective(sample, beta, ctx, rho1):
    """``R_n(beta) = mean_i rho1(d_i)``."""
    return _Whitened(sample, ctx).objective(np.asarray(beta, dtype=float), rho1)


def score(sample, beta, ctx, rho1):
    """``(1/n) sum_i u1(d_i) X_i^T V^{-1} (y_i - X_i beta)``, i.e. ``-grad R_n``."""
    return _Whitened(sample, ctx).score(np.asarray(beta, dtype=float), rho1)


def existence_guard(sample, ctx, rho1, beta=None):
    """Flag samples with ``R_n(beta) >= sup rho1`` (every point outside the
    ``c1``-ellipsoid around ``X_i beta``); ``beta`` defaults to 0.
    Always OK for unbounded rho1.

    Checking at ``beta`` is the origin check applied to the sample with
    ``y_i`` replaced by ``y_i - X_i beta``.
    """
    if not rho1.bounded:
        return Existence.OK
    at = np.zeros(sample.q) if beta is None else np.asarray(beta, dtype=float)
    r0 = objective(sample, at, ctx, rho1)
    if r0 >= rho1.sup - 1e-12:
        return Existence.PATHOLOGICAL
    return Existence.OK


@dataclass
class _Run:
    beta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    score_norm: float
    path: list
    message: str = ""


def irls(wd, rho1, beta, config):
    """Iterate weighted GLS from ``beta`` on whitened data ``wd``."""
    beta = np.asarray(beta, dtype=float).copy()
    obj = wd.objective(beta, rho1)
    path = [obj]
    message = ""
    it = 0
    step_ok = False
    sn = np.linalg.norm(wd.score(beta, rho1))
    while it < config.max_iter:
        if step_ok and sn <= config.score_tol:
            break
        d = np.linalg.norm(wd.resid(beta), axis=1)
        w = wd.omega * rho1.u(d)
        A, b = wd.wgls(w)
        if not w.any() or np.linalg.cond(A) > 1e14:
            message = "weighted design is singular; kept previous iterate"
            break
        new = np.linalg.solve(A, b)
        new_obj = wd.objective(new, rho1)
        it += 1
        if new_obj > obj + MONOTONE_SLACK:
            # the rejected value stays on the path so callers can see the violation
            path.append(new_obj)
            message = f"objective increased by {new_obj - obj:.3g}; kept previous iterate"
            break
        step = np.linalg.norm(new - beta)
        step_ok = (step <= config.tol * (1.0 + np.linalg.norm(beta))
                   and abs(obj - new_obj) <= config.tol * abs(obj))
        beta, obj = new, new_obj
        path.append(obj)
        sn = np.linalg.norm(wd.score(beta, rho1))
        if step == 0.0 and sn > config.score_tol:
            message = "IRLS reached a fixed point above the score tolerance"
            break
    converged = step_ok and sn <= config.score_tol
    return _Run(beta, obj, it, converged, float(sn), path, message)


def _elemental_starts(sample, wd, config):
    n, k, q = sample.n, sample.k, sample.q
    h = min(n, ceil(q / k))
    starts = []
    for j in range(config.extra_starts):
        rng = np.random.default_rng([config.seed, 7919, j])
        for _ in range(50):
            idx = rng.choice(n, size=h, replace=False)
            A = np.einsum("niq,nir->qr", wd.X[idx], wd.X[idx])
            if np.linalg.matrix_rank(A) == q:
                b = np.einsum("niq,ni->q", wd.X[idx], wd.y[idx])
                starts.append(np.linalg.solve(A, b))
                break
    return starts


def fit_mm(sample, initial, rho1, config=None, obs_weights=None, start=None):
    """Minimize ``R_n`` given the first-stage fit.

    IRLS starts at ``initial.beta0`` (or ``start``); with a bounded rho1,
    ``config.extra_starts`` elemental-subset starts are tried as well and
    the lowest objective is kept (ties go to the smallest ``||beta||``).

    ``obs_weights`` replaces the uniform empirical measure by a weighted
    one; it is used for contamination refits.
    """
    config = config or MMConfig()
    if not sample.pooled_full_rank:
        raise RankDeficient("the stacked design must have full column rank")
    ctx = MahalanobisContext(initial.V0)
    explicit = start is not None
    start = initial.beta0 if start is None else np.asarray(start, dtype=float)
    # the origin check on the sample recentred at the IRLS start keeps equivariance
    if existence_guard(sample, ctx, rho1, start) is Existence.PATHOLOGICAL:
        raise PathologicalSample("R_n >= sup rho1 at the start: every subject lies "
                                 "outside the c1-ellipsoid")
    if rho1.bounded and initial.rho0 is not None and initial.rho0.bounded:
        if not verify_mm_pair(initial.rho0, rho1, 1000):
            raise ValueError("rho1/a1 <= rho0/a0 fails; choose c0 <= c1")

    wd = _Whitened(sample, ctx, obs_weights)
    starts = [start]
    if rho1.bounded and not explicit:
        starts += _elemental_starts(sample, wd, config)
    runs = [irls(wd, rho1, b, config) for b in starts]

    best = runs[0]
    for run in runs[1:]:
        if run.objective < best.objective - TIE_TOL or (
                abs(run.objective - best.objective) <= TIE_TOL
                and np.linalg.norm(run.beta) < np.linalg.norm(best.beta)):
            best = run

    d = np.linalg.norm(wd.resid(best.beta), axis=1)
    fit = MMFit(initial, best.beta, best.objective, d, rho1.u(d), best.iterations,
                best.converged, len(runs), best.score_norm, rho1,
                [r.path for r in runs] if config.record_path else None,
                messages=[best.message] if best.message else [])
    if not best.converged and config.strict:
        if best.message.startswith("weighted design"):
            raise SingularWeightedDesign(best.message, fit)
        raise NotConverged(best.message or
                           f"no convergence in {config.max_iter} iterations "
                           f"(score norm {best.score_norm:.3g})", fit)
    return fit


def fit(sample, structure, rho0, rho1, initial_config, mm_config=None, b0=None):
    """Run both stages: :func:`~mmstruct.initial.initial_fit` then :func:`fit_mm`."""
    if isinstance(initial_config, dict):
        initial_config = InitialConfig.from_dict(initial_config)
    init = initial_fit(sample, structure, rho0, b0, initial_config)
    return fit_mm(sample, init, rho1, mm_config)


def gls(sample, V):
    """Generalized least squares with a known covariance ``V``."""
    ctx = MahalanobisContext(V)
    wd = _Whitened(sample, ctx)
    A, b = wd.wgls(wd.omega)
    return np.linalg.solve(A, b)
