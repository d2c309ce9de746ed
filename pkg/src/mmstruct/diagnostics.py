"""Influence function and asymptotic covariance of ``beta1``.

Covariances here are those of ``sqrt(n) (beta1 - beta)``; divide by ``n``
for the covariance of the estimate itself.
"""
from dataclasses import dataclass

import numpy as np

from .data import MahalanobisContext
from .exceptions import SingularD1, SingularInfo
from .mm import MMConfig, _Whitened, irls
from .rho import alpha1, efficiency_constants

COND_MAX = 1e12

__all__ = ["AsymptoticReport", "alpha1", "asymptotic_covariance", "empirical_influence",
           "influence_function", "info_matrix", "score_contributions", "score_jacobian"]


@dataclass
class AsymptoticReport:
    alpha1: float
    lambda_: float
    info_matrix: np.ndarray
    closed_form_cov: np.ndarray
    sandwich_cov: np.ndarray
    D1_hat: np.ndarray
    n: int

    def standard_errors(self, kind="sandwich"):
        cov = self.sandwich_cov if kind == "sandwich" else self.closed_form_cov
        return np.sqrt(np.diag(cov) / self.n)

    def to_dict(self):
        return {"alpha1": self.alpha1, "lambda": self.lambda_,
                "info_matrix": self.info_matrix.tolist(),
                "closed_form_cov": self.closed_form_cov.tolist(),
                "sandwich_cov": self.sandwich_cov.tolist(),
                "D1_hat": self.D1_hat.tolist(), "n": self.n}

    @classmethod
    def from_dict(cls, d):
        arr = np.asarray
        return cls(d["alpha1"], d["lambda"], arr(d["info_matrix"]), arr(d["closed_form_cov"]),
                   arr(d["sandwich_cov"]), arr(d["D1_hat"]), int(d["n"]))


def _inv(A, exc, what):
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > COND_MAX:
        raise exc(f"{what} is numerically singular")
    return np.linalg.inv(A)


def info_matrix(sample, ctx):
    """``(1/n) sum_i X_i^T V^{-1} X_i``."""
    Xw = ctx.whiten_design(sample.X)
    return np.einsum("niq,nir->qr", Xw, Xw) / sample.n


def score_contributions(sample, beta, ctx, rho1):
    """Rows ``Psi_1(s_i, beta, V) = u1(d_i) X_i^T V^{-1} r_i``."""
    wd = _Whitened(sample, ctx)
    r = wd.resid(np.asarray(beta, dtype=float))
    u = rho1.u(np.linalg.norm(r, axis=1))
    return np.einsum("n,niq,ni->nq", u, wd.X, r)


def score_jacobian(sample, beta, ctx, rho1):
    """Analytic ``d/dbeta`` of the mean score:

    ``mean_i[-(u1'(d)/d) X^T V^-1 r r^T V^-1 X - u1(d) X^T V^-1 X]``.
    """
    wd = _Whitened(sample, ctx)
    r = wd.resid(np.asarray(beta, dtype=float))
    d = np.linalg.norm(r, axis=1)
    g = np.einsum("niq,ni->nq", wd.X, r)
    D = -np.einsum("n,nq,nr->qr", rho1.u_prime_over_s(d), g, g)
    D -= np.einsum("n,niq,nir->qr", rho1.u(d), wd.X, wd.X)
    return D / sample.n


def asymptotic_covariance(fit, sample, rho1=None):
    """Closed-form (Gaussian/elliptical) and sandwich covariances at ``fit``."""
    rho1 = rho1 or fit.rho1
    ctx = MahalanobisContext(fit.V0)
    a1, lam = efficiency_constants(rho1, sample.k)
    info = info_matrix(sample, ctx)
    closed = lam * _inv(info, SingularInfo, "information matrix")
    psi = score_contributions(sample, fit.beta1, ctx, rho1)
    M = psi.T @ psi / sample.n
    D1 = score_jacobian(sample, fit.beta1, ctx, rho1)
    D1inv = _inv(D1, SingularD1, "D1")
    sandwich = D1inv @ M @ D1inv.T
    sym = lambda A: 0.5 * (A + A.T)
    return AsymptoticReport(a1, lam, info, sym(closed), sym(sandwich), D1, sample.n)


def influence_function(fit, report, y0, X0, rho1=None):
    """``u1(d0)/alpha1 * info^{-1} X0^T V0^{-1} (y0 - X0 beta1)``."""
    rho1 = rho1 or fit.rho1
    ctx = MahalanobisContext(fit.V0)
    y0 = np.asarray(y0, dtype=float).ravel()
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    r = y0 - X0 @ fit.beta1
    rw = ctx.whiten(r)
    d0 = np.linalg.norm(rw)
    g = ctx.whiten_design(X0[None])[0].T @ rw
    info_inv = _inv(report.info_matrix, SingularInfo, "information matrix")
    return float(rho1.u(d0)) / report.alpha1 * info_inv @ g


def empirical_influence(fit, sample, y0, X0, eps=1e-3, rho1=None, config=None):
    """Finite-difference influence: refit on ``(1 - eps) P_n + eps delta_{s0}``
    with ``V0`` held fixed, warm-started at ``beta1``.

    Returns ``(beta(eps) - beta(0)) / eps`` where ``beta(0)`` is the same
    refit on ``P_n`` alone, so the IRLS stopping error cancels instead of
    being amplified by ``1/eps``.
    """
    from .data import BalancedSample

    rho1 = rho1 or fit.rho1
    config = config or MMConfig()
    ctx = MahalanobisContext(fit.V0)
    y0 = np.asarray(y0, dtype=float).reshape(1, -1)
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))[None]
    aug = BalancedSample(np.vstack([sample.y, y0]), np.concatenate([sample.X, X0]))
    omega = np.append(np.full(sample.n, (1.0 - eps) / sample.n), eps)
    base = irls(_Whitened(sample, ctx), rho1, fit.beta1, config)
    run = irls(_Whitened(aug, ctx, omega), rho1, fit.beta1, config)
    return (run.beta - base.beta) / eps
