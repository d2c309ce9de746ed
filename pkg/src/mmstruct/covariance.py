"""Structured covariance families ``theta -> V(theta)``.

Four families are supported:

``mixed``
    ``V = sigma0^2 I + sum_j sigma_j^2 Z_j Z_j^T`` with
    ``theta = (sigma0^2, sigma1^2, ..., sigma_r^2)``.
``unstructured``
    ``theta = vech(C)``, the upper triangle of ``C`` read row by row.
``ar1``
    ``v_st = sigma^2 rho^|s-t|`` with ``theta = (sigma^2, rho)``.
``toeplitz``
    ``v_st = theta_{|s-t|}`` (stationary autocovariances, lag 0 first).

Every family is linear in a scale factor, which is what lets the initial
estimator hit its M-scale constraint exactly by rescaling ``theta``.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import linalg, optimize

from .exceptions import DegenerateInput, InvalidParams, NotPositiveDefinite

MIXED = "mixed"
UNSTRUCTURED = "unstructured"
AR1 = "ar1"
TOEPLITZ = "toeplitz"
KINDS = (MIXED, UNSTRUCTURED, AR1, TOEPLITZ)

AR1_RHO_MAX = 1.0 - 1e-8
FLOOR_FACTOR = 1e-10


def _is_pd(V):
    try:
        linalg.cholesky(V, lower=True)
    except linalg.LinAlgError:
        return False
    return True


@dataclass(frozen=True, eq=False)
class CovarianceStructure:
    """A parameterization of ``k x k`` covariance matrices.

    Use the constructors :meth:`mixed`, :meth:`unstructured`, :meth:`ar1`
    and :meth:`toeplitz` rather than instantiating directly.
    """

    kind: str
    k: int
    Z: Tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown covariance structure {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.kind == AR1 and self.k < 2:
            raise ValueError("AR(1) correlation is not identifiable for k = 1")
        if self.kind == MIXED:
            Z = tuple(np.atleast_2d(np.asarray(z, dtype=float)) for z in self.Z)
            for z in Z:
                if z.shape[0] != self.k:
                    raise ValueError(f"Z_j must have {self.k} rows, got {z.shape}")
            object.__setattr__(self, "Z", Z)
            basis = np.array([b.ravel() for b in self._basis()])
            if np.linalg.matrix_rank(basis) < len(basis):
                raise ValueError("random-effect designs give a non-identifiable V(theta)")
        elif self.Z:
            raise ValueError("Z is only used by the mixed effects structure")

    # constructors -----------------------------------------------------------

    @classmethod
    def mixed(cls, Z, k=None):
        Z = tuple(np.atleast_2d(np.asarray(z, dtype=float)) for z in Z)
        if k is None:
            if not Z:
                raise ValueError("k is required when there are no random effects")
            k = Z[0].shape[0]
        return cls(MIXED, int(k), Z)

    @classmethod
    def unstructured(cls, k):
        return cls(UNSTRUCTURED, int(k))

    @classmethod
    def ar1(cls, k):
        return cls(AR1, int(k))

    @classmethod
    def toeplitz(cls, k):
        return cls(TOEPLITZ, int(k))

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        k = int(d["k"])
        if kind == MIXED:
            Z = d.get("Z", [])
            # a single k x g matrix is accepted as well as a list of them
            if len(Z) and np.ndim(Z[0]) == 1:
                Z = [Z]
            return cls.mixed(Z, k)
        return cls(kind, k)

    def to_dict(self):
        d = {"kind": self.kind, "k": self.k}
        if self.kind == MIXED:
            d["Z"] = [z.tolist() for z in self.Z]
        return d

    # ------------------------------------------------------------------------

    @property
    def n_params(self):
        k = self.k
        return {MIXED: len(self.Z) + 1, UNSTRUCTURED: k * (k + 1) // 2,
                AR1: 2, TOEPLITZ: k}[self.kind]

    def _basis(self):
        """Basis matrices of the linear families."""
        k = self.k
        if self.kind == MIXED:
            return [np.eye(k)] + [z @ z.T for z in self.Z]
        if self.kind == TOEPLITZ:
            lag = np.abs(np.subtract.outer(np.arange(k), np.arange(k)))
            return [(lag == h).astype(float) for h in range(k)]
        if self.kind == UNSTRUCTURED:
            out = []
            for i, j in zip(*np.triu_indices(k)):
                b = np.zeros((k, k))
                b[i, j] = b[j, i] = 1.0
                out.append(b)
            return out
        raise TypeError("AR(1) is not a linear family")

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.shape != (self.n_params,):
            raise InvalidParams(f"{self.kind} expects {self.n_params} parameters, got {theta.size}")
        if not np.all(np.isfinite(theta)):
            raise InvalidParams("parameters must be finite")
        if self.kind == MIXED:
            if theta[0] <= 0 or np.any(theta[1:] < 0):
                raise InvalidParams("need sigma0^2 > 0 and sigma_j^2 >= 0")
        elif self.kind == AR1:
            if theta[0] <= 0 or abs(theta[1]) > AR1_RHO_MAX:
                raise InvalidParams("need sigma^2 > 0 and |rho| <= 1 - 1e-8")
        return theta

    def build(self, theta):
        """Assemble ``V(theta)``; raises if the result is not PDS."""
        theta = self._check(theta)
        k = self.k
        if self.kind == AR1:
            lag = np.abs(np.subtract.outer(np.arange(k), np.arange(k)))
            V = theta[0] * theta[1] ** lag
        elif self.kind == UNSTRUCTURED:
            V = np.zeros((k, k))
            iu = np.triu_indices(k)
            V[iu] = theta
            V = V + np.triu(V, 1).T
        else:
            V = sum(t * b for t, b in zip(theta, self._basis()))
        if not _is_pd(V):
            raise NotPositiveDefinite(f"{self.kind} parameters do not give a positive definite V")
        return V

    def scale(self, theta, factor):
        """Parameters of ``factor * V(theta)``."""
        if not factor > 0:
            raise ValueError("factor must be positive")
        theta = np.array(theta, dtype=float)
        if self.kind == AR1:
            theta[0] *= factor
        else:
            theta *= factor
        return theta

    def project(self, M):
        """Parameters whose ``V`` is closest to ``M`` in Frobenius norm.

        Variances are kept above ``1e-10 * trace(M) / k``; for the
        unstructured and Toeplitz families eigenvalues are kept above the
        same floor so the result is always positive definite.
        """
        M = np.asarray(M, dtype=float)
        k = self.k
        if M.shape != (k, k):
            raise ValueError(f"expected a {k}x{k} matrix")
        M = 0.5 * (M + M.T)
        tr = np.trace(M)
        if not tr > 0:
            raise DegenerateInput("matrix trace must be positive")
        floor = FLOOR_FACTOR * tr / k

        if self.kind == UNSTRUCTURED:
            w, Q = np.linalg.eigh(M)
            if w[0] < floor:
                M = (Q * np.maximum(w, floor)) @ Q.T
                M = 0.5 * (M + M.T)
            return M[np.triu_indices(k)].copy()

        if self.kind == MIXED:
            A = np.array([b.ravel() for b in self._basis()]).T
            theta, _ = optimize.nnls(A, M.ravel())
            theta[0] = max(theta[0], floor)
            return theta

        if self.kind == TOEPLITZ:
            lag = np.abs(np.subtract.outer(np.arange(k), np.arange(k)))
            theta = np.array([M[lag == h].mean() for h in range(k)])
            theta[0] = max(theta[0], floor)
            low = np.linalg.eigvalsh(self._assemble_linear(theta))[0]
            if low < floor:
                # lifting the diagonal is the cheapest way back into PDS
                theta[0] += floor - low
            return theta

        return self._project_ar1(M, floor)

    def _assemble_linear(self, theta):
        return sum(t * b for t, b in zip(theta, self._basis()))

    def _project_ar1(self, M, floor):
        k = self.k
        lag = np.abs(np.subtract.outer(np.arange(k), np.arange(k)))

        def fit(r):
            R = r ** lag
            return np.sum(R * M) / np.sum(R * R), R

        def loss(r):
            s2, R = fit(r)
            s2 = max(s2, floor)
            return np.sum((s2 * R - M) ** 2)

        def slope(r):
            # sign of d/dr <R,M>^2/<R,R>, valid where <R,M> > 0
            R = r ** lag
            dR = lag * np.where(lag > 0, r ** np.maximum(lag - 1, 0), 0.0)
            a, b = np.sum(R * M), np.sum(R * R)
            return 2.0 * np.sum(dR * M) * b - a * 2.0 * np.sum(R * dR)

        grid, Rg, RR = _ar1_grid(k)
        a = np.einsum("gij,ij->g", Rg, M)
        s2 = np.maximum(a / RR, floor)
        vals = s2 * s2 * RR - 2.0 * s2 * a + np.sum(M * M)
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        roots = []
        for a, b in ((lo, grid[i]), (grid[i], hi)):
            if a < b and fit(a)[0] > floor and fit(b)[0] > floor and slope(a) * slope(b) < 0:
                roots.append(optimize.brentq(slope, a, b, xtol=1e-15, rtol=1e-15))
        if roots:
            r = min(roots, key=loss)
        else:
            res = optimize.minimize_scalar(loss, bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-13})
            r = float(res.x) if res.fun <= vals[i] else float(grid[i])
        s2 = max(fit(r)[0], floor)
        return np.array([s2, r])


@lru_cache(maxsize=16)
def _ar1_grid(k, size=201):
    grid = np.linspace(-AR1_RHO_MAX, AR1_RHO_MAX, size)
    lag = np.abs(np.subtract.outer(np.arange(k), np.arange(k)))
    Rg = grid[:, None, None] ** lag
    return grid, Rg, np.sum(Rg * Rg, axis=(1, 2))


def fit_params_from_matrix(structure, M):
    return structure.project(M)


def build_V(structure, theta):
    return structure.build(theta)


def scale_params(structure, theta, factor):
    return structure.scale(theta, factor)
