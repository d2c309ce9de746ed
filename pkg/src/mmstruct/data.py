"""Balanced samples ``(y_i, X_i)``, Mahalanobis distances and the
hyperplane count ``kappa``."""
import csv
import warnings
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from scipy import linalg

from .exceptions import (ParseError, RankDeficientWarning, SingularCovariance,
                         Unbalanced)

MAX_CONDITION = 1e12
KAPPA_TOL = 1e-9
KAPPA_MAX_N = 30
KAPPA_MAX_DIM = 6


@dataclass(frozen=True, eq=False)
class BalancedSample:
    """``n`` subjects with responses ``y[i]`` in ``R^k`` and designs
    ``X[i]`` in ``R^{k x q}``."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if X.ndim == 2:
            X = X[:, :, None]
        if y.ndim != 2 or X.ndim != 3 or X.shape[:2] != y.shape:
            raise ValueError(f"shape mismatch: y {y.shape}, X {X.shape}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def k(self):
        return self.y.shape[1]

    @property
    def q(self):
        return self.X.shape[2]

    @property
    def full_rank_flags(self):
        return np.linalg.matrix_rank(self.X) == self.q

    @property
    def pooled_full_rank(self):
        """Whether the stacked ``(n k) x q`` design has rank ``q``."""
        return np.linalg.matrix_rank(self.X.reshape(-1, self.q)) == self.q

    @property
    def p(self):
        return design_dimension(self.X)

    def subset(self, idx):
        return BalancedSample(self.y[idx], self.X[idx])

    def with_y(self, y):
        return BalancedSample(y, self.X)

    def describe(self, max_exact_n=KAPPA_MAX_N):
        value, exact = kappa(self, max_exact_n)
        return {"n": self.n, "k": self.k, "q": self.q, "p": self.p,
                "kappa": value, "kappa_exact": exact}


def load_csv(path):
    """Read the long format ``subject,row,y,x1,...,xq``.

    Subjects keep their order of first appearance; rows are sorted by the
    ``row`` column.  Subjects whose design is rank deficient trigger a
    :class:`RankDeficientWarning` and are listed on the returned sample as
    ``sample.rank_deficient``.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    q = len(header) - 3
    expected = ["subject", "row", "y"] + [f"x{j + 1}" for j in range(q)]
    if q < 1 or header != expected:
        raise ParseError(f"{path}: header must be {','.join(expected[:3])},x1,...,xq; got {rows[0]}")
    if len(rows) == 1:
        raise ParseError(f"{path}: no data rows")

    subjects = {}
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields")
        try:
            subj, occ = int(r[0]), int(r[1])
            vals = [float(v) for v in r[2:]]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        subjects.setdefault(subj, []).append((occ, vals))

    k = max(len(v) for v in subjects.values())
    y, X = [], []
    for subj, entries in subjects.items():
        occs = sorted(o for o, _ in entries)
        if len(entries) != k or occs != list(range(1, k + 1)):
            raise Unbalanced(f"subject {subj} has rows {occs}, expected 1..{k}")
        entries.sort(key=lambda e: e[0])
        y.append([v[0] for _, v in entries])
        X.append([v[1:] for _, v in entries])

    sample = BalancedSample(np.array(y), np.array(X))
    bad = [s for s, ok in zip(subjects, sample.full_rank_flags) if not ok]
    object.__setattr__(sample, "rank_deficient", bad)
    if bad:
        warnings.warn(f"rank deficient designs for subjects {bad}", RankDeficientWarning)
    return sample


def write_csv(sample, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "row", "y"] + [f"x{j + 1}" for j in range(sample.q)])
        for i in range(sample.n):
            for t in range(sample.k):
                # repr of a Python float round-trips exactly
                w.writerow([i + 1, t + 1, repr(float(sample.y[i, t]))]
                           + [repr(float(v)) for v in sample.X[i, t]])


# ---------------------------------------------------------------------------


class MahalanobisContext:
    """Factorization of a covariance ``V``: ``L`` lower triangular with
    ``L L^T = V^{-1}``, so that ``d = ||L^T r||``."""

    def __init__(self, V):
        V = np.asarray(V, dtype=float)
        V = 0.5 * (V + V.T)
        w = np.linalg.eigvalsh(V)
        if not w[0] > 0 or w[-1] / w[0] > MAX_CONDITION:
            raise SingularCovariance(f"V is singular or ill conditioned (eigenvalues {w[0]:.3g}..{w[-1]:.3g})")
        self.V = V
        chol = linalg.cholesky(V, lower=True)
        Vinv = linalg.cho_solve((chol, True), np.eye(len(V)))
        self.V_inv = 0.5 * (Vinv + Vinv.T)
        self.L = linalg.cholesky(self.V_inv, lower=True)
        self.logdet = 2.0 * np.sum(np.log(np.diag(chol)))

    def whiten(self, r):
        """``L^T r`` for residual vectors stored along the last axis."""
        return np.asarray(r) @ self.L

    def whiten_design(self, X):
        """``L^T X_i`` for a stack of designs ``(n, k, q)``."""
        return np.einsum("ji,njq->niq", self.L, X)


def residuals(sample, beta):
    return sample.y - sample.X @ np.asarray(beta, dtype=float)


def distances(sample, beta, ctx):
    """Mahalanobis distances ``d_i = sqrt(r_i^T V^{-1} r_i)``."""
    return np.linalg.norm(ctx.whiten(residuals(sample, beta)), axis=1)


# ---------------------------------------------------------------------------
# kappa


def _design_basis(X):
    flat = X.reshape(len(X), -1)
    centered = flat - flat.mean(axis=0)
    if len(flat) < 2:
        return centered, np.zeros((flat.shape[1], 0))
    _, s, Vt = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return centered, np.zeros((flat.shape[1], 0))
    keep = s > 1e-9 * s[0]
    return centered, Vt[keep].T


def design_dimension(X):
    """Affine dimension ``p`` of the flattened designs."""
    return _design_basis(np.asarray(X, dtype=float))[1].shape[1]


def embed_points(sample):
    """Points ``(y_i, coordinates of X_i)`` in ``R^{k+p}``."""
    centered, basis = _design_basis(sample.X)
    return np.hstack([sample.y, centered @ basis])


def _normalize(points):
    pts = points - points.mean(axis=0)
    scale = np.abs(pts).max()
    return pts / scale if scale > 0 else pts


def _affine_rank(pts, tol=KAPPA_TOL):
    diffs = pts[1:] - pts[0]
    if diffs.size == 0:
        return 0
    s = np.linalg.svd(diffs, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def kappa(sample, max_exact_n=KAPPA_MAX_N):
    """Maximal number of sample points on one hyperplane of ``R^{k+p}``.

    Returns ``(value, exact)``.  The count is exact (enumeration of
    hyperplanes through ``k+p`` points) when ``n <= max_exact_n`` and
    ``k + p <= 6``; otherwise the general-position value ``k + p`` is
    returned with ``exact=False``.
    """
    pts = embed_points(sample)
    n, D = pts.shape
    if n > max_exact_n or D > KAPPA_MAX_DIM:
        return D, False
    return exact_kappa(pts), True


def exact_kappa(points, tol=KAPPA_TOL):
    pts = _normalize(np.asarray(points, dtype=float))
    n, D = pts.shape
    if D == 0:
        return n
    if n <= D or _affine_rank(pts, tol) < D:
        return n
    if D == 1:
        return int((np.abs(pts - pts.T) <= tol).sum(axis=1).max())
    best = 0
    # a maximal hyperplane is spanned by D affinely independent sample points
    for idx in _chunked_combinations(n, D):
        sub = pts[idx]                                   # (m, D, D)
        diffs = sub[:, 1:, :] - sub[:, :1, :]            # (m, D-1, D)
        _, s, Vt = np.linalg.svd(diffs, full_matrices=True)
        normal = Vt[:, -1, :]                            # (m, D)
        ok = s[:, -1] > tol * np.maximum(1.0, s[:, 0])
        if not ok.any():
            continue
        normal, base = normal[ok], sub[ok, 0, :]
        resid = np.abs((pts[None, :, :] - base[:, None, :]) @ normal[:, :, None])[..., 0]
        best = max(best, int((resid <= tol).sum(axis=1).max()))
        if best == n:
            break
    return best


def _chunked_combinations(n, r, chunk=20000):
    it = combinations(range(n), r)
    total = comb(n, r)
    while total > 0:
        block = [next(it) for _ in range(min(chunk, total))]
        total -= len(block)
        yield np.array(block, dtype=int)
