"""Biweight and Huber rho-functions, radial Gaussian expectations and
cut-off calibration.

All functions of a radius ``s`` are evaluated on ``|s|``.  Expectations
of radial functions under the standard ``k``-variate normal are computed
as one-dimensional integrals against the chi density with ``k`` degrees
of freedom, using fixed-order Gauss-Legendre quadrature split at the
cut-off (where the biweight and Huber pieces change formula).
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize, special, stats

from .exceptions import NoBracket, NonIntegrable, NotBounded

BIWEIGHT = "biweight"
HUBER = "huber"
KINDS = (BIWEIGHT, HUBER)

QUAD_NODES = 256
TAIL_LENGTH = 40.0
CUTOFF_BRACKET = (1e-3, 1e3)


@dataclass(frozen=True)
class RhoFunction:
    """A symmetric loss ``rho(s; c)``.

    Parameters
    ----------
    kind : {"biweight", "huber"}
        Tukey's biweight (bounded, plateau ``c**2/6`` beyond ``c``) or
        Huber's loss (quadratic up to ``c``, linear beyond).
    cutoff : float
        Tuning constant ``c > 0``.
    dimension : int, optional
        Response dimension the cut-off was calibrated for.  Informational.
    """

    kind: str
    cutoff: float
    dimension: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown rho family {self.kind!r}")
        if not self.cutoff > 0 or not np.isfinite(self.cutoff):
            raise ValueError("cutoff must be a positive finite number")
        object.__setattr__(self, "cutoff", float(self.cutoff))

    @classmethod
    def biweight(cls, cutoff, dimension=None):
        return cls(BIWEIGHT, cutoff, dimension)

    @classmethod
    def huber(cls, cutoff, dimension=None):
        return cls(HUBER, cutoff, dimension)

    @property
    def bounded(self):
        return self.kind == BIWEIGHT

    @property
    def sup(self):
        """``sup rho``: ``c**2/6`` for the biweight, ``inf`` for Huber."""
        return self.cutoff ** 2 / 6.0 if self.bounded else np.inf

    def rho(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        c = self.cutoff
        if self.bounded:
            t2 = np.minimum(s / c, 1.0) ** 2
            return c * c / 6.0 * t2 * (3.0 - 3.0 * t2 + t2 * t2)
        return np.where(s <= c, 0.5 * s * s, c * s - 0.5 * c * c)

    def psi(self, s):
        """First derivative ``rho'(s)`` (odd in ``s``)."""
        s = np.asarray(s, dtype=float)
        c = self.cutoff
        if self.bounded:
            w = np.clip(1.0 - (s / c) ** 2, 0.0, None)
            return s * w * w
        return np.clip(s, -c, c)

    def u(self, s):
        """Weight ``u(s) = rho'(s)/s`` with ``u(0) = 1``."""
        s = np.abs(np.asarray(s, dtype=float))
        c = self.cutoff
        if self.bounded:
            w = np.clip(1.0 - (s / c) ** 2, 0.0, None)
            return w * w
        return np.where(s <= c, 1.0, c / np.where(s > c, s, 1.0))

    def psi_prime(self, s):
        """Second derivative ``rho''(s)``; Huber uses 0 at the kink."""
        s = np.abs(np.asarray(s, dtype=float))
        c = self.cutoff
        if self.bounded:
            t2 = (s / c) ** 2
            return np.where(s < c, (1.0 - t2) * (1.0 - 5.0 * t2), 0.0)
        return np.where(s < c, 1.0, 0.0)

    def u_prime_over_s(self, s):
        """``u'(s)/s``, continuous at 0 (``-4/c**2`` biweight, 0 Huber)."""
        s = np.abs(np.asarray(s, dtype=float))
        c = self.cutoff
        if self.bounded:
            return np.where(s < c, -4.0 / c ** 2 * (1.0 - (s / c) ** 2), 0.0)
        return np.where(s <= c, 0.0, -c / np.where(s > c, s, 1.0) ** 3)

    def to_dict(self):
        return {"family": self.kind, "cutoff": self.cutoff}

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], float(d["cutoff"]))


def rho_eval(f, s):
    """Evaluate ``rho(|s|)``."""
    return f.rho(s)


def rho_derivatives(f, s):
    """Return ``(rho'(s), u(s), rho''(s))`` for ``s >= 0``."""
    return f.psi(s), f.u(s), f.psi_prime(s)


# ---------------------------------------------------------------------------
# radial expectations


@lru_cache(maxsize=4)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


def chi_pdf(r, k):
    r = np.asarray(r, dtype=float)
    logpdf = ((k - 1) * np.log(r) - 0.5 * r * r
              - (0.5 * k - 1.0) * np.log(2.0) - special.gammaln(0.5 * k))
    return np.exp(logpdf)


def _gauss_legendre(g, k, segments, n):
    x, w = _legendre(n)
    total = 0.0
    for a, b in zip(segments[:-1], segments[1:]):
        half = 0.5 * (b - a)
        r = half * x + 0.5 * (a + b)
        total += half * np.sum(w * np.asarray(g(r), dtype=float) * chi_pdf(r, k))
    return float(total)


def expected_radial(g: Callable, k: int, breakpoints: Sequence[float] = (),
                    rtol: float = 1e-9):
    """``E[g(||z||)]`` for ``z ~ N(0, I_k)``.

    Integrates ``g`` against the chi density on ``[0, sqrt(k) + 40]``, split
    at ``breakpoints`` inside that range.  Beyond the upper limit the chi
    density is below ``exp(-800)``.  Pass the points where ``g`` is not
    smooth as ``breakpoints``; an unresolved kink shows up as disagreement
    between the 256- and 128-node rules and raises :class:`NonIntegrable`.
    """
    k = int(k)
    if k < 1:
        raise ValueError("k must be a positive integer")
    upper = np.sqrt(k) + TAIL_LENGTH
    inner = sorted(float(b) for b in breakpoints if 0.0 < b < upper)
    segments = [0.0] + inner + [upper]
    fine = _gauss_legendre(g, k, segments, QUAD_NODES)
    coarse = _gauss_legendre(g, k, segments, QUAD_NODES // 2)
    if not np.isfinite(fine) or abs(fine - coarse) > rtol * abs(fine) + 1e-14:
        raise NonIntegrable(
            f"quadrature did not converge (256 nodes: {fine!r}, 128 nodes: {coarse!r})")
    return fine


def expected_rho(f, k):
    return expected_radial(f.rho, k, (f.cutoff,))


def alpha1(f, k):
    """``E[(1 - 1/k) u(||z||) + (1/k) rho''(||z||)]`` under ``N(0, I_k)``."""
    k = int(k)

    def integrand(r):
        return (1.0 - 1.0 / k) * f.u(r) + f.psi_prime(r) / k

    return expected_radial(integrand, k, (f.cutoff,))


def efficiency_constants(f, k):
    """Return ``(alpha1, lambda)`` with ``lambda = E[rho'^2] / (k alpha1^2)``.

    ``1/lambda`` is the Gaussian efficiency relative to (generalized) least
    squares.
    """
    a1 = alpha1(f, k)
    if not a1 > 0:
        raise ArithmeticError(f"alpha1 = {a1} is not positive")
    m2 = expected_radial(lambda r: f.psi(r) ** 2, k, (f.cutoff,))
    return a1, m2 / (int(k) * a1 * a1)


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class CalibrationResult:
    family: str
    k: int
    cutoff: float
    b0: float
    r0: Optional[float]
    alpha1: float
    lambda_: float
    efficiency: float

    @property
    def rho(self):
        return RhoFunction(self.family, self.cutoff, self.k)

    def to_dict(self):
        return {"family": self.family, "k": self.k, "cutoff": self.cutoff,
                "b0": self.b0, "r0": self.r0, "alpha1": self.alpha1,
                "lambda": self.lambda_, "efficiency": self.efficiency}


def describe(f, k):
    """All Gaussian-model constants of ``f`` in dimension ``k``.

    For Huber (unbounded) ``r0`` is ``None``.
    """
    b0 = expected_rho(f, k)
    a1, lam = efficiency_constants(f, k)
    r0 = b0 / f.sup if f.bounded else None
    return CalibrationResult(f.kind, int(k), f.cutoff, b0, r0, a1, lam, 1.0 / lam)


def _solve_cutoff(fun, what):
    lo, hi = CUTOFF_BRACKET
    flo, fhi = fun(lo), fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NoBracket(f"{what} is not attainable for cut-offs in [{lo}, {hi}]")
    return optimize.bisect(fun, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps,
                           maxiter=200)


def breakdown_ratio(f, k):
    """``E[rho(||z||)] / sup rho``; equals the breakdown point of the
    initial scale when ``b0`` is set to the Gaussian expectation."""
    if not f.bounded:
        raise NotBounded("breakdown ratio needs a bounded rho")
    return expected_rho(f, k) / f.sup


def calibrate_breakdown(kind, k, r0):
    """Biweight cut-off with ``E[rho(||z||; c)] / (c^2/6) = r0``."""
    if kind != BIWEIGHT:
        raise NotBounded("breakdown calibration requires the biweight")
    if not 0.0 < r0 <= 0.5:
        raise NoBracket("r0 must lie in (0, 1/2]")
    c = _solve_cutoff(lambda c: breakdown_ratio(RhoFunction(kind, c), k) - r0,
                      f"breakdown {r0}")
    return describe(RhoFunction(kind, c, k), k)


def calibrate_efficiency(kind, k, target_eff):
    """Cut-off whose Gaussian efficiency ``1/lambda`` equals ``target_eff``."""
    if not 0.0 < target_eff < 1.0:
        raise NoBracket("target efficiency must lie in (0, 1)")

    def gap(c):
        return 1.0 / efficiency_constants(RhoFunction(kind, c), k)[1] - target_eff

    c = _solve_cutoff(gap, f"efficiency {target_eff}")
    return describe(RhoFunction(kind, c, k), k)


def calibrate_winsorize(k, w):
    """Huber cut-off with ``P(||z|| > c) = w``."""
    if not 0.0 < w < 1.0:
        raise NoBracket("winsorizing proportion must lie in (0, 1)")
    c = float(np.sqrt(stats.chi2.isf(w, k)))
    return describe(RhoFunction(HUBER, c, k), k)


def verify_mm_pair(rho0, rho1, grid_points=1000):
    """Check ``rho1(s)/a1 <= rho0(s)/a0`` on a log-spaced grid.

    Both functions must be bounded.
    """
    if not (rho0.bounded and rho1.bounded):
        raise NotBounded("the pair inequality is defined for bounded rho only")
    if grid_points < 100:
        raise ValueError("grid_points must be at least 100")
    top = 2.0 * max(rho0.cutoff, rho1.cutoff)
    s = np.concatenate([[0.0], np.geomspace(top * 1e-6, top, grid_points - 1)])
    return bool(np.all(rho1.rho(s) / rho1.sup <= rho0.rho(s) / rho0.sup + 1e-12))
