"""Data generation from elliptical models and Monte Carlo experiments.

Replication ``r`` of a spec with seed ``s`` draws from
``numpy.random.default_rng([s, r])`` so results do not depend on how the
replications are scheduled.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .covariance import CovarianceStructure
from .data import BalancedSample, MahalanobisContext
from .diagnostics import asymptotic_covariance, info_matrix
from .exceptions import MMError
from .initial import InitialConfig, initial_fit
from .mm import MMConfig, fit_mm, gls
from .rho import RhoFunction, calibrate_breakdown, calibrate_efficiency, calibrate_winsorize

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.05
CONSISTENCY_NS = (100, 400, 1600)


class MonteCarloFailed(MMError, RuntimeError):
    pass


# designs ----------------------------------------------------------------------

@dataclass(frozen=True)
class FixedEqual:
    """Every subject shares the ``k x q`` design ``X``."""
    X: tuple

    def draw(self, rng, n, k, q):
        X = np.asarray(self.X, dtype=float).reshape(k, q)
        return np.broadcast_to(X, (n, k, q)).copy()


@dataclass(frozen=True)
class GaussianRandom:
    """``vec(X_i) ~ N(mean, cov)`` (row-major ``k x q``); scalars broadcast."""
    mean: object = 0.0
    cov: object = 1.0

    def draw(self, rng, n, k, q):
        m = np.broadcast_to(np.asarray(self.mean, dtype=float), (k, q)).ravel()
        C = np.asarray(self.cov, dtype=float)
        if C.ndim < 2:
            z = rng.standard_normal((n, k * q)) * np.sqrt(C)
        else:
            z = rng.standard_normal((n, k * q)) @ np.linalg.cholesky(C).T
        return (m + z).reshape(n, k, q)


@dataclass(frozen=True)
class InterceptPlusNoise:
    """First column ones, the remaining ``q - 1`` columns ``N(mean, 1)``."""
    mean: float = 0.0

    def draw(self, rng, n, k, q):
        X = rng.standard_normal((n, k, q)) + self.mean
        X[:, :, 0] = 1.0
        return X


# error laws ---------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    def draw(self, rng, n, k):
        return rng.standard_normal((n, k))


@dataclass(frozen=True)
class StudentT:
    """Multivariate t with ``df`` degrees of freedom, scaled to unit covariance."""
    df: float

    def __post_init__(self):
        if not self.df > 2:
            raise ValueError("StudentT needs df > 2 for a finite covariance")

    def draw(self, rng, n, k):
        z = rng.standard_normal((n, k))
        w = rng.chisquare(self.df, size=n) / self.df
        return z / np.sqrt(w)[:, None] * np.sqrt((self.df - 2.0) / self.df)


_DESIGNS = {"FixedEqual": FixedEqual, "GaussianRandom": GaussianRandom,
            "InterceptPlusNoise": InterceptPlusNoise}
_LAWS = {"Gaussian": Gaussian, "StudentT": StudentT}


def _tagged(obj):
    d = {"type": type(obj).__name__}
    for key, val in asdict(obj).items():
        d[key] = np.asarray(val).tolist()
    return d


def _untag(d, table):
    d = dict(d)
    cls = table[d.pop("type")]
    if cls is FixedEqual:
        d["X"] = tuple(np.asarray(d["X"], dtype=float).ravel())
    return cls(**d)


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    k: int
    q: int
    beta_true: tuple
    structure: CovarianceStructure
    theta_true: tuple
    design: object = field(default_factory=InterceptPlusNoise)
    error_law: object = field(default_factory=Gaussian)
    seed: int = 0

    def __post_init__(self):
        if len(self.beta_true) != self.q:
            raise ValueError("beta_true must have q entries")
        if self.structure.k != self.k:
            raise ValueError("structure dimension does not match k")
        self.structure.build(self.theta_true)   # raises unless PDS

    @property
    def V(self):
        return self.structure.build(self.theta_true)

    def to_dict(self):
        return {"n": self.n, "k": self.k, "q": self.q, "beta_true": list(self.beta_true),
                "structure": self.structure.to_dict(), "theta_true": list(self.theta_true),
                "design": _tagged(self.design), "error_law": _tagged(self.error_law),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["n"]), int(d["k"]), int(d["q"]),
                   tuple(float(b) for b in d["beta_true"]),
                   CovarianceStructure.from_dict(d["structure"]),
                   tuple(float(t) for t in d["theta_true"]),
                   _untag(d.get("design", {"type": "InterceptPlusNoise"}), _DESIGNS),
                   _untag(d.get("error_law", {"type": "Gaussian"}), _LAWS),
                   int(d.get("seed", 0)))


def generate(spec, rep=None):
    """Draw ``y_i = X_i beta + V^{1/2} z_i``.

    ``rep=None`` uses the stream ``default_rng(spec.seed)``; otherwise the
    replication stream ``default_rng([spec.seed, rep])``.
    """
    rng = np.random.default_rng(spec.seed if rep is None else [spec.seed, rep])
    X = spec.design.draw(rng, spec.n, spec.k, spec.q)
    z = spec.error_law.draw(rng, spec.n, spec.k)
    L = np.linalg.cholesky(spec.V)
    y = X @ np.asarray(spec.beta_true, dtype=float) + z @ L.T
    return BalancedSample(y, X)


# estimator --------------------------------------------------------------------

@dataclass
class EstimatorConfig:
    """Tuning of the two-stage fit used by the harness.

    ``rho1_efficiency`` calibrates the second-stage cut-off unless
    ``rho1_cutoff`` is given; ``rho1_winsorize`` is the Huber alternative.
    ``structure`` defaults to the generating structure.
    """
    r0: float = 0.5
    rho1_family: str = "biweight"
    rho1_efficiency: Optional[float] = 0.95
    rho1_cutoff: Optional[float] = None
    rho1_winsorize: Optional[float] = None
    n_subsets: int = 50
    n_concentration: int = 10
    extra_starts: int = 0
    structure: Optional[CovarianceStructure] = None

    def rhos(self, k):
        rho0 = calibrate_breakdown("biweight", k, self.r0).rho
        if self.rho1_cutoff is not None:
            c = self.rho1_cutoff
        elif self.rho1_winsorize is not None:
            c = calibrate_winsorize(k, self.rho1_winsorize).cutoff
        else:
            c = calibrate_efficiency(self.rho1_family, k, self.rho1_efficiency).cutoff
        return rho0, RhoFunction(self.rho1_family, c)

    def to_dict(self):
        d = asdict(self)
        d["structure"] = self.structure.to_dict() if self.structure is not None else None
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("structure") is not None:
            d["structure"] = CovarianceStructure.from_dict(d["structure"])
        known = cls.__dataclass_fields__
        return cls(**{k: v for k, v in d.items() if k in known})


def _replicate(args):
    spec, config, rho0, rho1, rep = args
    sample = generate(spec, rep)
    structure = config.structure or spec.structure
    icfg = InitialConfig(seed=rep, n_subsets=config.n_subsets,
                         n_concentration=config.n_concentration, r0=config.r0)
    try:
        init = initial_fit(sample, structure, rho0, None, icfg)
        f = fit_mm(sample, init, rho1, MMConfig(extra_starts=config.extra_starts, seed=rep))
        report = asymptotic_covariance(f, sample, rho1)
    except (MMError, np.linalg.LinAlgError) as exc:
        return {"rep": rep, "error": f"{type(exc).__name__}: {exc}"}
    return {"rep": rep, "error": "", "beta1": f.beta1,
            "beta_gls": gls(sample, spec.V),
            "info": info_matrix(sample, MahalanobisContext(f.V0)),
            "se": report.standard_errors("sandwich"),
            "lambda": report.lambda_, "iterations": f.iterations}


def _run_reps(spec, config, replications, n_jobs):
    rho0, rho1 = config.rhos(spec.k)
    jobs = [(spec, config, rho0, rho1, r) for r in range(replications)]
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            rows = list(pool.map(_replicate, jobs, chunksize=max(1, replications // (4 * n_jobs))))
    else:
        rows = [_replicate(j) for j in jobs]
    rows.sort(key=lambda r: r["rep"])
    failed = [r for r in rows if r["error"]]
    for r in failed:
        log.warning("replication %d failed: %s", r["rep"], r["error"])
    if len(failed) > MAX_FAILURE_RATE * replications:
        raise MonteCarloFailed(f"{len(failed)} of {replications} replications failed")
    return [r for r in rows if not r["error"]], len(failed)


@dataclass
class MonteCarloReport:
    replications: int
    failures: int
    mean_beta_error: np.ndarray
    empirical_cov_of_sqrt_n_error: np.ndarray
    closed_form_cov: np.ndarray
    efficiency_vs_gls: float
    coverage_95: float
    consistency_slope: Optional[float] = None
    rows: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"replications": self.replications, "failures": self.failures,
                "mean_beta_error": self.mean_beta_error.tolist(),
                "empirical_cov_of_sqrt_n_error": self.empirical_cov_of_sqrt_n_error.tolist(),
                "closed_form_cov": self.closed_form_cov.tolist(),
                "efficiency_vs_gls": self.efficiency_vs_gls,
                "coverage_95": self.coverage_95,
                "consistency_slope": self.consistency_slope}

    def table(self):
        """Per-replication rows for CSV output."""
        out = []
        for r in self.rows:
            row = {"rep": r["rep"]}
            for j, b in enumerate(r["beta1"]):
                row[f"beta{j + 1}"] = b
            for j, b in enumerate(r["se"]):
                row[f"se{j + 1}"] = b
            row["iterations"] = r["iterations"]
            out.append(row)
        return out


def rmse(spec, config, replications, n_jobs=None):
    """Root mean squared ``||beta1 - beta_true||`` over replications."""
    rows, _ = _run_reps(spec, config, replications, n_jobs)
    err = np.array([r["beta1"] for r in rows]) - np.asarray(spec.beta_true)
    return float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))


def consistency_slope(spec, config, replications, ns=CONSISTENCY_NS, n_jobs=None):
    """Least-squares slope of ``log RMSE`` on ``log n``; ``-1/2`` at the root-n rate."""
    r = [rmse(replace(spec, n=int(n)), config, replications, n_jobs) for n in ns]
    return float(np.polyfit(np.log(ns), np.log(r), 1)[0])


def run_monte_carlo(spec, config, replications, consistency=False, n_jobs=None):
    """Repeat generate + fit ``replications`` times.

    Coverage is the fraction of (replication, coordinate) pairs whose 95%
    Wald interval from the sandwich covariance contains the truth.
    ``efficiency_vs_gls`` is ``tr cov(GLS) / tr cov(MM)`` on the same
    replicates, GLS using the true covariance.  The consistency slope is
    only computed when ``consistency`` is set, since it triples the cost.
    """
    if replications < 1:
        raise ValueError("replications must be positive")
    rows, failures = _run_reps(spec, config, replications, n_jobs)
    beta = np.asarray(spec.beta_true, dtype=float)
    b1 = np.array([r["beta1"] for r in rows])
    bg = np.array([r["beta_gls"] for r in rows])
    se = np.array([r["se"] for r in rows])
    err = b1 - beta
    n = spec.n
    emp = np.cov(np.sqrt(n) * err, rowvar=False, ddof=1).reshape(spec.q, spec.q)
    info = np.mean([r["info"] for r in rows], axis=0)
    closed = rows[0]["lambda"] * np.linalg.inv(info)
    cov_gls = np.cov(bg, rowvar=False).reshape(spec.q, spec.q)
    cov_mm = np.cov(b1, rowvar=False).reshape(spec.q, spec.q)
    eff = float(np.trace(cov_gls) / np.trace(cov_mm)) if len(rows) > 1 else float("nan")
    cover = float(np.mean(np.abs(err) <= 1.959963984540054 * se))
    slope = None
    if consistency:
        slope = consistency_slope(spec, config, replications, n_jobs=n_jobs)
    return MonteCarloReport(len(rows), failures, err.mean(axis=0), emp, closed, eff,
                            cover, slope, rows)
