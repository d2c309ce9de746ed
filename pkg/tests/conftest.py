import numpy as np
import pytest

from mmstruct.covariance import CovarianceStructure
from mmstruct.data import BalancedSample
from mmstruct.rho import calibrate_breakdown, calibrate_efficiency

ACCEPTANCE_LINES = {}


def gaussian_sample(n, k, q, V, beta=None, seed=0, xmean=0.0, rng=None):
    """Intercept plus ``N(xmean, 1)`` covariates, Gaussian errors with covariance ``V``."""
    rng = np.random.default_rng(seed) if rng is None else rng
    X = rng.standard_normal((n, k, q)) + xmean
    X[:, :, 0] = 1.0
    beta = np.arange(1.0, q + 1.0) if beta is None else np.asarray(beta, dtype=float)
    y = X @ beta + rng.standard_normal((n, k)) @ np.linalg.cholesky(V).T
    return BalancedSample(y, X)


def random_structure(rng, k):
    """A random structure and parameter of dimension ``k``."""
    kinds = ["mixed", "unstructured", "toeplitz"] + (["ar1"] if k >= 2 else [])
    kind = kinds[rng.integers(len(kinds))]
    if kind == "mixed":
        # a random intercept is confounded with sigma0^2 when k = 1
        Z = ([np.ones((k, 1))] if k >= 2 else []) + ([rng.standard_normal((k, 1))] if k >= 3 else [])
        st = CovarianceStructure.mixed(Z, k)
        theta = np.concatenate([[rng.uniform(0.5, 2.0)], rng.uniform(0.0, 1.0, len(Z))])
    elif kind == "unstructured":
        st = CovarianceStructure.unstructured(k)
        A = rng.standard_normal((k, k))
        theta = (A @ A.T + k * np.eye(k))[np.triu_indices(k)]
    elif kind == "toeplitz":
        st = CovarianceStructure.toeplitz(k)
        theta = np.array([2.0] + list(rng.uniform(-0.5, 0.5, k - 1)))
    else:
        st = CovarianceStructure.ar1(k)
        theta = np.array([rng.uniform(0.5, 2.0), rng.uniform(-0.8, 0.8)])
    return st, theta


@pytest.fixture(scope="session")
def rho_pair_k2():
    return (calibrate_breakdown("biweight", 2, 0.5).rho,
            calibrate_efficiency("biweight", 2, 0.95).rho)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
