"""MM-estimation of regression parameters in balanced linear models with
structured covariance matrices."""
from .covariance import CovarianceStructure, build_V, fit_params_from_matrix, scale_params
from .data import BalancedSample, MahalanobisContext, kappa, load_csv, write_csv
from .diagnostics import (AsymptoticReport, asymptotic_covariance, empirical_influence,
                          influence_function)
from .exceptions import *  # noqa: F401,F403
from .initial import InitialConfig, InitialFit, initial_fit, mscale
from .mm import MMConfig, MMFit, existence_guard, fit, fit_mm, gls
from .rho import (CalibrationResult, RhoFunction, alpha1, calibrate_breakdown,
                  calibrate_efficiency, calibrate_winsorize, efficiency_constants,
                  expected_radial, expected_rho, verify_mm_pair)
from .robustness import (BreakdownBound, ContaminationScenario, ExactFitPoint, LeveragePoint,
                         SweepConfig, YShift, breakdown_bound, contaminate, contamination_sweep)
from .simulation import (EstimatorConfig, FixedEqual, Gaussian, GaussianRandom, GeneratorSpec,
                         InterceptPlusNoise, MonteCarloReport, StudentT, generate,
                         run_monte_carlo)

__version__ = "0.1.0"
