"""
Influence of a single observation
=================================

For a redescending rho1 the influence of a point is bounded in the
response and vanishes far away.  It is not bounded in the design: a
leverage point with a moderate residual can pull the estimate arbitrarily.
"""

import numpy as np

from mmstruct import (CovarianceStructure, InitialConfig, asymptotic_covariance,
                      calibrate_breakdown, calibrate_efficiency, empirical_influence, fit,
                      influence_function)
from mmstruct.simulation import GeneratorSpec, InterceptPlusNoise, generate

k = 2
structure = CovarianceStructure.unstructured(k)
spec = GeneratorSpec(1000, k, 2, (0.5, -1.0), structure, (1.0, 0.3, 1.0),
                     InterceptPlusNoise(1.0), seed=3)
sample = generate(spec)
result = fit(sample, structure, calibrate_breakdown("biweight", k, 0.5).rho,
             calibrate_efficiency("biweight", k, 0.95).rho, InitialConfig(seed=0, n_subsets=50))
rep = asymptotic_covariance(result, sample)

X0 = sample.X[0]
direction = np.array([1.0, 0.5])
print("residual size   |IF|")
for t in (0.5, 1, 2, 4, 8, 16):
    y0 = X0 @ result.beta1 + t * direction
    print(f"{t:13.1f}   {np.linalg.norm(influence_function(result, rep, y0, X0)):.4f}")

# the analytic curve agrees with a small contamination refit
y0 = X0 @ result.beta1 + 1.5 * direction
print("analytic IF :", np.round(influence_function(result, rep, y0, X0), 4))
print("refit IF    :", np.round(empirical_influence(result, sample, y0, X0), 4))

print("design scale   |IF|  (residual held fixed)")
for s in (1, 10, 100):
    Xs = s * X0
    y0 = Xs @ result.beta1 + np.array([0.5, -0.2])
    print(f"{s:12d}   {np.linalg.norm(influence_function(result, rep, y0, Xs)):.2f}")
