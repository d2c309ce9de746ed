"""
Calibrating the loss functions
==============================

The initial stage needs a bounded rho tuned for a breakdown point.  The
final stage uses a second rho tuned for Gaussian efficiency.  Both depend
on the response dimension ``k``.
"""

from mmstruct import calibrate_breakdown, calibrate_efficiency, calibrate_winsorize, verify_mm_pair

# biweight cutoffs for a 50% breakdown point grow with the dimension
for k in (1, 2, 5, 10):
    c = calibrate_breakdown("biweight", k, 0.5)
    print(f"k={k:2d}  breakdown cutoff {c.cutoff:8.4f}  b0 {c.b0:8.4f}")

# the efficiency stage: lambda is the variance inflation over GLS
k = 4
for eff in (0.80, 0.90, 0.95):
    c = calibrate_efficiency("biweight", k, eff)
    print(f"efficiency {eff:.2f}  cutoff {c.cutoff:7.4f}  lambda {c.lambda_:.4f}")

# Huber cutoff from a target winsorized fraction; Huber has no breakdown tuning
h = calibrate_winsorize(k, 0.1)
print(f"Huber winsorizing 10%: cutoff {h.cutoff:.4f}, efficiency {h.efficiency:.4f}")

# the pair is valid when rho1 <= rho0 pointwise after normalising to sup 1
rho0 = calibrate_breakdown("biweight", k, 0.5).rho
rho1 = calibrate_efficiency("biweight", k, 0.95).rho
print("valid MM pair:", verify_mm_pair(rho0, rho1))
