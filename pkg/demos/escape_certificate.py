"""
A finite-horizon escape certificate
===================================

``certify`` estimates the spectrum, checks that no coordinate vector is
annihilated by the unstable projector, and assembles the block length S,
horizon T = L + S and the guaranteed amplification over T steps.
"""

import math

import numpy as np

from rcgd_saddle import StepsizeRange, certify, make_coupled_trig, make_quadratic

cert = certify(make_quadratic([[1.0, 0.5], [0.5, -1.0]]), np.zeros(2), StepsizeRange(0.1, 0.5))
for name in ("lambda_plus", "gamma", "eps_star", "eps", "delta_proj", "L", "S", "S_star", "T"):
    print(f"{name:>12s} = {getattr(cert, name)}")
print(f"amplification = exp({cert.amplification_log:.2f})")

for row in cert.inequalities():
    print(f"  [{'ok' if row['holds'] else 'FAIL'}] {row['name']}: {row['lhs']:.4g} vs {row['rhs']:.4g}")

###############################################################################
# The same for a saddle of the coupled-cosine test function. Its Hessian
# bound is 1 + 4|kappa|, so the stepsizes have to stay below 1/2.2.

f = make_coupled_trig(2, 0.3)
cert = certify(f, np.array([0.0, math.pi]), StepsizeRange(0.05, 0.4), sigma_samples=2000)
print("trig saddle: T =", cert.T, " log amplification =", round(cert.amplification_log, 2))
