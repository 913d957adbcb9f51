"""
Lyapunov spectrum of the linearized iteration
=============================================

Near a critical point the iteration is a product of random matrices
I - a e_i e_i^T H. Its growth rates decide whether the saddle repels.
"""

import math

import numpy as np

from rcgd_saddle import Cocycle, SamplePath, StepsizeRange, lyapunov_spectrum

steps = StepsizeRange(0.1, 0.5)

###############################################################################
# Scalar case: the exponent is the mean of log|1 - a h| over the stepsize range,
# which has a closed form through (1 + a)(log(1 + a) - 1).

def closed_form(h):
    F = lambda a: -(1 - a * h) * (math.log(abs(1 - a * h)) - 1) / h
    return (F(0.5) - F(0.1)) / 0.4

for h in (-1.0, 1.0):
    spec = lyapunov_spectrum(Cocycle([[h]], SamplePath(0, 1, steps)), 10**6)
    print(f"h={h:+.0f}: estimate {spec.top:.5f} +- {spec.std_errors[0]:.1e}, exact {closed_form(h):.5f}")

###############################################################################
# A coupled saddle. One exponent is positive although only one eigenvalue of H
# is negative, and the rates are not eigenvalues of any single step.

H = np.array([[1.0, 0.5], [0.5, -1.0]])
spec = lyapunov_spectrum(Cocycle(H, SamplePath(0, 2, steps)), 10**6)
print("exponents:", spec.exponents, "SE:", spec.std_errors, "d_plus:", spec.d_plus)
