"""
Escaping a saddle with random coordinate steps
==============================================

Start very close to the saddle of a 2-d indefinite quadratic and watch how
long each run takes to leave a ball of radius 0.5.
"""

import numpy as np

from rcgd_saddle import StepsizeRange, escape_mc, make_quadratic

H = np.array([[1.0, 0.5], [0.5, -1.0]])
f = make_quadratic(H)
steps = StepsizeRange(0.1, 0.5)

report = escape_mc(f, np.zeros(2), init_radius=1e-3, n_trials=200,
                   escape_radius=0.5, T_max=50_000, seed=0, stepsizes=steps)
print("escaped:", report.fraction_escaped)

times = np.array(report.escape_times)
print("escape time quantiles (10/50/90%):", np.percentile(times, [10, 50, 90]))

###############################################################################
# The survival curve is the fraction of runs still inside the ball.

grid = np.arange(0, times.max() + 1, 5)
for t, s in zip(grid, report.survival(grid)):
    print(f"{t:4d} {s:.3f}")

###############################################################################
# A start on the stable axis of diag(1, -1) never leaves: the second
# coordinate is never touched by a non-zero update.

from rcgd_saddle.harness import escape_trial

t = escape_trial(make_quadratic(np.diag([1.0, -1.0])), np.zeros(2), [1e-3, 0.0],
                 steps, 0.5, 20_000, path_seed=0)
print("stable-axis escape time:", t)
