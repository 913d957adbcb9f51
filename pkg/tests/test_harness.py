import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcgd_saddle.errors import AssumptionViolation
from rcgd_saddle.harness import (
    classify_convergence,
    escape_mc,
    escape_trial,
    gs_window_stats,
    surjection_probability,
    verify_growth,
    verify_linear_decay,
)
from rcgd_saddle.objective import LOCAL_MIN, STRICT_SADDLE, make_quadratic
from rcgd_saddle.rcgd import StopRule
from rcgd_saddle.sample_path import RecordedPath, SamplePath, StepsizeRange

R = StepsizeRange(0.1, 0.5)
H2 = np.array([[1.0, 0.5], [0.5, -1.0]])
DIAG = np.diag([1.0, -1.0])


@pytest.mark.parametrize("d, m", [(1, 1), (1, 5), (2, 2), (2, 3), (3, 3), (3, 5), (4, 6)])
def test_surjection_probability_enumeration(d, m):
    hits = sum(len(set(w)) == d for w in itertools.product(range(d), repeat=m))
    assert surjection_probability(d, m) == Fraction(hits, d**m)


def test_surjection_probability_exact_values():
    assert surjection_probability(2, 2) == Fraction(1, 2)
    assert surjection_probability(3, 2) == 0
    assert surjection_probability(12, 12) == Fraction(math.factorial(12), 12**12)


def test_window_coverage_d2_m2():
    st_ = gs_window_stats(SamplePath(0, 2, R), 2, 2, 100_000)
    assert st_.exact_mean == 0.5
    assert abs(st_.mean_indicator - 0.5) < 3 * st_.std_error
    assert set(np.unique(st_.indicators)) <= {0, 1}


def test_window_coverage_edge_cases():
    assert gs_window_stats(SamplePath(0, 1, R), 1, 3, 100).indicators.all()
    path = RecordedPath([(1, 0.2)] * 6, 2, R)
    assert not gs_window_stats(path, 2, 2, 3).indicators.any()
    with pytest.raises(ValueError):
        gs_window_stats(SamplePath(0, 3, R), 3, 2, 10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 4), st.integers(0, 4))
def test_window_indicator_definition(seed, d, extra):
    m = d + extra
    path = SamplePath(seed, d, R)
    stats = gs_window_stats(path, d, m, 20)
    coords, _ = path.draws(0, 20 * m)
    ref = [int(len(set(coords[k * m:(k + 1) * m])) == d) for k in range(20)]
    assert list(stats.indicators) == ref


def test_escape_all_trials():
    rep = escape_mc(make_quadratic(H2), np.zeros(2), 1e-3, 50, 0.5, 50_000, 1, R)
    assert rep.fraction_escaped == 1.0
    assert rep.fraction_escaped == sum(map(math.isfinite, rep.escape_times)) / rep.n_trials
    grid = np.arange(0, max(rep.escape_times) + 2)
    surv = rep.survival(grid)
    assert np.all(np.diff(surv) <= 0) and surv[0] == 1.0 and surv[-1] == 0.0


def test_escape_reproducible():
    a = escape_mc(make_quadratic(H2), np.zeros(2), 1e-3, 10, 0.5, 50_000, 4, R)
    b = escape_mc(make_quadratic(H2), np.zeros(2), 1e-3, 10, 0.5, 50_000, 4, R)
    assert a.to_dict() == b.to_dict()


def test_escape_stable_axis_never_escapes():
    t = escape_trial(make_quadratic(DIAG), np.zeros(2), [1e-3, 0.0], R, 0.5, 20_000, 0)
    assert math.isinf(t)


def test_escape_preconditions():
    q = make_quadratic(H2)
    with pytest.raises(ValueError):
        escape_trial(q, np.zeros(2), np.zeros(2), R, 0.5, 10, 0)
    with pytest.raises(ValueError):
        escape_mc(q, np.zeros(2), 0.6, 5, 0.5, 10, 0, R)
    with pytest.raises(AssumptionViolation):
        escape_mc(make_quadratic(np.eye(2)), np.zeros(2), 1e-3, 5, 0.5, 10, 0, R)


def test_escape_empty_report():
    rep = escape_mc(make_quadratic(H2), np.zeros(2), 1e-3, 0, 0.5, 10, 0, R)
    assert rep.n_trials == 0 and rep.escape_times == [] and rep.fraction_escaped == 0.0


def test_classify_convex():
    rep = classify_convergence(make_quadratic(np.eye(2)), ([-3, -3], [3, 3]), 20,
                               StopRule(100_000, 1e-8), 0, R)
    assert rep.counts[LOCAL_MIN] == 20
    for t in rep.trials:
        assert t["status"] == "converged" and t["grad_norm"] <= 1e-8
        assert t["matched"] == 0
        assert np.linalg.norm(t["limit"]) < 1e-7


def test_classify_stable_axis_flagged():
    rep = classify_convergence(make_quadratic(DIAG), ([-1, -1], [1, 1]), 0,
                               StopRule(100_000, 1e-8), 0, R, inits=[[1.0, 0.0]])
    (t,) = rep.trials
    assert t["kind"] == STRICT_SADDLE
    assert "fails" in t["flag"]


def test_classify_unconverged_reported():
    rep = classify_convergence(make_quadratic(np.eye(2)), ([-3, -3], [3, 3]), 5,
                               StopRule(3, 1e-8), 0, R)
    assert rep.counts["unconverged"] == 5
    assert all("kind" not in t for t in rep.trials)
    assert sum(rep.counts.values()) == rep.n_trials


def test_linear_decay_diagonal():
    rep = verify_linear_decay(DIAG, R, 2, 2000, 0)
    assert rep.c == pytest.approx(6.25e-4)
    assert rep.fraction == 1.0 and rep.witness_fraction == 1.0
    assert rep.n_rejected_windows > 0


def test_growth_bound():
    rep = verify_growth(DIAG, R, [0.0, 1.0], 100, 2, 0)
    assert bool(rep) and rep.bound_holds
    assert rep.K is not None and rep.K <= 100
    assert np.all(rep.norms >= rep.lower_bounds * (1 - 1e-12))


def test_growth_vacuous_and_precondition():
    assert verify_growth(DIAG, R, [0.0, 1.0], 0, 2, 0)
    with pytest.raises(ValueError):
        verify_growth(DIAG, R, [1.0, 0.0], 10, 2, 0)
