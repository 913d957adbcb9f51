import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcgd_saddle.errors import AssumptionViolation
from rcgd_saddle.objective import make_coupled_trig, make_quadratic
from rcgd_saddle.rcgd import (
    DIVERGENCE,
    ESCAPE,
    GRAD_TOL,
    MAX_ITER,
    StopRule,
    descent_violations,
    read_trajectory_binary,
    replay,
    run,
    step,
    two_sided_norm_check,
    write_trajectory_binary,
    write_trajectory_csv,
)
from rcgd_saddle.sample_path import SamplePath, StepsizeRange

R = StepsizeRange(0.1, 0.5)
SADDLE = make_quadratic([[1.0, 0.5], [0.5, -1.0]])
TRIG = make_coupled_trig(3, 0.3)
TRIG_R = StepsizeRange(0.05, 0.4)


def test_single_step_touches_one_coordinate():
    x = np.array([0.2, -0.4])
    y = step(SADDLE, x, (1, 0.3))
    assert y[0] == x[0]
    assert y[1] == x[1] - 0.3 * (0.5 * 0.2 + 0.4)


def test_scalar_recursion_oracle():
    # d = 1: x_{t+1} = (1 - a_t h) x_t, computed independently as a running product
    h = 0.8
    f = make_quadratic([[h]])
    traj = run(f, [1.5], SamplePath(4, 1, R), StopRule(200))
    prod = 1.5 * np.cumprod(1 - traj.alphas * h)
    np.testing.assert_allclose(traj.points[1:, 0], prod, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_trig_descent_is_monotone(seed, x0):
    traj = run(TRIG, np.array(x0), SamplePath(seed, 3, TRIG_R), StopRule(500))
    assert descent_violations(TRIG, traj) == []


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_quadratic_two_sided_norm_bound(seed, x0):
    traj = run(SADDLE, np.array(x0), SamplePath(seed, 2, R), StopRule(300))
    assert two_sided_norm_check(SADDLE, traj)


def test_replay_is_bit_exact():
    traj = run(TRIG, [1.0, -2.0, 0.5], SamplePath(9, 3, TRIG_R), StopRule(10_000, 1e-8))
    pts = replay(TRIG, traj.x0, traj.coords, traj.alphas)
    np.testing.assert_array_equal(pts, traj.points)


def test_alpha_bound_enforced_unless_overridden():
    f = make_quadratic([[3.0]])
    with pytest.raises(AssumptionViolation):
        run(f, [1.0], SamplePath(0, 1, R), StopRule(5))
    run(f, [1.0], SamplePath(0, 1, R), StopRule(5), override=True)


def test_stop_rules():
    p = SamplePath(1, 2, R)
    assert run(SADDLE, [0.0, 0.0], p, StopRule(10, 1e-8)).terminated_by == GRAD_TOL
    assert run(SADDLE, [0.0, 0.0], p, StopRule(10, 1e-8)).n_steps == 0
    assert run(SADDLE, [1.0, 1.0], p, StopRule(0)).n_steps == 0
    r = run(SADDLE, [1e-3, 1e-3], p, StopRule(10**6, 0.0, np.zeros(2), 0.5))
    assert r.terminated_by == ESCAPE and np.linalg.norm(r.x_final) > 0.5
    assert np.linalg.norm(r.points[-2]) <= 0.5
    assert run(SADDLE, [1e-3, 1e-3], p, StopRule(7)).terminated_by == MAX_ITER
    assert run(SADDLE, [1e-3, 1e-3], p, StopRule(10**6), record="none").terminated_by == DIVERGENCE


def test_stable_axis_stays_on_axis():
    f = make_quadratic(np.diag([1.0, -1.0]))
    traj = run(f, [1e-3, 0.0], SamplePath(2, 2, R), StopRule(5000))
    assert np.all(traj.points[:, 1] == 0.0)


def test_record_modes_keep_draws():
    p = SamplePath(3, 3, TRIG_R)
    full = run(TRIG, [1.0, 1.0, 1.0], p, StopRule(50))
    none = run(TRIG, [1.0, 1.0, 1.0], p, StopRule(50), record="none")
    np.testing.assert_array_equal(full.x_final, none.x_final)
    np.testing.assert_array_equal(full.coords, none.coords)
    assert none.points is None and full.points.shape == (51, 3)
    assert [d.coord for d in full.steps_used] == list(full.coords)


def test_trajectory_files_roundtrip():
    traj = run(TRIG, [0.5, 0.5, -1.0], SamplePath(0, 3, TRIG_R), StopRule(40))
    buf = io.BytesIO()
    write_trajectory_binary(traj, buf)
    buf.seek(0)
    pts, fs, gs = read_trajectory_binary(buf)
    np.testing.assert_array_equal(pts, traj.points)
    np.testing.assert_array_equal(fs, traj.f_values)
    np.testing.assert_array_equal(gs, traj.grad_norms)
    text = io.StringIO()
    write_trajectory_csv(traj, text)
    rows = text.getvalue().splitlines()
    assert rows[0] == "t,x0,x1,x2,f,grad_norm" and len(rows) == 42
    assert float(rows[-1].split(",")[1]) == traj.points[-1, 0]


def test_bad_magic_rejected():
    with pytest.raises(ValueError, match="magic"):
        read_trajectory_binary(io.BytesIO(b"XXXX" + bytes(16)))
