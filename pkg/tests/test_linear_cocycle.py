import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from rcgd_saddle.errors import AmbiguousSubspace, NumericalError, SingularStep
from rcgd_saddle.linear_cocycle import (
    Cocycle,
    apply_steps,
    graded_svd,
    lyapunov_spectrum,
    product_factors,
    singular_log_rates,
    step_inverse,
    step_matrix,
    transition,
    unstable_projector,
)
from rcgd_saddle.sample_path import SamplePath, StepsizeRange

R = StepsizeRange(0.1, 0.5)
H2 = np.array([[1.0, 0.5], [0.5, -1.0]])


def expected_log(h, lo=0.1, hi=0.5):
    val, _ = integrate.quad(lambda a: math.log(abs(1 - a * h)), lo, hi)
    return val / (hi - lo)


def random_symmetric(rng, d):
    A = rng.standard_normal((d, d))
    return (A + A.T) / 2


def test_step_matrix_is_rank_one_update():
    i, a = 1, 0.3
    e = np.eye(2)[:, [i]]
    np.testing.assert_allclose(step_matrix(H2, (i, a)), np.eye(2) - a * e @ e.T @ H2)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 6), st.floats(0.01, 0.95))
def test_sherman_morrison_inverse(seed, d, frac):
    rng = np.random.default_rng(seed)
    H = random_symmetric(rng, d)
    i = int(rng.integers(d))
    a = frac / max(abs(H[i, i]), 1e-3)
    if a * abs(H[i, i]) >= 1:
        return
    Ainv = step_inverse(H, (i, a))
    np.testing.assert_allclose(Ainv, np.linalg.inv(step_matrix(H, (i, a))), rtol=1e-9, atol=1e-9)


def test_singular_step_detected():
    with pytest.raises(SingularStep):
        step_inverse(np.diag([2.0, 1.0]), (0, 0.5))


def test_apply_steps_equals_dense_product():
    rng = np.random.default_rng(0)
    H = random_symmetric(rng, 4)
    coords = rng.integers(0, 4, 30)
    alphas = rng.uniform(0.1, 0.2, 30)
    P = np.eye(4)
    for i, a in zip(coords, alphas):
        P = step_matrix(H, (i, a)) @ P
    np.testing.assert_allclose(apply_steps(H, coords, alphas, np.eye(4)), P, rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 40), st.integers(0, 40))
def test_cocycle_composition_bit_exact(seed, s, t):
    c = Cocycle(H2, SamplePath(seed, 2, R))
    left = transition(c, 0, s + t)
    right = transition(c.shift(s), 0, t, initial=transition(c, 0, s))
    assert np.array_equal(left, right)


def test_cocycle_rejects_mismatched_dimension():
    with pytest.raises(ValueError):
        Cocycle(np.eye(3), SamplePath(0, 2, R))


@pytest.mark.parametrize("h", [-1.0, 1.0, -0.3, 1.8])
def test_scalar_exponent_matches_quadrature(h):
    spec = lyapunov_spectrum(Cocycle([[h]], SamplePath(5, 1, R)), 400_000)
    ref = expected_log(h)
    assert abs(spec.top - ref) < 4 * spec.std_errors[0] + 1e-12
    assert spec.d_plus == (1 if ref > 0 else 0)


def test_diagonal_exponents_decouple():
    spec = lyapunov_spectrum(Cocycle(np.diag([2.0, -0.5, 1.0]), SamplePath(1, 3, StepsizeRange(0.1, 0.45))), 600_000)
    ref = sorted((expected_log(h, 0.1, 0.45) / 3 for h in (2.0, -0.5, 1.0)), reverse=True)
    np.testing.assert_allclose(spec.column_rates, ref, atol=5 * spec.column_std_errors.max())
    assert spec.d_plus == 1


def test_repeated_exponents_are_merged():
    spec = lyapunov_spectrum(Cocycle(-np.eye(2), SamplePath(2, 2, R)), 400_000)
    assert list(spec.multiplicities) == [2]
    assert spec.d_plus == 2
    assert math.isinf(spec.gap)


def test_spectrum_sum_equals_mean_log_determinant():
    rng = np.random.default_rng(3)
    H = random_symmetric(rng, 3)
    H *= 0.9 / np.abs(H).max()
    c = Cocycle(H, SamplePath(4, 3, R))
    spec = lyapunov_spectrum(c, 300_000)
    # det(I - a e_i e_i^T H) = 1 - a H_ii, an independent route to the exponent sum
    ref = np.mean([expected_log(H[i, i]) for i in range(3)])
    assert abs(spec.column_rates.sum() - ref) < 5 * spec.column_std_errors.sum()


def test_horizon_must_cover_ten_periods():
    with pytest.raises(ValueError):
        lyapunov_spectrum(Cocycle(H2, SamplePath(0, 2, R)), 99, qr_period=10)


def test_overflow_reported_as_numerical_error():
    with pytest.raises(NumericalError):
        lyapunov_spectrum(Cocycle([[-1.0]], SamplePath(0, 1, R)), 100_000, qr_period=10_000)


def _mp_svd(c, S):
    mpmath.mp.dps = 300
    d = c.dim
    coords, alphas = c.path.draws(0, S)
    P = mpmath.eye(d)
    Hm = mpmath.matrix(c.H.tolist())
    for i, a in zip(coords, alphas):
        A = mpmath.eye(d)
        for j in range(d):
            A[int(i), j] -= mpmath.mpf(float(a)) * Hm[int(i), j]
        P = A * P
    _, s, Vt = mpmath.svd_r(P)
    return np.array([float(mpmath.log(x)) for x in s]), np.array(Vt.tolist(), dtype=float).T


@pytest.mark.parametrize("S", [100, 400, 1000])
def test_graded_svd_matches_high_precision(S):
    H = np.array([[1.0, 0.5, 0.3], [0.5, -1.0, 0.4], [0.3, 0.4, 0.5]])
    c = Cocycle(H, SamplePath(7, 3, R))
    _, Rf, scale = product_factors(c, 0, S)
    log_s, V = graded_svd(Rf)
    ref_s, ref_V = _mp_svd(c, S)
    order = np.argsort(-ref_s)
    np.testing.assert_allclose(log_s + scale, ref_s[order], rtol=0, atol=1e-9 * S)
    for j in range(3):
        assert abs(abs(V[:, j] @ ref_V[:, order[j]]) - 1) < 1e-9


def test_projector_properties():
    c = Cocycle(H2, SamplePath(3, 2, R))
    proj = unstable_projector(c, 0, 400, 1)
    P = proj.P_plus
    np.testing.assert_allclose(P @ P, P, atol=1e-12)
    np.testing.assert_allclose(P, P.T, atol=1e-15)
    assert round(np.trace(P)) == 1
    np.testing.assert_allclose(proj.V_plus.T @ proj.V_minus, 0, atol=1e-12)


def test_projector_converges_with_horizon():
    c = Cocycle(H2, SamplePath(3, 2, R))
    Ps = [unstable_projector(c, 0, S, 1).P_plus for S in (100, 200, 400)]
    assert np.linalg.norm(Ps[1] - Ps[2]) < 1e-8


def test_singular_rates_approach_exponents():
    c = Cocycle(H2, SamplePath(0, 2, R))
    spec = lyapunov_spectrum(c, 400_000)
    # S * (lambda_1 - lambda_2) must stay well below the double exponent range
    rates = singular_log_rates(c, 0, 1500)
    np.testing.assert_allclose(rates, spec.column_rates, atol=0.02)


def test_ambiguous_cut_detected():
    c = Cocycle(np.zeros((2, 2)), SamplePath(0, 2, R))
    with pytest.raises(AmbiguousSubspace):
        unstable_projector(c, 0, 50, 1)


def test_underflow_beyond_exponent_range():
    c = Cocycle(H2, SamplePath(0, 2, R))
    with pytest.raises(NumericalError):
        singular_log_rates(c, 0, 5000)
