"""Linearization at a critical point: step matrices I - a e_i e_i^T H, their
products along a sample path, Lyapunov spectra and finite-horizon unstable
projectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import AmbiguousSubspace, NumericalError, SingularStep
from .sample_path import CoordinateStepDraw

_CHUNK_BLOCKS = 8192


@dataclass(frozen=True)
class Cocycle:
    H: np.ndarray
    path: object

    def __post_init__(self):
        H = np.array(self.H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("H must be square")
        if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise ValueError("H must be symmetric")
        if H.shape[0] != self.path.dim:
            raise ValueError(f"H is {H.shape[0]}x{H.shape[0]} but path has dim {self.path.dim}")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def dim(self):
        return self.H.shape[0]

    @property
    def range(self):
        return self.path.range

    def invertible(self):
        """alpha_max < 1/max_i |H_ii|, which makes every step matrix invertible."""
        return self.range.alpha_max * np.abs(np.diag(self.H)).max() < 1.0

    def shift(self, s):
        return Cocycle(self.H, self.path.shift(s))


def step_matrix(H, draw):
    i, alpha = draw
    H = np.asarray(H, dtype=float)
    A = np.eye(H.shape[0])
    A[i] -= alpha * H[i]
    return A


def step_inverse(H, draw):
    """Sherman-Morrison inverse I + a e_i e_i^T H / (1 - a H_ii)."""
    i, alpha = draw
    H = np.asarray(H, dtype=float)
    denom = 1.0 - alpha * H[i, i]
    if not alpha * abs(H[i, i]) < 1.0:
        raise SingularStep(f"alpha*|H_ii| = {alpha * abs(H[i, i]):.6g} >= 1 at coordinate {i}")
    Ainv = np.eye(H.shape[0])
    Ainv[i] += alpha * H[i] / denom
    return Ainv


def apply_steps(H, coords, alphas, X):
    """Left-multiply X by the step matrices in order (row update, no dense product)."""
    X = np.array(X, dtype=float)
    for i, a in zip(coords, alphas):
        i = int(i)
        X[i] = X[i] - float(a) * (H[i] @ X)
    return X


def transition(cocycle, t0, t1, initial=None):
    """Phi over draws t0 .. t1-1 applied to ``initial`` (identity by default).

    Later steps multiply from the left. Composition is exact in floating point
    when expressed through ``initial``:
    ``transition(c, 0, s + t) == transition(c.shift(s), 0, t, transition(c, 0, s))``.
    """
    if t1 < t0:
        raise ValueError("need t0 <= t1")
    X = np.eye(cocycle.dim) if initial is None else initial
    coords, alphas = cocycle.path.draws(t0, t1 - t0)
    return apply_steps(cocycle.H, coords, alphas, X)


@numba.njit(cache=True)
def _qr_block_logs(H, coords, alphas, Q, qr_period, out):
    d = Q.shape[0]
    nb = coords.shape[0] // qr_period
    col = np.empty(d)
    for b in range(nb):
        for s in range(qr_period):
            t = b * qr_period + s
            i = coords[t]
            a = alphas[t]
            for c in range(d):
                acc = 0.0
                for k in range(d):
                    acc += H[i, k] * Q[k, c]
                col[c] = acc
            for c in range(d):
                Q[i, c] -= a * col[c]
        # modified Gram-Schmidt with one reorthogonalization pass
        for j in range(d):
            for _ in range(2):
                for k in range(j):
                    r = 0.0
                    for m in range(d):
                        r += Q[m, k] * Q[m, j]
                    for m in range(d):
                        Q[m, j] -= r * Q[m, k]
            nrm = 0.0
            for m in range(d):
                nrm += Q[m, j] * Q[m, j]
            nrm = math.sqrt(nrm)
            out[b, j] = math.log(nrm)
            for m in range(d):
                Q[m, j] /= nrm


@dataclass
class LyapunovSpectrum:
    exponents: np.ndarray
    multiplicities: np.ndarray
    std_errors: np.ndarray
    horizon: int
    qr_period: int
    d_plus: int
    gap: float
    index_map: np.ndarray
    column_rates: np.ndarray
    column_std_errors: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def top(self):
        return float(self.exponents[0])

    def to_dict(self):
        return {
            "exponents": self.exponents.tolist(),
            "multiplicities": self.multiplicities.tolist(),
            "std_errors": self.std_errors.tolist(),
            "horizon": self.horizon,
            "qr_period": self.qr_period,
            "d_plus": self.d_plus,
            "gap": None if math.isinf(self.gap) else self.gap,
            "index_map": self.index_map.tolist(),
            "column_rates": self.column_rates.tolist(),
            "column_std_errors": self.column_std_errors.tolist(),
            **self.meta,
        }


def cluster_exponents(rates, ses, merge_factor=10.0):
    """Group sorted rates whose neighbours lie within ``merge_factor`` standard errors."""
    order = np.argsort(-rates, kind="stable")
    rates, ses = rates[order], ses[order]
    groups = [[0]]
    for j in range(1, len(rates)):
        prev = groups[-1][-1]
        if abs(rates[prev] - rates[j]) <= merge_factor * max(ses[prev], ses[j]):
            groups[-1].append(j)
        else:
            groups.append([j])
    values = np.array([rates[g].mean() for g in groups])
    errs = np.array([ses[g].max() for g in groups])
    mult = np.array([len(g) for g in groups])
    return values, errs, mult, rates, ses


def lyapunov_spectrum(cocycle, T, qr_period=10, n_batches=50, merge_factor=10.0,
                      sign_factor=3.0, d_plus=None) -> LyapunovSpectrum:
    """Time-averaged log|R_jj| from periodic QR re-orthonormalization over T steps.

    Standard errors come from ``n_batches`` contiguous batch means. ``d_plus``
    counts exponents (with multiplicity) above ``sign_factor`` standard errors
    unless given explicitly.
    """
    if qr_period < 1:
        raise ValueError("qr_period must be >= 1")
    if T < 10 * qr_period:
        raise ValueError(f"need T >= 10*qr_period, got T={T}, qr_period={qr_period}")
    d = cocycle.dim
    n_blocks = T // qr_period
    horizon = n_blocks * qr_period
    H = np.ascontiguousarray(cocycle.H)
    Q = np.eye(d)
    logs = np.empty((n_blocks, d))
    b0 = 0
    while b0 < n_blocks:
        nb = min(_CHUNK_BLOCKS, n_blocks - b0)
        coords, alphas = cocycle.path.draws(b0 * qr_period, nb * qr_period)
        _qr_block_logs(H, coords, alphas, Q, qr_period, logs[b0 : b0 + nb])
        b0 += nb
    if not np.all(np.isfinite(logs)):
        raise NumericalError("non-finite QR diagonal; try a smaller qr_period")

    n_batches = max(2, min(n_batches, n_blocks))
    rates = logs.sum(axis=0) / horizon
    batch_rates = np.array(
        [b.sum(axis=0) / (len(b) * qr_period) for b in np.array_split(logs, n_batches)]
    )
    ses = batch_rates.std(axis=0, ddof=1) / math.sqrt(n_batches)

    values, errs, mult, col_rates, col_ses = cluster_exponents(rates, ses, merge_factor)
    if d_plus is None:
        d_plus = int(mult[values > sign_factor * errs].sum())
    gap = float(np.min(np.abs(np.diff(values)))) if len(values) > 1 else math.inf
    index_map = np.repeat(np.arange(len(values)), mult)
    return LyapunovSpectrum(
        exponents=values,
        multiplicities=mult,
        std_errors=errs,
        horizon=horizon,
        qr_period=qr_period,
        d_plus=d_plus,
        gap=gap,
        index_map=index_map,
        column_rates=col_rates,
        column_std_errors=col_ses,
        meta={"seed": getattr(cocycle.path, "seed", None),
              "offset": getattr(cocycle.path, "offset", 0)},
    )


def graded_svd(R, tol=1e-15, max_iter=200):
    """SVD of an upper-triangular, possibly strongly graded matrix.

    Uses the unshifted QR iteration R_{k+1} = qr(R_k^T).R; every second step
    accumulates the right factor. Returns ``(log_singular_values, V)`` sorted by
    decreasing singular value with R = U diag(s) V^T.
    """
    d = R.shape[0]
    B = np.array(R, dtype=float)
    V = np.eye(d)
    for k in range(max_iter):
        Q, B = np.linalg.qr(B.T)
        if k % 2 == 0:
            V = V @ Q
        else:
            diag = np.abs(np.diag(B))
            off = np.abs(np.triu(B, 1))
            scale = np.sqrt(np.outer(diag, diag))
            if np.all(off <= tol * scale):
                break
    else:
        raise NumericalError("graded SVD did not converge")
    diag = np.abs(np.diag(B))
    if np.any(diag == 0):
        raise NumericalError("singular value underflow; use a shorter horizon")
    order = np.argsort(-diag, kind="stable")
    return np.log(diag[order]), V[:, order]


@dataclass
class UnstableProjector:
    P_plus: np.ndarray
    S: int
    d_plus: int
    singular_log_rates: np.ndarray
    V_plus: np.ndarray
    V_minus: np.ndarray
    cut_log_gap: float
    t_start: int = 0
    meta: dict = field(default_factory=dict)

    def column_norms(self):
        """||P_+ e_i|| for every coordinate i."""
        return np.linalg.norm(self.P_plus, axis=0)

    def to_dict(self):
        return {
            "P_plus": self.P_plus.tolist(),
            "S": self.S,
            "d_plus": self.d_plus,
            "t_start": self.t_start,
            "singular_log_rates": self.singular_log_rates.tolist(),
            "cut_log_gap": self.cut_log_gap,
            "column_norms": self.column_norms().tolist(),
            **self.meta,
        }


def product_factors(cocycle, t_start, S, qr_period=10):
    """Phi over draws t_start .. t_start+S-1 as ``(Q, R, log_scale)``, Phi = Q R e^log_scale."""
    d = cocycle.dim
    H = cocycle.H
    coords, alphas = cocycle.path.draws(t_start, S)
    Z = np.eye(d)
    R = np.eye(d)
    log_scale = 0.0
    for k0 in range(0, S, qr_period):
        Z = apply_steps(H, coords[k0 : k0 + qr_period], alphas[k0 : k0 + qr_period], Z)
        Z, r = np.linalg.qr(Z)
        R = r @ R
        s = np.abs(R).max()
        R /= s
        log_scale += math.log(s)
    return Z, R, log_scale


def unstable_projector(cocycle, t_start, S, d_plus, qr_period=10, gap_tol=1e-8) -> UnstableProjector:
    """Projector onto the top ``d_plus`` right singular vectors of Phi over S draws."""
    if S < 1 or d_plus < 1:
        raise ValueError("need S >= 1 and d_plus >= 1")
    d = cocycle.dim
    if d_plus > d:
        raise ValueError("d_plus exceeds dimension")
    _, R, log_scale = product_factors(cocycle, t_start, S, qr_period)
    log_s, V = graded_svd(R)
    log_s = log_s + log_scale
    cut = math.inf if d_plus == d else float(log_s[d_plus - 1] - log_s[d_plus])
    V_plus = V[:, :d_plus]
    P = V_plus @ V_plus.T
    proj = UnstableProjector(
        P_plus=P,
        S=S,
        d_plus=d_plus,
        singular_log_rates=log_s / S,
        V_plus=V_plus,
        V_minus=V[:, d_plus:],
        cut_log_gap=cut,
        t_start=t_start,
        meta={"seed": getattr(cocycle.path, "seed", None),
              "offset": getattr(cocycle.path, "offset", 0)},
    )
    if -math.expm1(-cut) < gap_tol:
        raise AmbiguousSubspace(
            f"relative singular gap at cut {d_plus} is {-math.expm1(-cut):.3e}", log_gap=cut
        )
    return proj


def singular_log_rates(cocycle, t_start, S, qr_period=10):
    """(1/S) log s_j of Phi over S draws, all j, largest first."""
    _, R, log_scale = product_factors(cocycle, t_start, S, qr_period)
    log_s, _ = graded_svd(R)
    return (log_s + log_scale) / S


def draws_list(path, t0, n):
    coords, alphas = path.draws(t0, n)
    return [CoordinateStepDraw(int(i), float(a)) for i, a in zip(coords, alphas)]
