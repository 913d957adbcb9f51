"""Randomized coordinate gradient descent, x_{t+1} = x_t - a_t e_i d_i f(x_t)."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AssumptionViolation, NumericalError
from .sample_path import CoordinateStepDraw

MAX_ITER = "max_iter"
GRAD_TOL = "grad_tol"
ESCAPE = "escape_radius"
DIVERGENCE = "divergence"

DIVERGENCE_NORM = 1e12
_CHUNK = 4096


@dataclass(frozen=True)
class StopRule:
    max_iter: int
    grad_tol: float = 0.0
    escape_center: Optional[np.ndarray] = None
    escape_radius: Optional[float] = None

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be >= 0")
        if (self.escape_center is None) != (self.escape_radius is None):
            raise ValueError("escape_center and escape_radius go together")
        if self.escape_radius is not None and not self.escape_radius > 0:
            raise ValueError("escape_radius must be positive")


@dataclass
class Trajectory:
    x0: np.ndarray
    x_final: np.ndarray
    coords: np.ndarray
    alphas: np.ndarray
    terminated_by: str
    points: Optional[np.ndarray] = None
    f_values: Optional[np.ndarray] = None
    grad_norms: Optional[np.ndarray] = None
    alpha_max: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return len(self.coords)

    @property
    def steps_used(self):
        return [CoordinateStepDraw(int(i), float(a)) for i, a in zip(self.coords, self.alphas)]


def step(spec, x, draw):
    """One coordinate update; returns a new array."""
    i, alpha = draw
    if not 0 <= i < spec.dim:
        raise ValueError(f"coordinate {i} out of range for dim {spec.dim}")
    g_i = spec.partial(x, i)
    if not math.isfinite(g_i):
        raise NumericalError(f"non-finite partial derivative at coordinate {i}", state=np.array(x))
    out = np.array(x, dtype=float)
    out[i] = out[i] - alpha * g_i
    return out


def run(spec, x0, path, rule: StopRule, *, override=False, record="full") -> Trajectory:
    """Iterate from ``x0`` using the draws of ``path`` until ``rule`` fires.

    ``record`` is ``"full"`` (iterates, f, gradient norms), ``"values"`` (f and
    gradient norms only) or ``"none"``. The draws actually used are always kept.
    """
    if record not in ("full", "values", "none"):
        raise ValueError(f"bad record mode {record!r}")
    if not override and not path.range.alpha_max * spec.hessian_bound < 1.0:
        raise AssumptionViolation(
            f"alpha_max={path.range.alpha_max} violates alpha_max < 1/M "
            f"with M={spec.hessian_bound:.6g}"
        )
    x = np.array(x0, dtype=float)
    if x.shape != (spec.dim,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({spec.dim},)")
    x_start = x.copy()
    center = None if rule.escape_center is None else np.asarray(rule.escape_center, float)

    pts, fs, gns = [], [], []
    coords_used, alphas_used = [], []
    g = spec.grad(x)
    gn = math.sqrt(float(g @ g))

    def _record(x, g, gn):
        if record == "full":
            pts.append(x)
        if record != "none":
            fs.append(spec.eval(x))
            gns.append(gn)

    _record(x, g, gn)
    t = 0
    reason = MAX_ITER
    coords = alphas = None
    while True:
        if gn <= rule.grad_tol:
            reason = GRAD_TOL
            break
        if center is not None:
            diff = x - center
            if math.sqrt(float(diff @ diff)) > rule.escape_radius:
                reason = ESCAPE
                break
        if t >= rule.max_iter:
            reason = MAX_ITER
            break
        k = t % _CHUNK
        if k == 0:
            coords, alphas = path.draws(t, min(_CHUNK, rule.max_iter - t))
        i = int(coords[k])
        a = float(alphas[k])
        x_new = x.copy()
        x_new[i] = x[i] - a * g[i]
        if not math.isfinite(x_new[i]):
            raise NumericalError(f"non-finite iterate at t={t + 1}", state=x)
        x = x_new
        coords_used.append(i)
        alphas_used.append(a)
        t += 1
        g = spec.grad(x)
        gn = math.sqrt(float(g @ g))
        _record(x, g, gn)
        if math.sqrt(float(x @ x)) > DIVERGENCE_NORM:
            reason = DIVERGENCE
            break

    return Trajectory(
        x0=x_start,
        x_final=x,
        coords=np.array(coords_used, dtype=np.int64),
        alphas=np.array(alphas_used, dtype=np.float64),
        terminated_by=reason,
        points=np.array(pts) if record == "full" else None,
        f_values=np.array(fs) if record != "none" else None,
        grad_norms=np.array(gns) if record != "none" else None,
        alpha_max=path.range.alpha_max,
    )


def replay(spec, x0, coords, alphas):
    """Recompute all iterates from ``x0`` and a list of draws (same arithmetic as ``run``)."""
    x = np.array(x0, dtype=float)
    out = [x]
    for i, a in zip(coords, alphas):
        i = int(i)
        g = spec.grad(x)
        x_new = x.copy()
        x_new[i] = x[i] - float(a) * g[i]
        x = x_new
        out.append(x)
    return np.array(out)


def descent_violations(spec, traj, slack=1e-12):
    """Steps where f(x_{t+1}) > f(x_t) - a_t/2 (d_i f(x_t))^2 + slack |f(x_t)|."""
    pts = traj.points
    if pts is None:
        raise ValueError("trajectory was recorded without iterates")
    bad = []
    for t, (i, a) in enumerate(zip(traj.coords, traj.alphas)):
        f0 = spec.eval(pts[t])
        gi = spec.partial(pts[t], int(i))
        if spec.eval(pts[t + 1]) > f0 - 0.5 * a * gi * gi + slack * abs(f0):
            bad.append(t)
    return bad


def two_sided_norm_check(spec, traj, alpha_max=None, slack=1e-12) -> bool:
    """r_- |x_t| <= |x_{t+1}| <= r_+ |x_t| along a quadratic trajectory, r_+- = 1 +- M a_max."""
    if spec.name != "quadratic":
        raise ValueError("two_sided_norm_check applies to quadratic objectives only")
    if traj.points is None:
        raise ValueError("trajectory was recorded without iterates")
    a_max = traj.alpha_max if alpha_max is None else alpha_max
    M = spec.hessian_bound
    r_minus, r_plus = 1.0 - M * a_max, 1.0 + M * a_max
    norms = np.linalg.norm(traj.points, axis=1)
    lo, hi = norms[:-1], norms[1:]
    return bool(np.all(r_minus * lo * (1 - slack) <= hi) and np.all(hi <= r_plus * lo * (1 + slack)))


def write_trajectory_csv(traj, fh):
    if traj.points is None:
        raise ValueError("trajectory was recorded without iterates")
    d = traj.points.shape[1]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t"] + [f"x{j}" for j in range(d)] + ["f", "grad_norm"])
    for t, (x, f, g) in enumerate(zip(traj.points, traj.f_values, traj.grad_norms)):
        w.writerow([t] + [repr(float(v)) for v in x] + [repr(float(f)), repr(float(g))])


# Binary layout (little endian): magic b"RCGT", uint16 version, uint16 reserved,
# uint32 d, uint64 T, then T rows of d + 2 float64 values (x_t, f, grad_norm).
_MAGIC = b"RCGT"
_VERSION = 1
_HEADER = struct.Struct("<4sHHIQ")


def write_trajectory_binary(traj, fh):
    if traj.points is None:
        raise ValueError("trajectory was recorded without iterates")
    T, d = traj.points.shape
    fh.write(_HEADER.pack(_MAGIC, _VERSION, 0, d, T))
    rows = np.column_stack([traj.points, traj.f_values, traj.grad_norms]).astype("<f8")
    fh.write(rows.tobytes())


def read_trajectory_binary(fh):
    """Returns ``(points, f_values, grad_norms)``."""
    magic, version, _, d, T = _HEADER.unpack(fh.read(_HEADER.size))
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"unsupported version {version}")
    rows = np.frombuffer(fh.read(8 * T * (d + 2)), dtype="<f8").reshape(T, d + 2)
    return rows[:, :d].copy(), rows[:, d].copy(), rows[:, d + 1].copy()
