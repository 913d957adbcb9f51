"""Objective functions with globally bounded Hessians and critical-point classification."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AssumptionViolation, NotCritical

LOCAL_MIN = "local_min_candidate"
STRICT_SADDLE = "strict_saddle"
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class ObjectiveSpec:
    """A C^2 objective on R^d together with its derivatives.

    ``hessian_bound`` is an upper bound M on the operator norm of the Hessian
    over all of R^d. ``period`` is set for objectives that are periodic in every
    coordinate and is used when matching limits against known critical points.
    """

    name: str
    dim: int
    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    hessian_bound: float
    known_critical_points: tuple = ()
    period: Optional[float] = None
    params: dict = field(default_factory=dict)

    def partial(self, x, i):
        return float(self.grad(x)[i])


@dataclass(frozen=True)
class CriticalPointClass:
    kind: str
    min_eig: float
    tol: float


def _classify_eig(min_eig, tol):
    if min_eig < -tol:
        return STRICT_SADDLE
    if min_eig > tol:
        return LOCAL_MIN
    return DEGENERATE


def make_quadratic(H) -> ObjectiveSpec:
    """f(x) = x^T H x / 2 with critical point at the origin."""
    H = np.array(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"H must be square, got shape {H.shape}")
    asym = np.abs(H - H.T)
    worst = float(asym.max()) if asym.size else 0.0
    if worst > 1e-12 * max(1.0, float(np.abs(H).max())):
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise ValueError(
            f"H is not symmetric: |H[{i},{j}] - H[{j},{i}]| = {worst:.3e}"
        )
    H = 0.5 * (H + H.T)
    H.setflags(write=False)
    d = H.shape[0]
    M = float(np.linalg.norm(H, 2)) if d else 0.0
    min_eig = float(np.linalg.eigvalsh(H)[0])
    crit = ((np.zeros(d), _classify_eig(min_eig, 1e-8)),)

    def f(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ H @ x)

    def grad(x):
        return H @ np.asarray(x, dtype=float)

    def hess(x):
        return H.copy()

    return ObjectiveSpec(
        name="quadratic",
        dim=d,
        eval=f,
        grad=grad,
        hessian=hess,
        hessian_bound=M,
        known_critical_points=crit,
        params={"H": H.tolist()},
    )


def coupled_trig_bound(kappa):
    # Gershgorin: |cos| on the diagonal plus 2|kappa| from the two ring
    # neighbours on the diagonal and 2|kappa| off the diagonal.
    return 1.0 + 4.0 * abs(kappa)


def make_coupled_trig(d: int, kappa: float) -> ObjectiveSpec:
    """f(x) = sum_i cos(x_i) + kappa * sum_i sin(x_i) sin(x_{i+1 mod d}).

    The Hessian is bounded by ``1 + 4|kappa|`` (row-sum bound), which for
    d = 2 coincides with ``1 + 2|kappa| d``. Every point of {0, pi}^d is
    critical; these are listed (one period) as known critical points.
    """
    if d < 2:
        raise ValueError("coupled_trig needs d >= 2")
    if not abs(kappa) < 0.5:
        raise ValueError(f"|kappa| must be < 1/2, got {kappa}")
    kappa = float(kappa)
    nxt = (np.arange(d) + 1) % d
    prv = (np.arange(d) - 1) % d

    def f(x):
        x = np.asarray(x, dtype=float)
        s = np.sin(x)
        return float(np.sum(np.cos(x)) + kappa * np.sum(s * s[nxt]))

    def grad(x):
        x = np.asarray(x, dtype=float)
        s = np.sin(x)
        return -s + kappa * np.cos(x) * (s[prv] + s[nxt])

    def hess(x):
        x = np.asarray(x, dtype=float)
        s, c = np.sin(x), np.cos(x)
        H = np.diag(-c - kappa * s * (s[prv] + s[nxt]))
        for i in range(d):
            j = nxt[i]
            H[i, j] += kappa * c[i] * c[j]
            H[j, i] += kappa * c[i] * c[j]
        return H

    crit = []
    for corner in itertools.product((0.0, math.pi), repeat=d):
        x = np.array(corner)
        crit.append((x, _classify_eig(float(np.linalg.eigvalsh(hess(x))[0]), 1e-8)))

    return ObjectiveSpec(
        name="coupled_trig",
        dim=d,
        eval=f,
        grad=grad,
        hessian=hess,
        hessian_bound=coupled_trig_bound(kappa),
        known_critical_points=tuple(crit),
        period=2 * math.pi,
        params={"d": d, "kappa": kappa},
    )


CATALOG = {
    "quadratic": lambda params: make_quadratic(params["H"]),
    "coupled_trig": lambda params: make_coupled_trig(int(params["d"]), float(params["kappa"])),
}


def make_objective(name, params) -> ObjectiveSpec:
    try:
        factory = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown objective {name!r}; choose from {sorted(CATALOG)}") from None
    return factory(params)


def classify_critical_point(spec, x, grad_tol=1e-8, eig_tol=1e-8) -> CriticalPointClass:
    x = np.asarray(x, dtype=float)
    gnorm = float(np.linalg.norm(spec.grad(x)))
    if gnorm > grad_tol:
        raise NotCritical(gnorm, grad_tol)
    min_eig = float(np.linalg.eigvalsh(spec.hessian(x))[0])
    return CriticalPointClass(_classify_eig(min_eig, eig_tol), min_eig, eig_tol)


def nearest_known_critical_point(spec, x, match_radius):
    """Index and distance of the closest catalogued critical point, or ``None``.

    Distances are taken modulo ``spec.period`` when it is set.
    """
    best = None
    for k, (xc, _) in enumerate(spec.known_critical_points):
        diff = np.asarray(x, dtype=float) - xc
        if spec.period is not None:
            diff = (diff + spec.period / 2) % spec.period - spec.period / 2
        dist = float(np.linalg.norm(diff))
        if dist <= match_radius and (best is None or dist < best[1]):
            best = (k, dist)
    return best


def check_derivatives(spec, x, h=1e-5):
    """Relative errors of ``grad`` and ``hessian`` against central differences."""
    x = np.asarray(x, dtype=float)
    d = spec.dim
    g = spec.grad(x)
    H = spec.hessian(x)
    g_fd = np.empty(d)
    H_fd = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        g_fd[i] = (spec.eval(x + e) - spec.eval(x - e)) / (2 * h)
        H_fd[:, i] = (spec.grad(x + e) - spec.grad(x - e)) / (2 * h)
    g_err = np.linalg.norm(g - g_fd) / max(1.0, np.linalg.norm(g))
    H_err = np.linalg.norm(H - H_fd) / max(1.0, np.linalg.norm(H))
    return float(g_err), float(H_err)


def validate_stepsizes(spec, alpha_max, override=False):
    """Raise unless ``alpha_max < 1/M`` (skipped when ``override`` is set)."""
    M = spec.hessian_bound
    if not override and not alpha_max * M < 1.0:
        raise AssumptionViolation(
            f"alpha_max={alpha_max} violates alpha_max < 1/M with M={M:.6g}"
        )
