"""Monte Carlo experiments: saddle escape, global convergence, Gauss-Seidel
windows and the linear decay / growth estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from .errors import AssumptionViolation
from .linear_cocycle import apply_steps
from .objective import STRICT_SADDLE, classify_critical_point, nearest_known_critical_point
from .rcgd import ESCAPE, GRAD_TOL, DIVERGENCE, StopRule, run
from .saddle_cert import check_assumption3, decay_constant, decay_delta
from .sample_path import SamplePath, derive_seed


def _trial_rng(trial_seed, stream):
    return np.random.default_rng(np.random.SeedSequence([trial_seed, stream]))


@dataclass
class EscapeReport:
    n_trials: int
    escape_times: list
    fraction_escaped: float
    config: dict = field(default_factory=dict)

    def survival(self, t_grid):
        """Fraction of trials still inside the escape ball at each t in ``t_grid``."""
        times = np.array(self.escape_times, dtype=float)
        if times.size == 0:
            return np.ones(len(t_grid))
        return np.array([np.mean(times > t) for t in t_grid])

    def to_dict(self):
        return {
            "n_trials": self.n_trials,
            "escape_times": [None if math.isinf(t) else int(t) for t in self.escape_times],
            "fraction_escaped": self.fraction_escaped,
            "config": self.config,
        }


def escape_trial(spec, x_star, x0, stepsizes, escape_radius, T_max, path_seed, override=False):
    """First t with |x_t - x*| > escape_radius, or inf."""
    x_star = np.asarray(x_star, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if np.array_equal(x0, x_star):
        raise ValueError("x0 must differ from the saddle")
    path = SamplePath(path_seed, spec.dim, stepsizes)
    rule = StopRule(T_max, 0.0, x_star, escape_radius)
    traj = run(spec, x0, path, rule, override=override, record="none")
    return traj.n_steps if traj.terminated_by in (ESCAPE, DIVERGENCE) else math.inf


def escape_mc(spec, x_star, init_radius, n_trials, escape_radius, T_max, seed, stepsizes,
              override=False) -> EscapeReport:
    """Escape times from uniform points on the sphere of radius ``init_radius`` about ``x_star``."""
    x_star = np.asarray(x_star, dtype=float)
    if not init_radius > 0:
        raise ValueError("init_radius must be positive (x0 = x* is excluded)")
    if not init_radius < escape_radius:
        raise ValueError("init_radius must be smaller than escape_radius")
    cls = classify_critical_point(spec, x_star)
    if cls.kind != STRICT_SADDLE:
        raise AssumptionViolation(f"x_star is {cls.kind}, not a strict saddle")
    times = []
    for k in range(n_trials):
        ts = derive_seed(seed, k)
        u = _trial_rng(ts, 1).standard_normal(spec.dim)
        x0 = x_star + init_radius * u / np.linalg.norm(u)
        times.append(escape_trial(spec, x_star, x0, stepsizes, escape_radius, T_max, ts, override))
    n_esc = sum(1 for t in times if not math.isinf(t))
    return EscapeReport(
        n_trials=n_trials,
        escape_times=times,
        fraction_escaped=n_esc / n_trials if n_trials else 0.0,
        config={
            "seed": seed,
            "x_star": x_star.tolist(),
            "init_radius": init_radius,
            "init_distribution": "uniform_sphere",
            "escape_radius": escape_radius,
            "T_max": T_max,
            "alpha_min": stepsizes.alpha_min,
            "alpha_max": stepsizes.alpha_max,
        },
    )


@dataclass
class ConvergenceReport:
    trials: list
    counts: dict
    n_trials: int
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {"n_trials": self.n_trials, "counts": self.counts, "trials": self.trials,
                "config": self.config}


def classify_convergence(spec, init_box, n_trials, rule: StopRule, seed, stepsizes, *,
                         inits=None, match_radius=1e-3, eig_tol=1e-8, override=False,
                         a3_seeds=8) -> ConvergenceReport:
    """Run to ``rule.grad_tol`` from random inits and classify every limit.

    Trials stopping at ``max_iter`` are ``unconverged`` and left unclassified. A
    converged trial whose limit is a strict saddle is flagged together with an
    empirical verdict on the non-zero projection assumption at that saddle.
    """
    lo, hi = (np.asarray(b, dtype=float) for b in init_box)
    if inits is not None:
        inits = np.asarray(inits, dtype=float)
        n_trials = len(inits)
    trials = []
    counts = {"local_min_candidate": 0, "strict_saddle": 0, "degenerate": 0,
              "unconverged": 0, "diverged": 0}
    for k in range(n_trials):
        ts = derive_seed(seed, k)
        x0 = inits[k] if inits is not None else lo + (hi - lo) * _trial_rng(ts, 1).random(spec.dim)
        traj = run(spec, x0, SamplePath(ts, spec.dim, stepsizes), rule, override=override,
                   record="none")
        g = float(np.linalg.norm(spec.grad(traj.x_final)))
        entry = {"trial": k, "seed": ts, "x0": np.asarray(x0).tolist(),
                 "limit": traj.x_final.tolist(), "grad_norm": g, "n_steps": traj.n_steps}
        if traj.terminated_by == GRAD_TOL:
            cls = classify_critical_point(spec, traj.x_final, grad_tol=rule.grad_tol, eig_tol=eig_tol)
            entry.update(status="converged", kind=cls.kind, min_eig=cls.min_eig)
            match = nearest_known_critical_point(spec, traj.x_final, match_radius)
            entry["matched"] = None if match is None else match[0]
            counts[cls.kind] += 1
            if cls.kind == STRICT_SADDLE:
                rep = check_assumption3(spec.hessian(traj.x_final), stepsizes, range(a3_seeds),
                                        (50, 100, 200), T_spectrum=50_000)
                entry["flag"] = f"saddle_limit (non-zero projection assumption: {rep.verdict})"
        elif traj.terminated_by == DIVERGENCE:
            entry.update(status="diverged")
            counts["diverged"] += 1
        else:
            entry.update(status="unconverged")
            counts["unconverged"] += 1
        trials.append(entry)
    trials.sort(key=lambda e: e["trial"])
    return ConvergenceReport(
        trials=trials, counts=counts, n_trials=n_trials,
        config={"seed": seed, "init_box": [lo.tolist(), hi.tolist()], "max_iter": rule.max_iter,
                "grad_tol": rule.grad_tol, "alpha_min": stepsizes.alpha_min,
                "alpha_max": stepsizes.alpha_max, "match_radius": match_radius},
    )


def surjection_probability(d, m) -> Fraction:
    """P(m uniform draws from d coordinates cover all of them) = d! S(m, d) / d^m."""
    count = sum((-1) ** j * comb(d, j) * (d - j) ** m for j in range(d + 1))
    return Fraction(count, d**m)


def covers(coords, d):
    return len(set(int(c) for c in coords)) == d


@dataclass
class GSWindowStats:
    m: int
    indicators: np.ndarray
    mean_indicator: float
    exact_mean: float
    growth_ratios: np.ndarray | None = None

    @property
    def std_error(self):
        n = len(self.indicators)
        p = self.exact_mean
        return math.sqrt(p * (1 - p) / n) if n else math.nan


def gs_window_stats(path, d, m, n_windows) -> GSWindowStats:
    """Coverage indicators of consecutive length-m windows of ``path``."""
    if m < d:
        raise ValueError("window length must be >= d")
    coords, _ = path.draws(0, m * n_windows)
    hit = np.zeros((n_windows, d), dtype=bool)
    rows = np.repeat(np.arange(n_windows), m)
    hit[rows, coords] = True
    ind = hit.all(axis=1).astype(np.int8)
    return GSWindowStats(m, ind, float(ind.mean()) if n_windows else math.nan,
                         float(surjection_probability(d, m)))


def sample_negative_point(H, rng, max_tries=1000):
    """A random point with x^T H x < 0."""
    H = np.asarray(H, dtype=float)
    d = H.shape[0]
    for _ in range(max_tries):
        x = rng.standard_normal(d)
        if x @ H @ x < 0:
            return x
    w, V = np.linalg.eigh(H)
    v = V[:, 0]
    x = v + 0.1 * rng.standard_normal(d)
    while x @ H @ x >= 0:
        x = 0.5 * (x + v)
    return x


@dataclass
class DecayReport:
    fraction: float
    witness_fraction: float
    c: float
    delta_decay: float
    n_windows: int
    n_rejected_windows: int
    worst_margin: float


def verify_linear_decay(H, stepsizes, m, n_windows, seed) -> DecayReport:
    """Check f(x_{t+m}) - f(x_t) <= c f(x_t) on covering windows from points with f < 0.

    Also checks that every window contains a step with
    a_t |e_i^T H y_t| >= delta_decay |y_t|, y_t the range-of-H component.
    """
    H = np.asarray(H, dtype=float)
    d = H.shape[0]
    c = decay_constant(H, m, stepsizes)
    delta = decay_delta(H, m, stepsizes)
    w, V = np.linalg.eigh(H)
    Vr = V[:, np.abs(w) > 1e-12 * np.abs(w).max()]
    P_ran = Vr @ Vr.T
    path = SamplePath(seed, d, stepsizes)
    rng = _trial_rng(seed, 2)

    def f(x):
        return 0.5 * float(x @ H @ x)

    ok = wit = rejected = 0
    worst = math.inf
    t = 0
    done = 0
    while done < n_windows:
        coords, alphas = path.draws(t, m)
        t += m
        if not covers(coords, d):
            rejected += 1
            continue
        x = sample_negative_point(H, rng)
        f0 = f(x)
        found = False
        xs = x
        for i, a in zip(coords, alphas):
            y = P_ran @ xs
            if a * abs(H[i] @ y) >= delta * np.linalg.norm(y):
                found = True
            xs = apply_steps(H, [i], [a], xs)
        lhs = f(xs) - f0
        rhs = c * f0
        worst = min(worst, rhs - lhs)
        ok += lhs <= rhs + 1e-10 * abs(f0)
        wit += found
        done += 1
    return DecayReport(
        fraction=float(ok) / n_windows if n_windows else 1.0,
        witness_fraction=float(wit) / n_windows if n_windows else 1.0,
        c=c, delta_decay=delta, n_windows=n_windows, n_rejected_windows=rejected,
        worst_margin=worst,
    )


@dataclass
class GrowthReport:
    holds: bool
    bound_holds: bool
    K: int | None
    norms: np.ndarray
    lower_bounds: np.ndarray
    partial_sums: np.ndarray
    c: float
    exact_mean: float
    stats: GSWindowStats | None = None

    def __bool__(self):
        return self.holds


def verify_growth(H, stepsizes, x0_negative, k_max, m, seed) -> GrowthReport:
    """Run the linear system k_max windows and compare |x_{km}| with the window-count bound.

    Checks |x_{km}| >= sqrt(2 f(x0)/lambda_min) (1+c)^{S_k/2} for every k and
    reports the first K from which S_k >= (E I_0 / 2) k holds up to k_max.
    """
    H = np.asarray(H, dtype=float)
    d = H.shape[0]
    x = np.array(x0_negative, dtype=float)
    f0 = 0.5 * float(x @ H @ x)
    if not f0 < 0:
        raise ValueError("x0 must satisfy f(x0) < 0")
    lam_min = float(np.linalg.eigvalsh(H)[0])
    c = decay_constant(H, m, stepsizes)
    p = float(surjection_probability(d, m))
    path = SamplePath(seed, d, stepsizes)
    norms = [float(np.linalg.norm(x))]
    S = [0]
    ind = []
    for k in range(k_max):
        coords, alphas = path.draws(k * m, m)
        ind.append(int(covers(coords, d)))
        x = apply_steps(H, coords, alphas, x)
        norms.append(float(np.linalg.norm(x)))
        S.append(S[-1] + ind[-1])
    norms = np.array(norms)
    S = np.array(S)
    lower = math.sqrt(2 * f0 / lam_min) * (1 + c) ** (0.5 * S)
    bound_ok = bool(np.all(norms >= lower * (1 - 1e-12)))
    sat = S >= 0.5 * p * np.arange(k_max + 1)
    K = None
    if sat[-1]:
        bad = np.flatnonzero(~sat)
        K = 0 if bad.size == 0 else int(bad[-1] + 1)
    ratios = norms[1:] / norms[:-1] if k_max else np.array([])
    stats = GSWindowStats(m, np.array(ind, dtype=np.int8),
                          float(np.mean(ind)) if ind else math.nan, p, ratios)
    return GrowthReport(bound_ok and K is not None, bound_ok, K, norms, lower, S, c, p, stats)
