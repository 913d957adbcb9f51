"""Constants of the finite-block escape argument for one strict saddle.

Two different deltas appear and are kept apart: ``delta_proj`` lower-bounds
||P_+ e_i|| over sample paths, ``delta_decay`` is the per-window gradient
witness constant of the quadratic decay estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import (
    AmbiguousSubspace,
    AssumptionViolation,
    CertificateInfeasible,
    DegenerateMatrix,
    NoUnstableDirection,
    NotASaddle,
    NumericalError,
)
from .linear_cocycle import (
    Cocycle,
    lyapunov_spectrum,
    singular_log_rates,
    step_inverse,
    unstable_projector,
)
from .objective import STRICT_SADDLE, classify_critical_point
from .sample_path import SamplePath, StepsizeRange, derive_seed

GAMMA_FRACTION = 0.9
EPS_CAP = (1.0 / 6.0) * (1.0 - 1e-9)
S_LIMIT = 10**9

HOLDS = "holds_empirically"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"


def _positive_singular_values(H, rtol=1e-12):
    s = np.linalg.svd(np.asarray(H, dtype=float), compute_uv=False)
    pos = s[s > rtol * (s[0] if s.size else 0.0)]
    if pos.size == 0:
        raise DegenerateMatrix("H has no nonzero singular value")
    return float(pos.min()), float(pos.max())


def decay_delta(H, m, stepsizes: StepsizeRange) -> float:
    d = np.asarray(H).shape[0]
    if m < d:
        raise ValueError(f"window length m={m} must be >= d={d}")
    s_min, s_max = _positive_singular_values(H)
    a_min, a_max = stepsizes.alpha_min, stepsizes.alpha_max
    delta = min(1.0 / (2 * m), a_min * s_min / (2 * math.sqrt(m) * (m * a_max * s_max + 1)))
    # keep delta^2 / (alpha_min s_max) < 1
    bound = math.sqrt(a_min * s_max)
    if not delta < bound:
        delta = 0.5 * bound
    return delta


def decay_constant(H, m, stepsizes: StepsizeRange) -> float:
    """c = delta^2 / (alpha_max s_max(H)) with delta from :func:`decay_delta`."""
    H = np.asarray(H, dtype=float)
    if not np.linalg.eigvalsh(H)[0] < 0:
        raise NotASaddle("lambda_min(H) >= 0")
    if not stepsizes.alpha_max * np.abs(np.diag(H)).max() < 1.0:
        raise AssumptionViolation("alpha_max >= 1/max|H_ii|")
    _, s_max = _positive_singular_values(H)
    return decay_delta(H, m, stepsizes) ** 2 / (stepsizes.alpha_max * s_max)


def spectral_constants(spectrum, M, alpha_max):
    """(lambda_plus, gamma, eps_star) from a Lyapunov spectrum.

    gamma sits at 90% of its open upper bound; eps_star is the root of the
    linear boundary (1-6e)(lambda_plus-gamma) + 6e log(1 - M alpha_max) = 0,
    capped just below 1/6.
    """
    if spectrum.d_plus < 1:
        raise NoUnstableDirection("spectrum has no positive exponent")
    ex = np.asarray(spectrum.exponents, dtype=float)
    lam_plus = float(ex[spectrum.index_map[spectrum.d_plus - 1]])
    return _constants_from(ex, lam_plus, M, alpha_max)


def _constants_from(ex, lam_plus, M, alpha_max):
    bound = lam_plus
    if len(ex) > 1:
        bound = min(bound, float(np.min(np.abs(np.diff(ex)))))
    gamma = 0.5 * GAMMA_FRACTION * bound
    return lam_plus, gamma, eps_star_from(lam_plus - gamma, M, alpha_max)


def eps_star_from(rate, M, alpha_max):
    if not M * alpha_max < 1:
        raise AssumptionViolation("M * alpha_max must be < 1")
    log_term = abs(math.log1p(-M * alpha_max))
    if log_term == 0.0:
        return EPS_CAP
    return min(rate / (6.0 * (rate + log_term)), EPS_CAP)


def stopping_time_L(d: int, eps: float) -> int:
    """Smallest L >= 1 with (1 - 1/d)^L <= eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if d < 1:
        raise ValueError("d must be >= 1")
    if d == 1:
        return 1
    q = 1.0 - 1.0 / d
    L = max(1, math.ceil(math.log(eps) / math.log(q)) - 1)
    while q**L > eps:
        L += 1
    while L > 1 and q ** (L - 1) <= eps:
        L -= 1
    return L


def amplification_exponent(eps, M, alpha_max, T):
    if not 0 < eps < 1.0 / 6.0:
        raise ValueError("eps must lie in (0, 1/6)")
    if not M * alpha_max < 1:
        raise AssumptionViolation("M * alpha_max must be < 1")
    return 6 * eps / (1 - 6 * eps) * abs(math.log1p(-M * alpha_max)) * T


def amplification_factor(eps, M, alpha_max, T):
    """Guaranteed growth exp(6e/(1-6e) |log(1 - M a_max)| T); inf on overflow."""
    z = amplification_exponent(eps, M, alpha_max, T)
    return math.exp(z) if z < 709.0 else math.inf


@dataclass(frozen=True)
class BlockInputs:
    lambda_plus: float
    gamma: float
    eps: float
    delta_proj: float
    mu: float
    sigma: float
    L: int
    r_minus: float
    r_plus: float
    alpha_min: float
    alpha_max: float

    @property
    def rate(self):
        return self.lambda_plus - self.gamma

    def _log_k(self, power):
        return (math.log(self.eps * self.delta_proj * self.mu * self.sigma
                         * (self.alpha_max - self.alpha_min) / 8.0)
                + power * (self.L - 1) * math.log(self.r_minus))

    def large_s1(self, S):
        """(lhs, rhs) in log form: S*rate + log K1 >= L log r_+."""
        return S * self.rate + self._log_k(1), self.L * math.log(self.r_plus)

    def large_s2(self, S):
        """(lhs, rhs): (1-6e)(S*rate + log K2) + 6e (L+S) log r_- > 0."""
        e = self.eps
        lhs = (1 - 6 * e) * (S * self.rate + self._log_k(2)) + 6 * e * (self.L + S) * math.log(self.r_minus)
        return lhs, 0.0

    def holds(self, S):
        a, b = self.large_s1(S)
        c, z = self.large_s2(S)
        return a >= b, c > z

    def s1_lower_bound(self):
        return (self.L * math.log(self.r_plus) - self._log_k(1)) / self.rate


def minimal_block_length(inputs: BlockInputs, S_star: int = 1) -> int:
    """Smallest integer S >= S_star satisfying both block-length inequalities."""
    p = inputs
    for name, v in (("lambda_plus", p.lambda_plus), ("eps", p.eps), ("delta_proj", p.delta_proj),
                    ("mu", p.mu), ("sigma", p.sigma), ("r_minus", p.r_minus)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if not 0 <= p.gamma < p.lambda_plus:
        raise ValueError("need 0 <= gamma < lambda_plus")
    e = p.eps
    slope2 = (1 - 6 * e) * p.rate + 6 * e * math.log(p.r_minus)
    if not slope2 > 0:
        raise CertificateInfeasible("eps too large: (large S2) is never satisfied", blocking="large_S2")
    const2 = (1 - 6 * e) * p._log_k(2) + 6 * e * p.L * math.log(p.r_minus)
    cand = max(S_star, math.ceil(p.s1_lower_bound()), math.floor(-const2 / slope2) + 1, 1)
    if cand > S_LIMIT:
        blocking = "large_S1" if p.s1_lower_bound() > S_LIMIT else "large_S2"
        raise CertificateInfeasible(f"block length exceeds {S_LIMIT}", blocking=blocking)
    while not all(p.holds(cand)):
        cand += 1
    while cand - 1 >= max(S_star, 1) and all(p.holds(cand - 1)):
        cand -= 1
    return cand


def local_gradient_bound(spec, x_star, H=None, n_samples=10_000, seed=0, radius0=1.0, max_halvings=60):
    """sigma = s_min(H)/2 and a radius on which |grad f(x)| >= sigma |x - x*| holds on samples.

    The radius starts at ``radius0`` and is halved until every sampled point of
    the ball satisfies the bound.
    """
    x_star = np.asarray(x_star, dtype=float)
    H = spec.hessian(x_star) if H is None else np.asarray(H, dtype=float)
    s = np.linalg.svd(H, compute_uv=False)
    sigma = 0.5 * float(s.min())
    if sigma <= 0:
        raise AssumptionViolation("Hessian at the saddle is degenerate")
    rng = np.random.default_rng(seed)
    d = spec.dim
    dirs = rng.standard_normal((n_samples, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.random(n_samples) ** (1.0 / d)
    r = radius0
    for _ in range(max_halvings):
        ok = True
        for u, rho in zip(dirs, radii):
            dx = r * rho * u
            if np.linalg.norm(spec.grad(x_star + dx)) < sigma * np.linalg.norm(dx):
                ok = False
                break
        if ok:
            return sigma, r
        r *= 0.5
    raise NumericalError("no radius found for the local gradient bound")


@dataclass
class Assumption3Report:
    per_coordinate_min: np.ndarray
    per_S_min: np.ndarray
    S_values: tuple
    n_samples: int
    n_inconclusive: int
    verdict: str
    delta_proj: float | None
    d_plus: int
    seeds: tuple = ()

    def to_dict(self):
        return {
            "per_coordinate_min": self.per_coordinate_min.tolist(),
            "per_S_min": self.per_S_min.tolist(),
            "S_values": list(self.S_values),
            "n_samples": self.n_samples,
            "n_inconclusive": self.n_inconclusive,
            "verdict": self.verdict,
            "delta_proj": self.delta_proj,
            "d_plus": self.d_plus,
            "seeds": list(self.seeds),
        }


def check_assumption3(H, stepsizes, path_seeds, S_values, fail_tol=1e-10, hold_tol=1e-4,
                      stability=0.2, d_plus=None, T_spectrum=200_000, qr_period=10):
    """Empirical check that the unstable projector never annihilates a coordinate vector."""
    H = np.asarray(H, dtype=float)
    d = H.shape[0]
    seeds = tuple(int(s) for s in path_seeds)
    S_values = tuple(int(S) for S in S_values)
    if d_plus is None:
        spec = lyapunov_spectrum(Cocycle(H, SamplePath(seeds[0], d, stepsizes)), T_spectrum, qr_period)
        d_plus = spec.d_plus
    if d_plus < 1:
        raise NoUnstableDirection("top Lyapunov exponent is not positive")
    per_S = np.full((len(S_values), d), np.inf)
    bad = 0
    for seed in seeds:
        coc = Cocycle(H, SamplePath(seed, d, stepsizes))
        for k, S in enumerate(S_values):
            try:
                proj = unstable_projector(coc, 0, S, d_plus, qr_period)
            except (AmbiguousSubspace, NumericalError):
                bad += 1
                continue
            per_S[k] = np.minimum(per_S[k], proj.column_norms())
    per_coord = per_S.min(axis=0)
    if np.any(np.all(per_S < fail_tol, axis=0)):
        verdict = FAILS
    else:
        overall = per_S.min(axis=1)
        stable = (len(S_values) >= 3 and np.all(np.isfinite(overall))
                  and (overall.max() - overall.min()) <= stability * overall.max())
        verdict = HOLDS if stable and overall.min() > hold_tol else INCONCLUSIVE
    return Assumption3Report(
        per_coordinate_min=per_coord,
        per_S_min=per_S,
        S_values=S_values,
        n_samples=len(seeds),
        n_inconclusive=bad,
        verdict=verdict,
        delta_proj=float(per_coord.min()) if verdict == HOLDS else None,
        d_plus=d_plus,
        seeds=seeds,
    )


def in_omega_s(H, path, S, spectrum, gamma, delta_proj, qr_period=10):
    """Whether the first S draws of ``path`` satisfy both singular-value and subspace closeness."""
    coc = Cocycle(H, path)
    rates = singular_log_rates(coc, 0, S, qr_period)
    target = np.asarray(spectrum.exponents)[spectrum.index_map]
    if np.any(np.abs(rates - target) > gamma):
        return False
    try:
        proj = unstable_projector(coc, 0, S, spectrum.d_plus, qr_period)
    except AmbiguousSubspace:
        return False
    return bool(np.all(proj.column_norms() >= delta_proj / 2))


def estimate_s_star(H, stepsizes, spectrum, gamma, delta_proj, eps, seeds, S_grid=None, qr_period=10):
    """Smallest S on a doubling grid with empirical P(Omega^S) >= 1 - 2 eps."""
    H = np.asarray(H, dtype=float)
    d = H.shape[0]
    S_grid = S_grid or [2**k for k in range(3, 12)]
    seeds = list(seeds)
    for S in S_grid:
        hits = 0
        for s in seeds:
            try:
                hits += in_omega_s(H, SamplePath(s, d, stepsizes), S, spectrum, gamma, delta_proj,
                                   qr_period)
            except NumericalError:
                pass
        if hits >= (1 - 2 * eps) * len(seeds):
            return int(S)
    raise CertificateInfeasible("no S on the grid reaches P(Omega^S) >= 1 - 2 eps", blocking="S_star")


def nontrivial_projection_fraction(P_plus, x_prev, coord, grad_coord, stepsizes, eps, delta, n_grid=10_000):
    """Fraction of a stepsize grid for which |P_+ x| falls below eps*delta*(a_max-a_min)/4 * |g_i|.

    ``x = x_prev - a e_i g_i`` for ``a`` on a uniform grid of the stepsize range.
    """
    alphas = np.linspace(stepsizes.alpha_min, stepsizes.alpha_max, n_grid)
    xs = np.repeat(np.asarray(x_prev, float)[None, :], n_grid, axis=0)
    xs[:, coord] -= alphas * grad_coord
    norms = np.linalg.norm(xs @ np.asarray(P_plus).T, axis=1)
    thresh = eps * delta * stepsizes.width / 4 * abs(grad_coord)
    return float(np.mean(norms < thresh))


def rank_propagation_check(H, draws, removed_row, X=None, *, S_large=400, seed=0, T_spectrum=100_000):
    """Column rank of (prod of inverse steps) X with one row deleted.

    Inverses are applied last draw first, so the result equals
    A_0^{-1} ... A_{l-1}^{-1} X. Without ``X`` a basis of the candidate stable
    subspace is synthesized from the bottom right singular vectors at ``S_large``.
    """
    H = np.asarray(H, dtype=float)
    d = H.shape[0]
    if X is None:
        a_min = min(a for _, a in draws)
        a_max = max(a for _, a in draws)
        rng = StepsizeRange(a_min, a_max if a_max > a_min else a_min * (1 + 1e-9))
        coc = Cocycle(H, SamplePath(seed, d, rng))
        d_plus = lyapunov_spectrum(coc, T_spectrum).d_plus
        if d_plus < 1:
            raise NoUnstableDirection("no positive exponent to split off")
        X = unstable_projector(coc, 0, S_large, d_plus).V_minus
    Y = np.array(X, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    for draw in reversed(list(draws)):
        Y = step_inverse(H, draw) @ Y
    if Y.shape[1] == 0:
        return "full_rank"
    Z = np.delete(Y, removed_row, axis=0)
    s = np.linalg.svd(Z, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
    return "full_rank" if rank == Y.shape[1] else "deficient"


@dataclass
class SaddleCertificate:
    lambda_plus: float
    gamma: float
    eps_star: float
    eps: float
    delta_proj: float
    delta_decay: float
    c: float
    m: int
    mu: float
    L: int
    S: int
    S_star: int
    T: int
    r_minus: float
    r_plus: float
    sigma: float
    sigma_radius: float
    amplification: float
    amplification_log: float
    M: float
    alpha_min: float
    alpha_max: float
    exponents: list
    provenance: dict = field(default_factory=dict)

    def block_inputs(self):
        return BlockInputs(self.lambda_plus, self.gamma, self.eps, self.delta_proj, self.mu,
                           self.sigma, self.L, self.r_minus, self.r_plus, self.alpha_min,
                           self.alpha_max)

    def inequalities(self):
        """Every defining inequality re-evaluated from the stored constants."""
        out = []
        ex = np.asarray(self.exponents, dtype=float)
        out.append(("gamma < lambda_plus", self.gamma, self.lambda_plus, self.gamma < self.lambda_plus))
        bound = self.lambda_plus
        if len(ex) > 1:
            bound = min(bound, float(np.min(np.abs(np.diff(ex)))))
        out.append(("gamma < min(gap, lambda_plus)/2", self.gamma, 0.5 * bound, self.gamma < 0.5 * bound))
        eps_lhs = ((1 - 6 * self.eps) * (self.lambda_plus - self.gamma)
                   + 6 * self.eps * math.log1p(-self.M * self.alpha_max))
        out.append(("eps condition > 0", eps_lhs, 0.0, eps_lhs > 0))
        out.append(("0 < eps < eps_star", self.eps, self.eps_star, 0 < self.eps < self.eps_star))
        p = self.block_inputs()
        a, b = p.large_s1(self.S)
        out.append(("large S1 (log form)", a, b, a >= b))
        c2, z = p.large_s2(self.S)
        out.append(("large S2", c2, z, c2 > z))
        out.append(("S >= S_star", self.S, self.S_star, self.S >= self.S_star))
        out.append(("T = L + S", self.T, self.L + self.S, self.T == self.L + self.S))
        z_amp = amplification_exponent(self.eps, self.M, self.alpha_max, self.T)
        out.append(("amplification log formula", self.amplification_log, z_amp,
                    math.isclose(self.amplification_log, z_amp, rel_tol=1e-12)))
        out.append(("amplification > 1", self.amplification_log, 0.0, self.amplification_log > 0))
        return [{"name": n, "lhs": float(l), "rhs": float(r), "holds": bool(h)} for n, l, r, h in out]

    def validate(self):
        failed = [q["name"] for q in self.inequalities() if not q["holds"]]
        if failed:
            raise CertificateInfeasible(f"certificate invariants fail: {failed}", blocking=failed[0])
        return True

    def to_dict(self):
        out = asdict(self)
        out["amplification"] = None if math.isinf(self.amplification) else self.amplification
        out["inequalities"] = self.inequalities()
        return out


def certify(spec, x_star, stepsizes: StepsizeRange, *, m=None, mu=None, eps=None, seed=0,
            T_spectrum=200_000, qr_period=10, a3_seeds=None, S_values=(100, 200, 400),
            s_star_seeds=None, sigma_samples=10_000) -> SaddleCertificate:
    """Assemble and self-check a certificate for the strict saddle ``x_star`` of ``spec``."""
    x_star = np.asarray(x_star, dtype=float)
    d = spec.dim
    cls = classify_critical_point(spec, x_star)
    if cls.kind != STRICT_SADDLE:
        raise NotASaddle(f"critical point classified as {cls.kind}")
    H = spec.hessian(x_star)
    eigs = np.linalg.eigvalsh(H)
    if np.min(np.abs(eigs)) <= 1e-8:
        raise AssumptionViolation("Hessian at the saddle is degenerate")
    M = spec.hessian_bound
    stepsizes.validate(M)

    cocycle = Cocycle(H, SamplePath(seed, d, stepsizes))
    spectrum = lyapunov_spectrum(cocycle, T_spectrum, qr_period)
    lam_plus, gamma, eps_star = spectral_constants(spectrum, M, stepsizes.alpha_max)
    eps = eps_star / 2 if eps is None else float(eps)
    if not 0 < eps < eps_star:
        raise ValueError(f"eps must lie in (0, eps_star={eps_star:.6g})")

    a3_seeds = list(range_seeds(seed, 32) if a3_seeds is None else a3_seeds)
    a3 = check_assumption3(H, stepsizes, a3_seeds, S_values, d_plus=spectrum.d_plus, qr_period=qr_period)
    if a3.verdict != HOLDS:
        raise AssumptionViolation(f"non-zero projection assumption: verdict {a3.verdict}")

    m = d if m is None else int(m)
    mu = 1.0 / math.sqrt(d) if mu is None else float(mu)
    if not 0 < mu <= 1.0 / math.sqrt(d) + 1e-15:
        raise ValueError("mu must lie in (0, 1/sqrt(d)]")
    delta_decay = decay_delta(H, m, stepsizes)
    c = decay_constant(H, m, stepsizes)
    L = stopping_time_L(d, eps)
    sigma, radius = local_gradient_bound(spec, x_star, H, n_samples=sigma_samples, seed=seed)
    r_minus = 1 - M * stepsizes.alpha_max
    r_plus = 1 + M * stepsizes.alpha_max

    # delta_proj is a minimum over the a3 seeds, so Omega^S is sampled on the same paths
    s_star_seeds = list(a3_seeds if s_star_seeds is None else s_star_seeds)
    S_star = estimate_s_star(H, stepsizes, spectrum, gamma, a3.delta_proj, eps, s_star_seeds,
                             qr_period=qr_period)
    inputs = BlockInputs(lam_plus, gamma, eps, a3.delta_proj, mu, sigma, L, r_minus, r_plus,
                         stepsizes.alpha_min, stepsizes.alpha_max)
    S = minimal_block_length(inputs, S_star)
    T = L + S
    z = amplification_exponent(eps, M, stepsizes.alpha_max, T)
    cert = SaddleCertificate(
        lambda_plus=lam_plus, gamma=gamma, eps_star=eps_star, eps=eps,
        delta_proj=a3.delta_proj, delta_decay=delta_decay, c=c, m=m, mu=mu, L=L, S=S,
        S_star=S_star, T=T, r_minus=r_minus, r_plus=r_plus, sigma=sigma,
        sigma_radius=radius, amplification=math.exp(z) if z < 709 else math.inf,
        amplification_log=z, M=M, alpha_min=stepsizes.alpha_min, alpha_max=stepsizes.alpha_max,
        exponents=spectrum.exponents.tolist(),
        provenance={
            "seed": seed,
            "x_star": x_star.tolist(),
            "H": H.tolist(),
            "spectrum": spectrum.to_dict(),
            "assumption3": a3.to_dict(),
            "s_star_seeds": s_star_seeds,
            "T_spectrum": T_spectrum,
            "qr_period": qr_period,
        },
    )
    cert.validate()
    return cert


def range_seeds(base, n):
    return [derive_seed(base, k) for k in range(n)]
