"""Command-line driver: ``rcgd-saddle <command> --config FILE [--set section.key=value ...]``.

Exit status: 0 success, 2 assumption violation, 3 numerical failure,
64 usage or configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import harness
from .config import (
    ConfigError,
    apply_overrides,
    build_objective,
    build_stepsizes,
    empty_config,
    load_config,
    output_path,
    write_result,
    write_series_csv,
)
from .errors import (
    AmbiguousSubspace,
    AssumptionViolation,
    CertificateInfeasible,
    DegenerateMatrix,
    NumericalError,
    SingularStep,
)
from .linear_cocycle import Cocycle, lyapunov_spectrum, unstable_projector
from .objective import classify_critical_point
from .rcgd import GRAD_TOL, StopRule, run, write_trajectory_csv
from .saddle_cert import certify, check_assumption3, range_seeds
from .sample_path import SamplePath

EXIT_OK = 0
EXIT_ASSUMPTION = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64
GRAD_TOL_DEFAULT = 1e-8


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _x_star(cfg, spec):
    return np.asarray(cfg["experiment"].get("x_star", np.zeros(spec.dim)), dtype=float)


def _hessian(cfg, spec):
    return spec.hessian(_x_star(cfg, spec))


def _optimize(cfg, spec, steps):
    ex = cfg["experiment"]
    x0 = np.asarray(ex["x0"], dtype=float)
    rule = StopRule(int(ex.get("max_iter", 100_000)), float(ex.get("grad_tol", GRAD_TOL_DEFAULT)))
    csv_path = ex.get("trajectory_csv")
    traj = run(spec, x0, SamplePath(int(ex.get("seed", 0)), spec.dim, steps), rule,
               override=bool(ex.get("override", False)), record="full" if csv_path else "none")
    if csv_path:
        with open(csv_path, "w") as fh:
            write_trajectory_csv(traj, fh)
    g = float(np.linalg.norm(spec.grad(traj.x_final)))
    out = {"x_final": traj.x_final, "f_final": spec.eval(traj.x_final), "grad_norm": g,
           "n_steps": traj.n_steps, "terminated_by": traj.terminated_by}
    if traj.terminated_by == GRAD_TOL:
        cls = classify_critical_point(spec, traj.x_final, grad_tol=rule.grad_tol)
        out["classification"] = {"kind": cls.kind, "min_eig": cls.min_eig}
    return out


def _lyapunov(cfg, spec, steps):
    ex = cfg["experiment"]
    coc = Cocycle(_hessian(cfg, spec), SamplePath(int(ex.get("seed", 0)), spec.dim, steps))
    return lyapunov_spectrum(coc, int(ex.get("T", 1_000_000)), int(ex.get("qr_period", 10))).to_dict()


def _projector(cfg, spec, steps):
    ex = cfg["experiment"]
    seed = int(ex.get("seed", 0))
    qr = int(ex.get("qr_period", 10))
    coc = Cocycle(_hessian(cfg, spec), SamplePath(seed, spec.dim, steps))
    d_plus = ex.get("d_plus")
    if d_plus is None:
        d_plus = lyapunov_spectrum(coc, int(ex.get("T_spectrum", 200_000)), qr).d_plus
        if d_plus < 1:
            raise AssumptionViolation("no positive Lyapunov exponent")
    proj = unstable_projector(coc, int(ex.get("t_start", 0)), int(ex.get("S", 400)), int(d_plus), qr)
    return proj.to_dict()


def _certify(cfg, spec, steps):
    ex = cfg["experiment"]
    cert = certify(spec, _x_star(cfg, spec), steps, m=ex.get("m"), mu=ex.get("mu"),
                   eps=ex.get("eps"), seed=int(ex.get("seed", 0)),
                   T_spectrum=int(ex.get("T_spectrum", 200_000)),
                   qr_period=int(ex.get("qr_period", 10)))
    return cert.to_dict()


def _check_a3(cfg, spec, steps):
    ex = cfg["experiment"]
    seeds = ex.get("seeds") or range_seeds(int(ex.get("seed", 0)), int(ex.get("n_seeds", 32)))
    rep = check_assumption3(_hessian(cfg, spec), steps, seeds, ex.get("S_values", [100, 200, 400]),
                            T_spectrum=int(ex.get("T_spectrum", 200_000)),
                            qr_period=int(ex.get("qr_period", 10)))
    return rep.to_dict()


def _escape_mc(cfg, spec, steps):
    ex = cfg["experiment"]
    rep = harness.escape_mc(spec, _x_star(cfg, spec), float(ex.get("init_radius", 1e-3)),
                            int(ex.get("n_trials", 200)), float(ex.get("escape_radius", 0.5)),
                            int(ex.get("T_max", 50_000)), int(ex.get("seed", 0)), steps,
                            override=bool(ex.get("override", False)))
    plot = ex.get("plot_csv")
    if plot:
        finite = [t for t in rep.escape_times if not math.isinf(t)]
        grid = np.arange(0, (max(finite) if finite else 0) + 2)
        write_series_csv(plot, {"t": grid, "survival": rep.survival(grid)})
    return rep.to_dict()


def _classify(cfg, spec, steps):
    ex = cfg["experiment"]
    box = ex.get("init_box", [[-3.0] * spec.dim, [3.0] * spec.dim])
    rule = StopRule(int(ex.get("max_iter", 1_000_000)), float(ex.get("grad_tol", GRAD_TOL_DEFAULT)))
    rep = harness.classify_convergence(spec, box, int(ex.get("n_trials", 500)), rule,
                                       int(ex.get("seed", 0)), steps, inits=ex.get("inits"),
                                       match_radius=float(ex.get("match_radius", 1e-3)),
                                       override=bool(ex.get("override", False)))
    return rep.to_dict()


def _verify_decay(cfg, spec, steps):
    ex = cfg["experiment"]
    rep = harness.verify_linear_decay(_hessian(cfg, spec), steps, int(ex.get("m", spec.dim)),
                                      int(ex.get("n_windows", 10_000)), int(ex.get("seed", 0)))
    return dict(vars(rep))


def _verify_growth(cfg, spec, steps):
    ex = cfg["experiment"]
    H = _hessian(cfg, spec)
    if "x0" in ex:
        x0 = np.asarray(ex["x0"], dtype=float)
    else:
        x0 = np.linalg.eigh(H)[1][:, 0]
    rep = harness.verify_growth(H, steps, x0, int(ex.get("k_max", 100)), int(ex.get("m", spec.dim)),
                                int(ex.get("seed", 0)))
    plot = ex.get("plot_csv")
    if plot:
        write_series_csv(plot, {"k": np.arange(len(rep.norms)), "norm": rep.norms,
                                "lower_bound": rep.lower_bounds})
    return {"holds": rep.holds, "bound_holds": rep.bound_holds, "K": rep.K, "c": rep.c,
            "exact_mean_indicator": rep.exact_mean, "norms": rep.norms,
            "lower_bounds": rep.lower_bounds, "partial_sums": rep.partial_sums,
            "indicators": rep.stats.indicators, "growth_ratios": rep.stats.growth_ratios}


COMMANDS = {
    "optimize": (_optimize, "run coordinate descent from experiment.x0"),
    "lyapunov": (_lyapunov, "Lyapunov spectrum of the linearization at experiment.x_star"),
    "projector": (_projector, "finite-horizon unstable projector"),
    "certify": (_certify, "escape certificate for the saddle at experiment.x_star"),
    "check-a3": (_check_a3, "empirical non-zero projection check"),
    "escape-mc": (_escape_mc, "Monte Carlo escape times from a sphere around the saddle"),
    "classify": (_classify, "classify limits of runs from random inits"),
    "verify-decay": (_verify_decay, "window decay inequality for the quadratic model"),
    "verify-growth": (_verify_growth, "norm growth bound along Gauss-Seidel windows"),
}


def build_parser():
    p = _Parser(prog="rcgd-saddle", description="Randomized coordinate descent near strict saddles.")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name, (_, help_text) in COMMANDS.items():
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", "-c", help="JSON or INI-style config file")
        s.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override one config value (repeatable)")
        s.add_argument("--output", "-o", help="result JSON path (default $RCGD_OUTPUT_DIR/<command>.json)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else empty_config()
        apply_overrides(cfg, args.overrides)
        spec = build_objective(cfg)
        steps = build_stepsizes(cfg)
        result = COMMANDS[args.command][0](cfg, spec, steps)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"rcgd-saddle: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AssumptionViolation, CertificateInfeasible) as exc:
        print(f"rcgd-saddle: assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (NumericalError, AmbiguousSubspace, SingularStep, DegenerateMatrix) as exc:
        print(f"rcgd-saddle: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    path = write_result(output_path(args.command, args.output), args.command, cfg, result)
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
