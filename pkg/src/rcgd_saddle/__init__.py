"""Randomized coordinate gradient descent near strict saddle points.

The package simulates the method as a random dynamical system driven by a
counter-based sample path, estimates the Lyapunov spectrum of its
linearization at a saddle, and assembles finite-horizon escape certificates.
"""

from .errors import (
    AmbiguousSubspace,
    AssumptionViolation,
    CertificateInfeasible,
    NoUnstableDirection,
    NotASaddle,
    NotCritical,
    NumericalError,
    RCGDError,
    SingularStep,
)
from .harness import (
    classify_convergence,
    escape_mc,
    gs_window_stats,
    surjection_probability,
    verify_growth,
    verify_linear_decay,
)
from .linear_cocycle import Cocycle, lyapunov_spectrum, transition, unstable_projector
from .objective import (
    ObjectiveSpec,
    classify_critical_point,
    make_coupled_trig,
    make_objective,
    make_quadratic,
)
from .rcgd import StopRule, Trajectory, replay, run
from .saddle_cert import (
    SaddleCertificate,
    amplification_factor,
    certify,
    check_assumption3,
    rank_propagation_check,
)
from .sample_path import SamplePath, StepsizeRange, derive_seed

__version__ = "0.1.0"
