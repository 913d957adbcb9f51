"""Exception hierarchy shared by all modules."""


class RCGDError(Exception):
    """Base class for package errors."""


class AssumptionViolation(RCGDError):
    """A standing hypothesis (bounded Hessian, stepsize range, saddle structure) fails."""


class NumericalError(RCGDError):
    """Non-finite value or overflow during a computation.

    ``state`` carries the last finite iterate when one is available.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NotCritical(RCGDError):
    def __init__(self, grad_norm, grad_tol):
        super().__init__(f"gradient norm {grad_norm:.3e} exceeds grad_tol {grad_tol:.3e}")
        self.grad_norm = grad_norm
        self.grad_tol = grad_tol


class NotASaddle(AssumptionViolation):
    pass


class NoUnstableDirection(AssumptionViolation):
    pass


class DegenerateMatrix(RCGDError):
    pass


class SingularStep(RCGDError):
    pass


class AmbiguousSubspace(RCGDError):
    """Singular-value gap at the requested cut is too small to define the subspace."""

    def __init__(self, message, log_gap=None):
        super().__init__(message)
        self.log_gap = log_gap


class CertificateInfeasible(RCGDError):
    def __init__(self, message, blocking=None):
        super().__init__(message)
        self.blocking = blocking
