"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(LabError, ValueError):
    pass


class HyperbolicityError(LabError):
    """An eigenvalue sits too close to the imaginary axis."""


class OrthogonalityError(LabError):
    """Stable and unstable invariant subspaces are not orthogonal."""


class DivergentIntegralError(LabError):
    """A Gramian integral over an infinite horizon does not converge."""


class ConstraintError(LabError):
    """A definiteness or range constraint on derived data fails."""


class NotPositiveDefiniteError(ConstraintError):
    pass


class RationalityError(LabError):
    """Torus frequencies are rationally dependent."""


class SmallDivisorError(LabError):
    def __init__(self, message: str, mode: tuple[int, int] | None = None):
        super().__init__(message)
        self.mode = mode


class QuadratureError(LabError):
    """Quadrature failed its degree-doubling convergence test."""


class ShootingError(LabError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class IntegratorError(LabError):
    pass


class ConvergenceError(LabError):
    pass


class PositivityError(LabError):
    """Principal eigenvector changes sign."""


class ResolutionError(LabError):
    """Grid too coarse for the requested diffusion strength."""


class ConfigError(LabError):
    pass
