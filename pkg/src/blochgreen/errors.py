"""Exception types raised across the package."""


class BlochGreenError(Exception):
    """Base class for all package errors."""


class ProfileError(BlochGreenError, ValueError):
    """Malformed or inconsistent coefficient data."""


class IntegrationError(BlochGreenError, RuntimeError):
    """The first-order ODE integrator failed (typically step-size underflow)."""


class SpectrumError(BlochGreenError):
    """A spectral parameter sits (numerically) on the spectrum.

    ``detail`` carries the offending quantity, e.g. the Floquet multiplier
    closest to the unit circle or the smallest singular value of I - F.
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


class BranchCollision(BlochGreenError):
    def __init__(self, message, xi=None):
        super().__init__(message)
        self.xi = xi


class ZeroOnContour(BlochGreenError):
    pass


class ConvergenceError(BlochGreenError):
    """Quadrature, fixed-point or time-stepping did not settle."""


class ConfigError(BlochGreenError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
