"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or incomplete network/propagation configuration."""


class ConvergenceError(RuntimeError):
    """A numerical integral failed to reach the requested tolerance.

    Attributes
    ----------
    achieved : float
        The error estimate that was actually reached.
    """

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved


class DegenerateBranchError(ValueError):
    """The requested association branch has zero probability."""
