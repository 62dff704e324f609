"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A config value or combination of values is unusable."""


class HypothesisError(ConfigurationError):
    """A verification run was asked to check a theorem whose hypothesis the
    config violates. ``inequality`` names the failed precondition."""

    def __init__(self, inequality: str, message: str = ""):
        self.inequality = inequality
        super().__init__(message or f"hypothesis violated: {inequality}")


class NotAFixedPointError(ValueError):
    """A state handed to fixed-point-only analysis is not one at tolerance."""


class EigenSolveError(RuntimeError):
    """The dense eigensolver failed to converge; carries diagnostics."""
