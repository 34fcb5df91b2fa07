"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid experiment configuration, pattern, or grid parameters."""


class NonConvergenceError(RuntimeError):
    """Iterative solver hit its iteration cap before reaching tolerance.

    Carries the partial state so callers can inspect diagnostics.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class StencilDecompositionError(RuntimeError):
    """A coefficient matrix could not be split into nonnegative directional
    weights with the configured stencil."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point
