"""Exception types raised by the geometry, solver and flow layers."""


class MinkflowError(Exception):
    """Base class for all package errors."""


class InputError(MinkflowError, ValueError):
    """Malformed or out-of-contract input data."""


class ConvexityError(MinkflowError, ValueError):
    """Curvature radius h'' + h dropped to or below the positivity floor.

    Carries the index of the worst offending grid angle.
    """

    def __init__(self, message, index=None, value=None):
        super().__init__(message)
        self.index = index
        self.value = value


class CollarError(MinkflowError, ValueError):
    """Requested collar does not embed inside the body."""


class MeshError(MinkflowError, ValueError):
    """Collar mesh is degenerate (non-positive triangle area)."""


class SolverError(MinkflowError, RuntimeError):
    """Nonlinear solve failed to reach the residual tolerance.

    Carries the last relative residual norm.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateGradientError(MinkflowError, RuntimeError):
    """Extracted boundary gradient is zero or negative somewhere."""

    def __init__(self, message, index=None, value=None):
        super().__init__(message)
        self.index = index
        self.value = value


class StepError(MinkflowError, RuntimeError):
    """Time step failed below dt_min.  Carries the last diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class StationarityError(MinkflowError, ValueError):
    """Operation requires a stationary state and the input is not one."""
