"""Exception types raised across the package."""


class FlipchipError(ValueError):
    """Base class for all domain errors."""


class UnlevelableError(FlipchipError):
    """Leveling region is degenerate (too few or collinear valid samples)."""


class EmptySelectionError(FlipchipError):
    pass


class RootNotFoundError(FlipchipError):
    pass


class UnreachableImpedanceError(FlipchipError):
    def __init__(self, message, z_low=None, z_high=None):
        super().__init__(message)
        self.z_low = z_low
        self.z_high = z_high


class NoResonanceError(FlipchipError):
    pass


class FitError(FlipchipError):
    """A fit did not converge; ``diagnostics`` carries solver details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
