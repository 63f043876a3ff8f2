"""Exception hierarchy shared by all modules."""


class ShrinkerSpectraError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(ShrinkerSpectraError, ValueError):
    """Invalid half-plane point or cross-section."""


class CurveFormatError(GeometryError):
    """A curve file could not be parsed."""


class SolverError(ShrinkerSpectraError):
    """Shooting or integration failure."""


class AxisError(SolverError):
    """A trajectory came too close to the axis of rotation."""


class BlowUpError(SolverError):
    """A trajectory ran past the arclength cap without closing."""


class NoSignChangeError(SolverError):
    """The shooting bracket does not straddle a closed orbit."""


class ConvergenceError(SolverError):
    """Root finding did not reach the requested tolerance."""


class SpectralError(ShrinkerSpectraError, ValueError):
    """Operator assembly or eigensolver failure."""


class InertiaMismatchError(SpectralError):
    """Two independent negative-eigenvalue counts disagree."""


class CoverageError(ShrinkerSpectraError, ValueError):
    """Not enough Fourier modes were supplied to aggregate an index."""


class BoundViolationError(ShrinkerSpectraError):
    """A computed count falls outside a proven bound."""

    def __init__(self, message, k=None, value=None, lower=None, upper=None):
        super().__init__(message)
        self.k = k
        self.value = value
        self.lower = lower
        self.upper = upper
