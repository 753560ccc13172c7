"""Exception hierarchy shared by every module."""


class TetradError(Exception):
    """Base class for all package errors."""


class StencilOutOfDomain(TetradError):
    """A finite-difference node left the chart domain; shrink the step or move the probe."""


class ChartDomain(TetradError):
    """A probe point lies outside the chart domain."""


class SingularFrame(TetradError):
    """The frame matrix is (numerically) not invertible."""


class NonPositiveDeterminant(TetradError):
    """A GL transform would reverse orientation."""


class SingularKilling(TetradError):
    """The Killing tensor is degenerate, so affine invariants are undefined."""


class DegenerateTensor(TetradError):
    """A tensor has an eigenvalue below the degeneracy threshold."""


class NotSemisimple(TetradError):
    """The structure constants have a degenerate Killing form."""


class NonPositiveLambda(TetradError):
    """The breathing function is not strictly positive."""


class NonMonotoneGauge(TetradError):
    """A radial gauge map is not strictly increasing and positive."""


class ProjectionFailure(TetradError):
    """A residual is not isotropic to within the projection tolerance."""


class FitFailure(TetradError):
    """Residual samples do not show a clean power law over the fitting window."""


class ConfigError(TetradError):
    """Invalid configuration or specification document."""
