"""Exception types shared across the library and the CLI."""


class LogsplitError(Exception):
    """Base class for all library-specific failures."""


class DegenerateKnots(LogsplitError):
    """Divided differences require pairwise-distinct abscissae."""


class OutOfSupport(LogsplitError):
    """Derivative evaluation requested outside the spline support."""


class SingularSystem(LogsplitError):
    """Least-squares collocation matrix is rank deficient."""


class InvalidSupport(LogsplitError):
    """Support interval is empty or inverted."""


class NoMaximizer(LogsplitError):
    """The log-likelihood is unbounded for this sample; no finite maximizer exists."""


class NonConvergence(LogsplitError):
    """Newton iteration budget exhausted before reaching tolerance."""


class DegreeTooHigh(LogsplitError):
    """Interpolation degree exceeds what the spline order's smoothness supports."""


class DegenerateProduct(LogsplitError):
    """Interpolated product integrated to a non-positive value."""


class GridTooCoarse(LogsplitError):
    """Node-spacing rule produced no usable interpolation grid."""


class SupportMismatch(LogsplitError):
    """Subset estimators do not share a common support."""


class EmptySubset(LogsplitError):
    """A subset sample file contained no values."""


class ParseError(LogsplitError):
    """A sample file contained a malformed row."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)


class ExperimentAborted(LogsplitError):
    """Too many replications failed to produce estimators."""
