"""Failure types for table parsing and figure preconditions."""


class PlotvizError(Exception):
    """Base class for plotviz failures."""


class ParseError(PlotvizError):
    """A table file is missing required columns or has malformed rows."""


class EmptyTable(PlotvizError):
    """A table file parsed but contained no data rows."""


class InsufficientData(PlotvizError):
    """Not enough points for the requested figure."""
