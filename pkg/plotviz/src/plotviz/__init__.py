"""Render figures from the estimator CLI's CSV/JSON outputs."""

from .errors import EmptyTable, InsufficientData, ParseError, PlotvizError
from .figures import plot_densities, plot_mise

__version__ = "0.1.0"
