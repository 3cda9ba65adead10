"""Figure rendering for pinch-grasp simulation run logs.

Consumes only the documented CSV log format; it has no dependency on the
simulator package.
"""

from .errors import EmptyLog, MissingColumn, PlotError
from .figures import KINDS, PlotSpec, build_figure, render
from .loader import RunLog, load_log

__all__ = [
    "EmptyLog",
    "KINDS",
    "MissingColumn",
    "PlotError",
    "PlotSpec",
    "RunLog",
    "build_figure",
    "load_log",
    "render",
]
