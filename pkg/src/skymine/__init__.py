"""Desk-scale time-domain sky-survey toolkit: partitioned catalog store,
spherical search, transient/mover/statistics mining, and a capacity planner.
"""

from .errors import ValidationError, StoreIOError

__version__ = "0.1.0"

__all__ = ["ValidationError", "StoreIOError", "__version__"]
