"""Deterministic time-to-target simulator and planner for federated learning
over heterogeneous edge servers."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
