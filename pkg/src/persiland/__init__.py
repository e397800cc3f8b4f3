"""Persistence landscapes of 1-D signals as a differentiable network layer."""

from .exceptions import InvalidInputError, UndefinedMetricError
from .landscape import LandscapeSpec, PersistenceLandscape, sample_landscape
from .topology import BirthDeathPair, PersistenceDiagram, brute_force_pairs, compute_pairs

__version__ = "0.1.0"
