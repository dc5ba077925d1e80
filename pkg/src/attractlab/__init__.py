"""Numerical toolkit for attracting sets of holomorphic endomorphisms of P^k:
Green functions, attracting currents and their equilibrium measures, trapping
regions, ergodic diagnostics and parameter sweeps."""
from .io import VERSION as __version__
from .errors import (AttractLabError, BadMeasure, ConfigError, EmptyCloud, IndeterminacyHit,
                     InvalidPoint, NullSeed, ParameterError, RangeError, ResolutionError,
                     SolverError)

__all__ = ["__version__", "AttractLabError", "BadMeasure", "ConfigError", "EmptyCloud",
           "IndeterminacyHit", "InvalidPoint", "NullSeed", "ParameterError", "RangeError",
           "ResolutionError", "SolverError"]
