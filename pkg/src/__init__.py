"""
Homogeneous Young measures of piecewise functions

Constructs the Young measure of a piecewise-defined function on an interval
(atomic, inverse-Jacobian density, pushforward and Stieltjes forms), checks it
against independent numerical oracles and probes weak convergence of
measure and density sequences.
"""

from .construct import (
    atomic_young_measure,
    build_measures,
    cross_validate,
    density_young_measure,
    pushforward_young_measure,
    stieltjes_from_monotone,
    verify_fundamental_identity,
)
from .exprfn import PartitionedFunction, parse_expression, validate
from .utils import logger, setup_logger

__version__ = "0.1.0"
__all__ = [
    "PartitionedFunction",
    "parse_expression",
    "validate",
    "atomic_young_measure",
    "density_young_measure",
    "pushforward_young_measure",
    "stieltjes_from_monotone",
    "verify_fundamental_identity",
    "cross_validate",
    "build_measures",
    "logger",
    "setup_logger",
]
