"""Hawkes process calibration and rolling branching-ratio scans."""

from hawkscan.core import (
    ClusterStats,
    EventSeries,
    HawkesParams,
    branching_ratio,
    compensator,
    endogenous_fraction,
    intensity,
    log_likelihood,
    log_likelihood_gradient,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterStats",
    "EventSeries",
    "HawkesParams",
    "branching_ratio",
    "compensator",
    "endogenous_fraction",
    "intensity",
    "log_likelihood",
    "log_likelihood_gradient",
    "__version__",
]
