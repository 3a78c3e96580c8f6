"""Distributed recursive least squares with growing regressor dimensions.

A simulation library for networks of agents that jointly estimate a large
(effectively infinite-dimensional) regression parameter over time-varying,
weight-balanced digraphs, truncating the regressor to a dimension that grows
with the horizon.  Ships the recursion, a closed-form cross-check, trajectory
simulators, graph-sequence tooling, and the guarantee diagnostics
(excitation levels, truncation energies, regret).
"""

from . import analysis, estimator, graph, model, numerics
from .errors import (
    ConfigError,
    ContractViolation,
    MissingArtifact,
    SimulationDivergence,
    SingularMatrixError,
)
from .streams import substream

__version__ = "0.1.0"

__all__ = [
    "analysis",
    "estimator",
    "graph",
    "model",
    "numerics",
    "substream",
    "ConfigError",
    "ContractViolation",
    "MissingArtifact",
    "SimulationDivergence",
    "SingularMatrixError",
]
