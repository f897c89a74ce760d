"""Inverse multi-objective wall-thickness optimization for a multi-cell side sill.

A calibrated synthetic crash evaluator (or an external solver speaking the
JSON-lines wire protocol) prices designs; a tuned MLP surrogate stands in for
it inside the optimizers; a genetic algorithm, network inversion and an
actor-critic agent compete on the shared scalarized objective.
"""

from .design_space import (
    DesignAction,
    DesignSpace,
    ParameterSpec,
    ThicknessVector,
    default_space,
    reduced_space,
)
from .objective import ScalingReference, TargetSpec, fit_scaling_reference
from .oracle import ObjectiveTriple, OracleConfig, calibrated_config

__version__ = "0.1.0"

__all__ = [
    "DesignAction",
    "DesignSpace",
    "ObjectiveTriple",
    "OracleConfig",
    "ParameterSpec",
    "ScalingReference",
    "TargetSpec",
    "ThicknessVector",
    "calibrated_config",
    "default_space",
    "fit_scaling_reference",
    "reduced_space",
    "__version__",
]
