"""Optimal consumption and terminal wealth under Tsallis-entropy ambiguity."""

from .adjoint import (
    AdjointPair,
    ResidualStats,
    adjoint_identity_sides,
    adjoints,
    distorted_density,
    max_principle_residuals,
)
from .example import NoConsumptionReport, dual_terminal_wealth, no_consumption_example
from .fbsystem import FBResult, consumption_forms_gap, solve_fb_system, strategy_from_state
from .shooting import OptimizationReport, auxiliary_value, dual_value, shoot_for_budget

__all__ = [
    "AdjointPair",
    "FBResult",
    "NoConsumptionReport",
    "OptimizationReport",
    "ResidualStats",
    "adjoint_identity_sides",
    "adjoints",
    "auxiliary_value",
    "consumption_forms_gap",
    "distorted_density",
    "dual_terminal_wealth",
    "dual_value",
    "max_principle_residuals",
    "no_consumption_example",
    "shoot_for_budget",
    "solve_fb_system",
    "strategy_from_state",
]
