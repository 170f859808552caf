"""Optimal allocation-constrained portfolios under Heston stochastic volatility."""

from .core import (
    CRISIS, TABLE1, IntervalConstraint, MarketParams, check_assumptions, merton_ratio,
    support_function, validate_params, zone_system,
)
from .policy import pi_star, pi_unconstrained, policy_curve, solve_A, solve_B, value_surface

__all__ = [
    "CRISIS", "TABLE1", "IntervalConstraint", "MarketParams", "check_assumptions",
    "merton_ratio", "support_function", "validate_params", "zone_system", "pi_star",
    "pi_unconstrained", "policy_curve", "solve_A", "solve_B", "value_surface",
]
