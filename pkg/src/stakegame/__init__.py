"""Equilibrium engine for the Ethereum staking market under alternative issuance schedules."""

__version__ = "0.1.0"

from .equilibrium import ComparisonReport, Equilibrium, check_participation, compare, solve
from .errors import ConfigError, ConvergenceError, DomainError, StakeGameError
from .issuance import CURRENT, TEMPERED, IssuanceSchedule, get_schedule, issuance_yield, yield_derivative
from .market import (AgentClass, CostTriple, MarketConfig, baseline_config, best_response,
                     foc_residual, inattentive_config, marginal_cost, mev_variance_config, profit)

__all__ = [
    "IssuanceSchedule", "CURRENT", "TEMPERED", "get_schedule", "issuance_yield", "yield_derivative",
    "CostTriple", "AgentClass", "MarketConfig", "profit", "marginal_cost", "foc_residual",
    "best_response", "baseline_config", "mev_variance_config", "inattentive_config",
    "Equilibrium", "ComparisonReport", "solve", "compare", "check_participation",
    "StakeGameError", "DomainError", "ConfigError", "ConvergenceError",
]
