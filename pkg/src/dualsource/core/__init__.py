"""Data model, failure distributions and one-period dynamics."""

from .demand import failure_pmf, failure_tables, nbinom_parameters
from .model import (
    allocate_replacements,
    backorders,
    enumerate_transitions,
    expected_period_cost,
    feasible_decisions,
    inventory_position,
    is_feasible,
    period_cost,
    transition,
)
from .params import (
    ContractViolation,
    CostBreakdown,
    Decision,
    FailureRealization,
    InstanceParams,
    SystemState,
)

__all__ = [
    "ContractViolation",
    "CostBreakdown",
    "Decision",
    "FailureRealization",
    "InstanceParams",
    "SystemState",
    "allocate_replacements",
    "backorders",
    "enumerate_transitions",
    "expected_period_cost",
    "failure_pmf",
    "failure_tables",
    "feasible_decisions",
    "inventory_position",
    "is_feasible",
    "nbinom_parameters",
    "period_cost",
    "transition",
]
