"""Exact average-cost solution of the dual-sourcing MDP on small instances."""

from .bounds import determine_S, simplify_params
from .solver import (
    ExactSolution,
    MultichainError,
    SolverError,
    TabularPolicy,
    bellman_residual,
    policy_evaluation,
    policy_iteration,
    reachable_evaluation,
    stationary_distribution,
    steady_state_am_fraction,
)
from .statespace import StateSpace, StateSpaceTooLarge, count_states, enumerate_states
from .transitions import TransitionTable, build_transitions

__all__ = [
    "ExactSolution",
    "MultichainError",
    "SolverError",
    "StateSpace",
    "StateSpaceTooLarge",
    "TabularPolicy",
    "TransitionTable",
    "bellman_residual",
    "build_transitions",
    "count_states",
    "determine_S",
    "enumerate_states",
    "policy_evaluation",
    "policy_iteration",
    "reachable_evaluation",
    "simplify_params",
    "stationary_distribution",
    "steady_state_am_fraction",
]
