"""Iterative weight adjustment around a single-failure-rate dual-sourcing solver.

The inner solver sees one blended failure rate for the whole installed base.
Its AM share of ordered items ``rho`` implies a steady-state AM share of the
installed base ``gamma`` (AM items fail faster, so they are replaced more
often than their share of the base).  The blend is re-weighted with the new
``gamma`` until it settles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

from ..core.params import InstanceParams
from ..core.policy import Policy
from ..exact.bounds import simplify_params

log = logging.getLogger(__name__)

DEFAULT_PSI = 0.2
MAX_ITERATIONS = 50
CYCLE_TOL = 1e-6

InnerSolver = Callable[[InstanceParams], Tuple[Policy, float]]
Evaluator = Callable[[Policy], float]


def gamma_from_rho(rho: float, mu_c: float, mu_a: float) -> float:
    """Installed-base AM share implied by an AM share ``rho`` of replacements."""
    den = (1.0 - rho) * mu_a + rho * mu_c
    return rho * mu_c / den


def rho_from_gamma(gamma: float, mu_c: float, mu_a: float) -> float:
    den = gamma * mu_a + (1.0 - gamma) * mu_c
    return gamma * mu_a / den


@dataclass
class IwaStep:
    iteration: int
    gamma: float
    rho: float
    cost: float
    policy: Policy = field(repr=False)


@dataclass
class IwaResult:
    gamma_star: float
    rho_star: float
    iterations: int
    inner_policy: Policy
    cost: float
    converged: bool
    oscillated: bool
    trace: List[IwaStep] = field(repr=False)

    def trace_rows(self):
        for s in self.trace:
            yield (s.iteration, s.gamma, s.rho, s.cost)


def iwa(
    params: InstanceParams,
    inner_solver: InnerSolver,
    evaluator: Optional[Evaluator] = None,
    psi: float = DEFAULT_PSI,
    max_iterations: int = MAX_ITERATIONS,
) -> IwaResult:
    """Run the weight iteration starting from an all-CM installed base.

    Iteration ``j`` solves at ``gamma_j`` and stops once
    ``|gamma_j - gamma_{j-1}| < psi``.  Without convergence (cap reached or a
    previous ``gamma`` revisited) the cheapest iterate under ``evaluator`` is
    returned; without an evaluator, the last.
    """
    if not 0.0 < psi < 1.0:
        raise ValueError("psi must lie in (0, 1)")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    trace: List[IwaStep] = []
    gamma = 0.0
    converged = oscillated = False
    for j in range(1, max_iterations + 1):
        policy, rho = inner_solver(simplify_params(params, gamma))
        rho = min(max(float(rho), 0.0), 1.0)
        cost = float(evaluator(policy)) if evaluator is not None else float("nan")
        trace.append(IwaStep(j, gamma, rho, cost, policy))
        log.info("iwa %d: gamma=%.6f rho=%.6f cost=%.6g", j, gamma, rho, cost)
        if j > 1 and abs(gamma - trace[-2].gamma) < psi:
            converged = True
            break
        nxt = min(max(gamma_from_rho(rho, params.mu_c, params.mu_a), 0.0), 1.0)
        if any(abs(nxt - s.gamma) < CYCLE_TOL for s in trace[:-1]):
            oscillated = True
            log.warning("iwa revisits gamma=%.6f after %d iterations", nxt, j)
            break
        gamma = nxt
    if converged or evaluator is None:
        chosen = trace[-1]
    else:
        if not oscillated:
            log.warning("iwa hit the %d-iteration cap without converging", max_iterations)
        chosen = min(trace, key=lambda s: (s.cost, s.iteration))
    return IwaResult(
        gamma_star=chosen.gamma,
        rho_star=chosen.rho,
        iterations=len(trace),
        inner_policy=chosen.policy,
        cost=chosen.cost,
        converged=converged,
        oscillated=oscillated,
        trace=trace,
    )


def exact_inner_solver(**pi_kwargs) -> InnerSolver:
    """Optimal single-rate policy on the merged-mode model and its steady-state ``rho``."""
    from ..exact import build_transitions, enumerate_states, policy_iteration, reachable_evaluation

    def solve(single: InstanceParams):
        table = build_transitions(enumerate_states(single, "simplified"))
        sol = policy_iteration(single, "simplified", table=table, **pi_kwargs)
        return sol.policy, reachable_evaluation(sol.policy, table).am_fraction

    return solve


def dual_index_inner_solver(seed: int = 0, rho_periods: int = 100_000) -> InnerSolver:
    """Best dual-index policy for the single rate; ``rho`` from a long simulation."""
    from .dual_index import dual_index_solve, measure_rho

    def solve(single: InstanceParams):
        res = dual_index_solve(single, seed=seed)
        return res.policy, measure_rho(res.policy, single, periods=rho_periods, seed=seed)

    return solve
