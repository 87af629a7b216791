"""One-period dynamics and cost accounting on single states.

Event order within a period: observe the state, place orders, incur costs,
parts fail and are replaced from stock (or backordered), then the oldest
pipeline slots arrive and clear backorders.
"""

from __future__ import annotations

from typing import Dict, Iterator, List, Tuple

import numpy as np

from .demand import failure_tables
from .params import (
    ContractViolation,
    CostBreakdown,
    Decision,
    FailureRealization,
    InstanceParams,
    SystemState,
)


def backorders(state: SystemState, params: InstanceParams) -> int:
    return params.n - state.n_c - state.n_a


def inventory_position(state: SystemState, params: InstanceParams) -> int:
    """On-hand stock plus everything in the pipelines, minus backorders."""
    return (
        state.s_c
        + state.s_a
        + params.q_c * sum(state.u_c)
        + sum(state.u_a)
        - backorders(state, params)
    )


def order_budget(state: SystemState, params: InstanceParams) -> int:
    return params.s_max - inventory_position(state, params)


def feasible_decisions(state: SystemState, params: InstanceParams) -> List[Decision]:
    """Every ``(x_c, x_a)`` keeping the inventory position at or below ``S``.

    Ordered lexicographically by ``(x_c, x_a)``, so the first minimiser found
    downstream is the smallest order.
    """
    budget = order_budget(state, params)
    out = []
    for x_c in range(budget // params.q_c + 1):
        for x_a in range(budget - x_c * params.q_c + 1):
            out.append(Decision(x_c, x_a))
    return out


def is_feasible(decision: Decision, state: SystemState, params: InstanceParams) -> bool:
    if decision.x_c < 0 or decision.x_a < 0:
        return False
    return decision.items(params) <= order_budget(state, params)


def allocate_replacements(
    state: SystemState,
    arrivals: Tuple[int, int],
    failures: FailureRealization,
    params: InstanceParams,
) -> Tuple[int, int, int, int]:
    """Split this period's replacement demand over stock and arrivals.

    Returns ``(y_c, y_a, z_c, z_a)``: items installed from CM/AM stock before
    the arrivals, then from the CM/AM arrivals.  The mode with the lower
    failure rate is installed first; on equal rates CM goes first.
    """
    a_c, a_a = arrivals
    demand = backorders(state, params) + failures.k_c + failures.k_a
    if params.cm_first:
        y_c = min(demand, state.s_c)
        y_a = min(demand - y_c, state.s_a)
        z_c = min(demand - y_c - y_a, a_c)
        z_a = min(demand - y_c - y_a - z_c, a_a)
    else:
        y_a = min(demand, state.s_a)
        y_c = min(demand - y_a, state.s_c)
        z_a = min(demand - y_c - y_a, a_a)
        z_c = min(demand - y_c - y_a - z_a, a_c)
    return y_c, y_a, z_c, z_a


def arrivals(state: SystemState, params: InstanceParams) -> Tuple[int, int]:
    """Items arriving at the end of the period (oldest pipeline slots)."""
    return params.q_c * state.u_c[0], state.u_a[0]


def transition(
    state: SystemState,
    decision: Decision,
    failures: FailureRealization,
    params: InstanceParams,
    check: bool = True,
) -> SystemState:
    if failures.k_c > state.n_c or failures.k_a > state.n_a or min(failures.k_c, failures.k_a) < 0:
        raise ValueError(f"failures {failures} invalid for {state}")
    a_c, a_a = arrivals(state, params)
    y_c, y_a, z_c, z_a = allocate_replacements(state, (a_c, a_a), failures, params)
    nxt = SystemState(
        n_c=state.n_c - failures.k_c + y_c + z_c,
        n_a=state.n_a - failures.k_a + y_a + z_a,
        s_c=state.s_c + a_c - y_c - z_c,
        s_a=state.s_a + a_a - y_a - z_a,
        u_c=state.u_c[1:] + (decision.x_c,),
        u_a=state.u_a[1:] + (decision.x_a,),
    )
    if check:
        try:
            nxt.check(params)
        except ContractViolation as err:
            raise ContractViolation(
                f"transition from {state} under {decision} with {failures} broke an invariant: {err}"
            ) from err
    return nxt


def enumerate_transitions(
    state: SystemState, decision: Decision, params: InstanceParams
) -> List[Tuple[SystemState, float]]:
    """All successors with their probabilities, duplicates merged."""
    pmf_c, pmf_a = failure_tables(params)
    merged: Dict[SystemState, float] = {}
    for k_c in range(state.n_c + 1):
        p_c = pmf_c[state.n_c, k_c]
        for k_a in range(state.n_a + 1):
            prob = p_c * pmf_a[state.n_a, k_a]
            nxt = transition(state, decision, FailureRealization(k_c, k_a), params, check=False)
            merged[nxt] = merged.get(nxt, 0.0) + prob
    return list(merged.items())


def iter_failures(state: SystemState, params: InstanceParams) -> Iterator[Tuple[FailureRealization, float]]:
    pmf_c, pmf_a = failure_tables(params)
    for k_c in range(state.n_c + 1):
        for k_a in range(state.n_a + 1):
            yield FailureRealization(k_c, k_a), pmf_c[state.n_c, k_c] * pmf_a[state.n_a, k_a]


def purchase_cost(decision: Decision, params: InstanceParams) -> float:
    return (
        (params.k_c if decision.x_c > 0 else 0.0)
        + (params.k_a if decision.x_a > 0 else 0.0)
        + params.c_c * decision.x_c * params.q_c
        + params.c_a * decision.x_a
    )


def period_cost(
    state: SystemState,
    decision: Decision,
    failures: FailureRealization,
    params: InstanceParams,
) -> CostBreakdown:
    """Realised cost of one period.

    Maintenance is charged on *expected* failures of the installed base while
    backorders use the realised failures, as in the cost function.
    """
    stock = state.s_c + state.s_a
    short = failures.k_c + failures.k_a + backorders(state, params) - stock
    return CostBreakdown(
        purchase=purchase_cost(decision, params),
        holding=params.h * stock,
        backorder=params.b * max(short, 0),
        maintenance=params.m * (params.mu_c * state.n_c + params.mu_a * state.n_a),
    )


def expected_period_cost(state: SystemState, decision: Decision, params: InstanceParams) -> float:
    return sum(prob * period_cost(state, decision, f, params).total for f, prob in iter_failures(state, params))


def expected_demand(state: SystemState, params: InstanceParams) -> Tuple[float, float]:
    """Mean and variance of next period's failures given the installed mix."""
    return (
        state.n_c * params.mu_c + state.n_a * params.mu_a,
        state.n_c * params.var_c + state.n_a * params.var_a,
    )


def sample_failures_for(state: SystemState, params: InstanceParams, rng: np.random.Generator) -> FailureRealization:
    pmf_c, pmf_a = failure_tables(params)
    k_c = int(rng.choice(state.n_c + 1, p=pmf_c[state.n_c, : state.n_c + 1]))
    k_a = int(rng.choice(state.n_a + 1, p=pmf_a[state.n_a, : state.n_a + 1]))
    return FailureRealization(k_c, k_a)
