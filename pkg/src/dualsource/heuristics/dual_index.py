"""Dual-index ordering: separate order-up-to levels for the fast and slow source.

The expedited position counts net stock, all AM orders and the CM orders
that land within the AM lead time.  The AM order tops it up to ``z_a``;
the CM order then tops the full position (AM order included) up to ``z_c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..core import batch
from ..core.demand import cdf_table, demand_pmf, failure_tables, sample_failures
from ..core.params import InstanceParams, SystemState
from ..core.policy import Policy
from ..sim.engine import UniformStreams

OVERSHOOT_PERIODS = 100_000
COST_PERIODS = 100_000
WARMUP = 1_000
REPLICATIONS = 10


@dataclass(frozen=True)
class DualIndexParams:
    z_a: int
    delta: int

    def __post_init__(self):
        if self.z_a < 0 or self.delta < 0:
            raise ValueError("z_a and delta must be >= 0")

    @property
    def z_c(self) -> int:
        return self.z_a + self.delta


class DualIndexPolicy(Policy):
    name = "dual_index"

    def __init__(self, params: InstanceParams, levels: DualIndexParams):
        if levels.z_c > params.s_max:
            raise ValueError(f"z_c = {levels.z_c} exceeds S = {params.s_max}")
        self.params = params
        self.levels = levels

    def decide_batch(self, states: np.ndarray) -> np.ndarray:
        return dual_index_orders(states, self.params, self.levels.z_a, self.levels.z_c)

    def describe(self) -> dict:
        return {"name": self.name, "z_a": self.levels.z_a, "delta": self.levels.delta}

    def __repr__(self) -> str:
        return f"DualIndexPolicy(z_a={self.levels.z_a}, z_c={self.levels.z_c})"


def dual_index_orders(states: np.ndarray, params: InstanceParams, z_a, z_c) -> np.ndarray:
    """Orders for every row; ``z_a``/``z_c`` may be scalars or per-row arrays."""
    ip_a = batch.expedited_position(states, params)
    ip_c = batch.inventory_position(states, params)
    budget = np.maximum(params.s_max - ip_c, 0)
    x_a = np.minimum(np.maximum(z_a - ip_a, 0), budget)
    short = np.maximum(z_c - (ip_c + x_a), 0)
    x_c = np.minimum(-(-short // params.q_c), (budget - x_a) // params.q_c)
    return np.stack([x_c, x_a], axis=1).astype(np.int64)


def dual_index_decide(state: SystemState, levels: DualIndexParams, params: InstanceParams):
    from ..core.params import Decision

    x = dual_index_orders(state.to_array()[None, :], params, levels.z_a, levels.z_c)[0]
    return Decision(int(x[0]), int(x[1]))


@dataclass
class DualIndexResult:
    policy: DualIndexPolicy
    cost: float
    costs: Dict[int, float] = field(repr=False)  # delta -> simulated cost at z_a*(delta)
    levels: Dict[int, int] = field(repr=False)  # delta -> z_a*(delta)
    rho: float = 0.0  # AM share of ordered items under the returned policy


def max_delta(params: InstanceParams) -> int:
    """Upper end of the search: demand over the lead-time gap plus three deviations."""
    gap = params.l_c - params.l_a
    mu, var = max((params.mu_c, params.var_c), (params.mu_a, params.var_a))
    periods = gap + 1
    mean = periods * mu * params.n
    sd = math.sqrt(periods * var * params.n)
    return min(params.s_max, math.ceil(mean) + math.ceil(3 * sd))


def _simulate(params, z_a, z_c, uniforms, warmup):
    """Run many (z_a, z_c) rows on shared streams.

    ``uniforms`` has shape ``(T, R, 2)``; each of the ``K`` level pairs is
    replicated over the ``R`` streams.  Returns per-pair average cost, AM
    share of ordered items and the pooled overshoot histogram.
    """
    z_a = np.repeat(np.asarray(z_a, dtype=np.int64), uniforms.shape[1])
    z_c = np.repeat(np.asarray(z_c, dtype=np.int64), uniforms.shape[1])
    rows = len(z_a)
    k = rows // uniforms.shape[1]
    pmf_c, pmf_a = failure_tables(params)
    cdf_c, cdf_a = cdf_table(pmf_c), cdf_table(pmf_a)
    states = np.tile(SystemState.initial(params).to_array(), (rows, 1))
    cost = np.zeros(rows)
    ordered = np.zeros((rows, 2))
    over = np.zeros((k, params.s_max + params.n + 2), dtype=np.int64)
    pair = np.arange(rows) // uniforms.shape[1]
    for t, u in enumerate(uniforms):
        u = np.tile(u, (k, 1))
        x = dual_index_orders(states, params, z_a, z_c)
        if t >= warmup:
            excess = np.maximum(batch.expedited_position(states, params) - z_a, 0)
            np.add.at(over, (pair, np.minimum(excess, over.shape[1] - 1)), 1)
        k_c = sample_failures(cdf_c, states[:, 0], u[:, 0])
        k_a = sample_failures(cdf_a, states[:, 1], u[:, 1])
        states, c = batch.step(states, x, k_c, k_a, params)
        if t >= warmup:
            cost += c.sum(axis=1)
            ordered += x
    periods = uniforms.shape[0] - warmup
    per_pair = cost.reshape(k, -1).mean(axis=1) / periods
    items_a = ordered[:, 1].reshape(k, -1).sum(axis=1)
    items_c = params.q_c * ordered[:, 0].reshape(k, -1).sum(axis=1)
    total = items_a + items_c
    rho = np.divide(items_a, total, out=np.zeros(k), where=total > 0)
    return per_pair, rho, over


def newsvendor_level(params: InstanceParams, overshoot: np.ndarray) -> int:
    """Smallest ``z`` with ``P(D - O <= z) >= b / (b + h)``.

    ``D`` is demand over ``l_a + 1`` periods of the fully installed base and
    ``O`` the overshoot (histogram counts).
    """
    fractile = params.b / (params.b + params.h) if params.b + params.h > 0 else 1.0
    periods = params.l_a + 1
    mu, var = max((params.mu_c, params.var_c), (params.mu_a, params.var_a))
    top = params.s_max + params.n
    d = demand_pmf(periods * mu * params.n, periods * var * params.n, params.demand_family, top)
    o = overshoot / overshoot.sum()
    # distribution of D - O on the support [-len(o)+1, top]
    diff = np.convolve(d, o[::-1])
    offset = len(o) - 1
    cdf = np.cumsum(diff)
    idx = int(np.searchsorted(cdf, fractile - 1e-12))
    return max(0, min(idx - offset, params.s_max))


def _uniforms(seed: int, periods: int, replications: int) -> np.ndarray:
    per_rep = -(-periods // replications)
    return UniformStreams(seed, replications).draw(WARMUP + per_rep)


def dual_index_solve(
    params: InstanceParams,
    seed: int = 0,
    overshoot_periods: int = OVERSHOOT_PERIODS,
    cost_periods: int = COST_PERIODS,
    replications: int = REPLICATIONS,
) -> DualIndexResult:
    """Search over ``delta``; ``z_a`` for each is the newsvendor level under its overshoot."""
    deltas = np.arange(max_delta(params) + 1)
    # overshoot does not depend on z_a; measure it at a mid-range level
    probe = np.minimum(math.ceil(params.n * max(params.mu_c, params.mu_a) * (params.l_a + 1)), params.s_max - deltas)
    u = _uniforms(seed, overshoot_periods, replications)
    _, _, over = _simulate(params, probe, probe + deltas, u, WARMUP)
    z_a = np.array([min(newsvendor_level(params, over[i]), params.s_max - d) for i, d in enumerate(deltas)])

    if cost_periods != overshoot_periods:
        u = _uniforms(seed, cost_periods, replications)
    costs, rho, _ = _simulate(params, z_a, z_a + deltas, u, WARMUP)
    best = int(np.argmin(costs))
    levels = DualIndexParams(int(z_a[best]), int(deltas[best]))
    return DualIndexResult(
        policy=DualIndexPolicy(params, levels),
        cost=float(costs[best]),
        costs={int(d): float(c) for d, c in zip(deltas, costs)},
        levels={int(d): int(z) for d, z in zip(deltas, z_a)},
        rho=float(rho[best]),
    )


def measure_rho(
    policy: Policy, params: InstanceParams, periods: int = 100_000, seed: int = 0, replications: int = REPLICATIONS
) -> float:
    """AM share of ordered items over a long simulation."""
    from ..sim.engine import run_batch

    stats = run_batch(policy, params, periods=-(-periods // replications), warmup=WARMUP, replications=replications, seed=seed)
    items_a = stats.ordered[:, 1].sum()
    items_c = params.q_c * stats.ordered[:, 0].sum()
    return float(items_a / (items_a + items_c)) if items_a + items_c else 0.0


def exhaustive_search(
    params: InstanceParams, seed: int = 0, periods: int = COST_PERIODS, replications: int = REPLICATIONS
) -> Dict[tuple, float]:
    """Simulated cost of every ``(delta, z_a)`` with ``z_a + delta <= S``."""
    pairs = [(d, z) for d in range(params.s_max + 1) for z in range(params.s_max - d + 1)]
    u = _uniforms(seed, periods, replications)
    za = np.array([z for _, z in pairs])
    dl = np.array([d for d, _ in pairs])
    costs, _, _ = _simulate(params, za, za + dl, u, WARMUP)
    return {p: float(c) for p, c in zip(pairs, costs)}
