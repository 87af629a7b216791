"""Monte-Carlo evaluation of policies with common random numbers.

All replications advance in lock-step as rows of one array, so a policy is
queried once per period for the whole batch.  Replication ``r`` draws its
uniforms from ``SeedSequence(seed, spawn_key=(r,))``: a given
``(seed, r)`` sees the same failure quantiles whatever the policy, the
replication count or the chunking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import batch
from ..core.demand import cdf_table, failure_tables, sample_failures
from ..core.params import InstanceParams, SystemState
from ..core.policy import Policy

DEFAULT_PERIODS = 10_000
DEFAULT_WARMUP = 1_000
Z95 = 1.959963984540054
COST_COLUMNS = ("purchase", "holding", "backorder", "maintenance")


class UniformStreams:
    """Per-replication uniform streams, two numbers (CM, AM) per period."""

    def __init__(self, seed: int, replications: int, first_replication: int = 0):
        self._gens = [
            np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(first_replication + r,))))
            for r in range(replications)
        ]

    def draw(self, periods: int) -> np.ndarray:
        """Array of shape ``(periods, replications, 2)``."""
        return np.stack([g.random((periods, 2)) for g in self._gens], axis=1)


@dataclass
class BatchStats:
    """Per-replication accumulators after warmup."""

    periods: int
    costs: np.ndarray  # (R, 4) summed cost components
    ordered: np.ndarray  # (R, 2) CM batches, AM items
    am_installed: np.ndarray  # (R,) summed n_a / (n_c + n_a)
    order_hist_c: np.ndarray  # (R, max_batches + 1)
    order_hist_a: np.ndarray  # (R, S + 1)
    final_states: np.ndarray
    trace: Optional[np.ndarray] = None  # (T, R) per-period total cost when requested

    @property
    def replications(self) -> int:
        return self.costs.shape[0]

    def average_cost(self) -> np.ndarray:
        return self.costs.sum(axis=1) / self.periods


def run_batch(
    policy: Policy,
    params: InstanceParams,
    periods: int = DEFAULT_PERIODS,
    warmup: int = DEFAULT_WARMUP,
    replications: int = 1,
    seed: int = 0,
    initial: Optional[SystemState] = None,
    uniforms: Optional[np.ndarray] = None,
    record_trace: bool = False,
    chunk: int = 1024,
) -> BatchStats:
    """Simulate ``replications`` episodes of ``periods`` periods (warmup excluded).

    ``uniforms`` of shape ``(warmup + periods, R, 2)`` overrides the seeded
    streams, e.g. to force a scripted failure sequence.
    """
    if periods <= 0 or warmup < 0:
        raise ValueError("need periods > 0 and warmup >= 0")
    total = warmup + periods
    if uniforms is not None:
        if uniforms.shape[0] < total:
            raise ValueError("scripted uniforms shorter than the episode")
        replications = uniforms.shape[1]
    pmf_c, pmf_a = failure_tables(params)
    cdf_c, cdf_a = cdf_table(pmf_c), cdf_table(pmf_a)
    start = (initial or SystemState.initial(params)).to_array()
    states = np.tile(start, (replications, 1))
    streams = None if uniforms is not None else UniformStreams(seed, replications)

    costs = np.zeros((replications, 4))
    ordered = np.zeros((replications, 2), dtype=np.int64)
    am_installed = np.zeros(replications)
    hist_c = np.zeros((replications, (params.s_max + params.n) // params.q_c + 1), dtype=np.int64)
    hist_a = np.zeros((replications, params.s_max + params.n + 1), dtype=np.int64)
    trace = np.zeros((periods, replications)) if record_trace else None
    rows = np.arange(replications)

    t = 0
    while t < total:
        block = uniforms[t : t + chunk] if uniforms is not None else streams.draw(min(chunk, total - t))
        for u in block:
            x = np.asarray(policy.decide_batch(states), dtype=np.int64)
            _check_feasible(x, states, params, policy)
            k_c = sample_failures(cdf_c, states[:, 0], u[:, 0])
            k_a = sample_failures(cdf_a, states[:, 1], u[:, 1])
            if t >= warmup:
                installed = states[:, 0] + states[:, 1]
                am_installed += np.divide(states[:, 1], installed, out=np.zeros(replications), where=installed > 0)
            nxt, c = batch.step(states, x, k_c, k_a, params)
            if t >= warmup:
                costs += c
                ordered += x
                hist_c[rows, x[:, 0]] += 1
                hist_a[rows, x[:, 1]] += 1
                if trace is not None:
                    trace[t - warmup] = c.sum(axis=1)
            states = nxt
            t += 1
    return BatchStats(
        periods=periods,
        costs=costs,
        ordered=ordered,
        am_installed=am_installed,
        order_hist_c=hist_c,
        order_hist_a=hist_a,
        final_states=states,
        trace=trace,
    )


def _check_feasible(x, states, params, policy) -> None:
    budget = params.s_max - batch.inventory_position(states, params)
    items = x[:, 0] * params.q_c + x[:, 1]
    if (x < 0).any() or (items > budget).any():
        bad = int(np.argmax((x < 0).any(axis=1) | (items > budget)))
        raise ValueError(
            f"{getattr(policy, 'name', 'policy')} ordered {x[bad].tolist()} in state "
            f"{states[bad].tolist()} with budget {int(budget[bad])}"
        )


@dataclass
class EpisodeStats:
    """Totals of one episode after warmup."""

    cost: "CostTotals"
    periods: int
    orders: tuple  # (CM batches, AM items)
    am_fraction_installed: float
    order_histogram: dict = field(default_factory=dict)  # {"CM": array, "AM": array}
    trace: Optional[np.ndarray] = None

    @property
    def average_cost(self) -> float:
        return self.cost.total / self.periods


@dataclass(frozen=True)
class CostTotals:
    purchase: float
    holding: float
    backorder: float
    maintenance: float

    @property
    def total(self) -> float:
        return self.purchase + self.holding + self.backorder + self.maintenance

    def as_array(self) -> np.ndarray:
        return np.array([self.purchase, self.holding, self.backorder, self.maintenance])


def _episode(stats: BatchStats, r: int) -> EpisodeStats:
    return EpisodeStats(
        cost=CostTotals(*map(float, stats.costs[r])),
        periods=stats.periods,
        orders=(int(stats.ordered[r, 0]), int(stats.ordered[r, 1])),
        am_fraction_installed=float(stats.am_installed[r] / stats.periods),
        order_histogram={"CM": stats.order_hist_c[r].copy(), "AM": stats.order_hist_a[r].copy()},
        trace=None if stats.trace is None else stats.trace[:, r].copy(),
    )


def simulate_episode(
    policy: Policy,
    params: InstanceParams,
    periods: int,
    warmup: int = 0,
    seed: int = 0,
    replication: int = 0,
    uniforms: Optional[np.ndarray] = None,
    record_trace: bool = False,
) -> EpisodeStats:
    """One episode; identical to replication ``replication`` of :func:`estimate_cost`."""
    if uniforms is None:
        streams = UniformStreams(seed, 1, first_replication=replication)
        uniforms = streams.draw(warmup + periods)
    elif uniforms.ndim == 2:
        uniforms = uniforms[:, None, :]
    stats = run_batch(policy, params, periods, warmup, uniforms=uniforms, record_trace=record_trace)
    return _episode(stats, 0)


@dataclass
class Estimate:
    mean: float
    half_width: float
    replications: int
    per_replication: np.ndarray = field(repr=False)
    breakdown: np.ndarray = field(repr=False)  # (4,) mean cost per period by component
    breakdown_half_width: np.ndarray = field(repr=False)
    am_fraction_ordered: float = 0.0
    am_fraction_installed: float = 0.0
    order_histogram: dict = field(default_factory=dict, repr=False)
    degenerate: bool = False

    @property
    def std_error(self) -> float:
        return self.half_width / Z95

    @property
    def ci(self) -> tuple:
        return self.mean - self.half_width, self.mean + self.half_width


def _half_width(samples: np.ndarray) -> float:
    if len(samples) < 2:
        return 0.0
    return float(Z95 * samples.std(ddof=1) / np.sqrt(len(samples)))


def estimate_cost(
    policy: Policy,
    params: InstanceParams,
    replications: int = 100,
    periods: int = DEFAULT_PERIODS,
    warmup: int = DEFAULT_WARMUP,
    seed: int = 0,
) -> Estimate:
    """Long-run average cost with a normal-approximation 95% interval."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    stats = run_batch(policy, params, periods, warmup, replications, seed)
    per_rep = stats.average_cost()
    comp = stats.costs / periods
    items_c = params.q_c * stats.ordered[:, 0].sum()
    items_a = stats.ordered[:, 1].sum()
    return Estimate(
        mean=float(per_rep.mean()),
        half_width=_half_width(per_rep),
        replications=replications,
        per_replication=per_rep,
        breakdown=comp.mean(axis=0),
        breakdown_half_width=np.array([_half_width(comp[:, j]) for j in range(4)]),
        am_fraction_ordered=float(items_a / (items_a + items_c)) if items_a + items_c > 0 else 0.0,
        am_fraction_installed=float(stats.am_installed.sum() / (periods * replications)),
        order_histogram={"CM": stats.order_hist_c.sum(axis=0), "AM": stats.order_hist_a.sum(axis=0)},
        degenerate=replications < 2,
    )


@dataclass
class PairedEstimate:
    a: Estimate
    b: Estimate
    difference: float  # mean of a - b
    half_width: float


def compare_paired(
    policy_a: Policy,
    policy_b: Policy,
    params: InstanceParams,
    replications: int = 100,
    periods: int = DEFAULT_PERIODS,
    warmup: int = DEFAULT_WARMUP,
    seed: int = 0,
) -> PairedEstimate:
    """Both policies on the same streams; the interval is on per-replication differences."""
    a = estimate_cost(policy_a, params, replications, periods, warmup, seed)
    b = estimate_cost(policy_b, params, replications, periods, warmup, seed)
    diff = a.per_replication - b.per_replication
    return PairedEstimate(a, b, float(diff.mean()), _half_width(diff))


def optimality_gap(v_pi: float, v_star: float) -> float:
    """Relative excess cost in percent."""
    if v_star <= 0:
        raise ValueError("optimal cost must be positive")
    return (v_pi - v_star) / v_star * 100.0
