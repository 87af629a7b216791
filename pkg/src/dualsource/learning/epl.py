"""Training one policy for a population of instances.

Instance parameters are appended (min-max normalised) to every feature
vector and a new instance is drawn from a value grid whenever a trajectory
restarts, so the learner sees the whole population.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.params import InstanceParams
from ..core.policy import Policy
from ..heuristics.bsp import bsp_solve
from ..sim.engine import estimate_cost
from .avi import AviResult, avi_train
from .common import global_grid, grid_for
from .dcl import ClassifierPolicy, DclResult, NetConfig, RolloutConfig, collect, concat, train_rounds
from .features import PARAM_FIELDS, FeatureMap, ParamBounds

log = logging.getLogger(__name__)

DEFAULT_KAPPA = 10
RESAMPLE_CAP = 1000
SAMPLE_FACTOR = 2.5
SCENARIO_FACTOR = 2.0


class EplGridError(ValueError):
    """The grid cannot produce a valid instance."""


@dataclass(frozen=True)
class EplGrid:
    """Sorted candidate values per parameter.

    With ``members`` set, draws pick one of those instances uniformly instead
    of combining values independently.
    """

    values: Tuple[Tuple[float, ...], ...]  # aligned with PARAM_FIELDS
    demand_family: str = "negative_binomial"
    members: Optional[Tuple[InstanceParams, ...]] = None

    def __post_init__(self):
        if len(self.values) != len(PARAM_FIELDS):
            raise EplGridError("one value set per parameter is required")
        for name, vals in zip(PARAM_FIELDS, self.values):
            if not vals:
                raise EplGridError(f"empty value set for {name}")

    def __getitem__(self, name: str) -> Tuple[float, ...]:
        return self.values[PARAM_FIELDS.index(name)]

    @property
    def bounds(self) -> ParamBounds:
        return ParamBounds(tuple(min(v) for v in self.values), tuple(max(v) for v in self.values))

    def decision_grid(self) -> np.ndarray:
        """Decisions covering every instance the grid can produce."""
        if self.members:
            return grid_for(self.members)
        return global_grid(int(max(self["s_max"]) + max(self["n"])), int(min(self["q_c"])))

    def feature_map(self) -> FeatureMap:
        return FeatureMap(int(max(self["l_c"])), int(max(self["l_a"])), self.bounds)


def nearest_rank_percentiles(values: Sequence[float], count: int) -> list:
    """Nearest-rank percentiles at ``100 i / (count + 1)`` for ``i = 1..count``."""
    if count < 0:
        raise ValueError("percentile count must be >= 0")
    qs = [100.0 * i / (count + 1) for i in range(1, count + 1)]
    return [float(x) for x in np.percentile(np.asarray(values, dtype=float), qs, method="inverted_cdf")]


def _clean(name: str, x: float):
    return int(round(x)) if name in ("n", "s_max", "l_c", "l_a", "q_c") else float(x)


def epl_build_grid(
    population: Union[Sequence[InstanceParams], Dict[str, Sequence[float]]],
    kappa: Union[int, Dict[str, int], None] = None,
    members: bool = False,
) -> EplGrid:
    """Per-parameter grid of min, max and ``kappa`` nearest-rank percentiles.

    ``kappa=None`` keeps every distinct value of the population.  A mapping
    of explicit value lists may be passed instead of instances.  ``members``
    makes draws return population instances as they are.
    """
    if isinstance(population, dict):
        if members:
            raise ValueError("members requires a list of instances")
        columns = {f: list(population.get(f, ())) for f in PARAM_FIELDS}
        family = population.get("demand_family", "negative_binomial")
    else:
        population = list(population)
        if not population:
            raise ValueError("population must not be empty")
        columns = {f: [getattr(p, f) for p in population] for f in PARAM_FIELDS}
        families = {p.demand_family for p in population}
        if len(families) != 1:
            raise ValueError("population mixes demand families")
        family = families.pop()
    values = []
    for name in PARAM_FIELDS:
        col = columns[name]
        if not col:
            raise EplGridError(f"empty value set for {name}")
        if kappa is None:
            pts = list(col)
        else:
            k = kappa.get(name, DEFAULT_KAPPA) if isinstance(kappa, dict) else kappa
            pts = [min(col), max(col)] + nearest_rank_percentiles(col, k)
        values.append(tuple(sorted({_clean(name, x) for x in pts})))
    return EplGrid(tuple(values), family, tuple(population) if members else None)


def epl_sample(grid: EplGrid, rng: np.random.Generator) -> InstanceParams:
    """One instance, uniform over each value set independently, resampled until valid."""
    if grid.members:
        return grid.members[int(rng.integers(len(grid.members)))]
    for _ in range(RESAMPLE_CAP):
        draw = {f: vals[int(rng.integers(len(vals)))] for f, vals in zip(PARAM_FIELDS, grid.values)}
        if grid.demand_family == "poisson":
            draw["var_c"], draw["var_a"] = draw["mu_c"], draw["mu_a"]
        try:
            return InstanceParams(demand_family=grid.demand_family, **draw)
        except ValueError:
            continue
    raise EplGridError(f"no valid instance after {RESAMPLE_CAP} draws; the grid is inconsistent")


def epl_config(base: RolloutConfig, scenarios: float = SCENARIO_FACTOR) -> RolloutConfig:
    """Budget of a population run derived from a per-instance budget."""
    return base.scaled(samples=SAMPLE_FACTOR, scenarios=scenarios)


@lru_cache(maxsize=256)
def quick_bsp(params: InstanceParams, replications: int = 20, periods: int = 2000, seed: int = 0) -> Policy:
    """Best base-stock policy under a short simulation, used to seed the first round."""
    return bsp_solve(params, lambda pol: estimate_cost(pol, params, replications, periods, 200, seed).mean).policy


def population_validator(
    instances: Sequence[InstanceParams],
    reference: Callable[[InstanceParams], Policy] = quick_bsp,
    replications: int = 20,
    periods: int = 2000,
    warmup: int = 200,
    seed: int = 99,
) -> Callable[[Policy], float]:
    """Mean cost ratio to a reference policy over ``instances``; scale-free across instances."""
    ref = [estimate_cost(reference(p), p, replications, periods, warmup, seed).mean for p in instances]

    def score(policy) -> float:
        ratios = [
            estimate_cost(policy.for_instance(p), p, replications, periods, warmup, seed).mean / r
            for p, r in zip(instances, ref)
        ]
        return float(np.mean(ratios))

    return score


@dataclass
class EplResult:
    feature_map: FeatureMap
    grid: EplGrid
    base: Union[DclResult, AviResult]

    @property
    def policy(self):
        return self.base.policy

    def policy_for(self, params: InstanceParams):
        """The trained policy bound to ``params``; rejects parameters outside the grid bounds."""
        return self.base.policy.for_instance(params)


def epl_train(
    grid: EplGrid,
    base: str = "dcl",
    config: Optional[RolloutConfig] = None,
    net: Optional[NetConfig] = None,
    seed: int = 0,
    initial_policy_for: Callable[[InstanceParams], Policy] = quick_bsp,
    validator: Optional[Callable[[Policy], float]] = None,
    validation_instances: Optional[Sequence[InstanceParams]] = None,
    aggregate: bool = True,
    **avi_kwargs,
) -> EplResult:
    """Train a single DCL classifier or AVI value function for the whole grid.

    DCL draws an instance per chain at every round, since each chain is
    one restarted trajectory; chains sharing an instance are labelled
    together.  ``config`` defaults to :func:`epl_config` of the standard
    budget and ``net`` to one layer deeper than the standard network.  AVI
    keeps its per-instance settings.
    """
    feature_map = grid.feature_map()
    decisions = grid.decision_grid()
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    if validation_instances is None:
        validation_instances = grid.members or [epl_sample(grid, rng) for _ in range(10)]
    anchor = validation_instances[0]

    if base == "avi":
        result = avi_train(
            anchor,
            seed=seed,
            feature_map=feature_map,
            instance_sampler=lambda g: epl_sample(grid, g),
            grid=decisions,
            **avi_kwargs,
        )
        return EplResult(feature_map, grid, result)
    if base != "dcl":
        raise ValueError("base must be 'dcl' or 'avi'")
    if avi_kwargs:
        raise TypeError(f"unexpected arguments {sorted(avi_kwargs)}")

    config = config or epl_config(RolloutConfig())
    net = net or NetConfig().deeper()
    validator = validator or population_validator(validation_instances, initial_policy_for)
    steps = -(-config.samples // config.chains)

    def collect_round(incumbent, i):
        draw_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(8, i)))
        drawn = [epl_sample(grid, draw_rng) for _ in range(config.chains)]
        order, counts = {}, {}
        for p in drawn:
            order.setdefault(p, len(order))
            counts[p] = counts.get(p, 0) + 1
        parts = []
        for p, j in order.items():
            policy = initial_policy_for(p) if incumbent is None else incumbent.for_instance(p)
            part_config = RolloutConfig(
                1, counts[p] * steps, config.scenarios, config.horizon, config.warmup, counts[p], config.spread
            )
            parts.append(collect(policy, p, decisions, feature_map, part_config, seed, i, (j,)))
        log.info("round %d: %d instances, %d chains", i + 1, len(order), config.chains)
        return concat(parts)

    result = train_rounds(
        collect_round,
        lambda layers: ClassifierPolicy(anchor, layers, feature_map, decisions),
        validator,
        config.iterations,
        len(decisions),
        net,
        seed,
        aggregate,
    )
    return EplResult(feature_map, grid, result)
