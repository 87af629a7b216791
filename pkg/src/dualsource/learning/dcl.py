"""Rollout-based policy iteration with a neural classifier policy.

Each round labels sampled states with the first decision that minimises a
common-random-number rollout estimate under the incumbent policy, then
fits a classifier to those labels.  The classifier scores every decision of
a fixed global grid; infeasible decisions are masked before the argmax, so
every emitted decision respects the order budget.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from ..core import batch
from ..core.demand import cdf_table, failure_tables, sample_failures
from ..core.params import InstanceParams, SystemState
from ..core.policy import Policy
from .common import feasible_mask, grid_for
from .features import FeatureMap

log = logging.getLogger(__name__)

ARTIFACT_VERSION = 1


@dataclass(frozen=True)
class RolloutConfig:
    """Sampling budget of one training run.

    ``samples`` states are labelled per round, ``scenarios`` common-random
    rollouts of ``horizon`` periods score each candidate decision, and
    ``warmup`` periods under the incumbent precede sampling.  ``chains``
    trajectories are advanced side by side; each starts after a random
    offset of up to ``spread`` extra periods so samples cover steady state.
    """

    iterations: int = 4
    samples: int = 1000
    scenarios: int = 100
    horizon: int = 80
    warmup: int = 10
    chains: int = 40
    spread: int = 400

    def __post_init__(self):
        for k, v in asdict(self).items():
            if k != "spread" and v < 1:
                raise ValueError(f"{k} must be >= 1")

    @classmethod
    def full(cls) -> "RolloutConfig":
        """Budget of the original synthetic-case experiments."""
        return cls(iterations=3, samples=5000, scenarios=2000, horizon=500, warmup=10)

    def scaled(self, samples: float = 1.0, scenarios: float = 1.0) -> "RolloutConfig":
        return RolloutConfig(
            self.iterations,
            max(1, round(self.samples * samples)),
            max(1, round(self.scenarios * scenarios)),
            self.horizon,
            self.warmup,
            self.chains,
            self.spread,
        )


@dataclass(frozen=True)
class NetConfig:
    hidden: tuple = (32, 32)
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 60

    def deeper(self) -> "NetConfig":
        return NetConfig(self.hidden + (self.hidden[-1],), self.learning_rate, self.batch_size, self.epochs)


class ClassifierPolicy(Policy):
    """Masked argmax over a feed-forward scorer evaluated in float64 NumPy.

    Weights are stored as float64 copies of the trained float32 values, so a
    saved and reloaded policy makes bit-identical decisions.
    """

    name = "dcl"

    def __init__(self, params: InstanceParams, layers: List[tuple], feature_map: FeatureMap, grid: np.ndarray):
        feature_map.check(params)
        self.params = params
        self.layers = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)) for w, b in layers]
        self.feature_map = feature_map
        self.grid = np.asarray(grid, dtype=np.int64)
        if self.layers[-1][0].shape[1] != len(self.grid):
            raise ValueError("output layer does not match the decision grid")

    def for_instance(self, params: InstanceParams) -> "ClassifierPolicy":
        return ClassifierPolicy(params, self.layers, self.feature_map, self.grid)

    def scores(self, states: np.ndarray) -> np.ndarray:
        h = self.feature_map(states, self.params)
        for i, (w, b) in enumerate(self.layers):
            h = h @ w + b
            if i < len(self.layers) - 1:
                np.maximum(h, 0.0, out=h)
        return h

    def decide_batch(self, states: np.ndarray) -> np.ndarray:
        s = self.scores(states)
        s[~feasible_mask(states, self.grid, self.params)] = -np.inf
        return self.grid[np.argmax(s, axis=1)]

    def describe(self) -> dict:
        return {"name": self.name, "layers": [w.shape for w, _ in self.layers]}

    def to_dict(self) -> dict:
        return {
            "version": ARTIFACT_VERSION,
            "kind": "classifier",
            "features": self.feature_map.to_dict(),
            "grid": self.grid.tolist(),
            "layers": [{"weight": w.tolist(), "bias": b.tolist()} for w, b in self.layers],
        }

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict, params: InstanceParams) -> "ClassifierPolicy":
        if d.get("version") != ARTIFACT_VERSION or d.get("kind") != "classifier":
            raise ValueError("not a classifier policy artifact")
        layers = [(np.array(l["weight"]), np.array(l["bias"])) for l in d["layers"]]
        return cls(params, layers, FeatureMap.from_dict(d["features"]), np.array(d["grid"]))

    @classmethod
    def load(cls, path: Union[str, Path], params: InstanceParams) -> "ClassifierPolicy":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")), params)


def _streams(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


class _Sampler:
    """Failure sampling tables for one instance."""

    def __init__(self, params: InstanceParams):
        pmf_c, pmf_a = failure_tables(params)
        self.cdf_c, self.cdf_a = cdf_table(pmf_c), cdf_table(pmf_a)
        self.params = params

    def step(self, states, x, u):
        k_c = sample_failures(self.cdf_c, states[:, 0], u[:, 0])
        k_a = sample_failures(self.cdf_a, states[:, 1], u[:, 1])
        return batch.step(states, x, k_c, k_a, self.params)


def rollout_costs(
    states: np.ndarray,
    policy: Policy,
    params: InstanceParams,
    grid: np.ndarray,
    scenarios: int,
    horizon: int,
    uniforms: np.ndarray,
    sampler: Optional[_Sampler] = None,
) -> np.ndarray:
    """``(B, K)`` mean ``horizon``-period cost of each first decision, ``inf`` if infeasible.

    ``uniforms`` has shape ``(horizon, B, scenarios, 2)`` and is shared by
    all first decisions of the same state.
    """
    sampler = sampler or _Sampler(params)
    b, k = states.shape[0], len(grid)
    mask = feasible_mask(states, grid, params)
    sb, sk = np.nonzero(mask)
    rows = np.repeat(states[sb], scenarios, axis=0)
    first = np.repeat(grid[sk], scenarios, axis=0)
    scen = np.tile(np.arange(scenarios), len(sb))
    owner = np.repeat(sb, scenarios)
    total = np.zeros(len(rows))
    for t in range(horizon):
        x = first if t == 0 else np.asarray(policy.decide_batch(rows), dtype=np.int64)
        rows, c = sampler.step(rows, x, uniforms[t, owner, scen])
        total += c.sum(axis=1)
    out = np.full((b, k), np.inf)
    out[sb, sk] = total.reshape(len(sb), scenarios).mean(axis=1)
    return out


def dcl_rollout_estimate(
    state: SystemState,
    first_decision,
    policy: Policy,
    params: InstanceParams,
    scenarios: int,
    horizon: int,
    seed: int = 0,
) -> float:
    """Rollout estimate for one state and first decision."""
    grid = np.array([[first_decision[0], first_decision[1]]], dtype=np.int64)
    u = _streams(seed, 0).random((horizon, 1, scenarios, 2))
    est = rollout_costs(state.to_array()[None, :], policy, params, grid, scenarios, horizon, u)
    if not np.isfinite(est[0, 0]):
        raise ValueError("first decision is outside the order budget")
    return float(est[0, 0])


def label_states(
    states: np.ndarray,
    policy: Policy,
    params: InstanceParams,
    grid: np.ndarray,
    config: RolloutConfig,
    seed: int,
    key: tuple,
    sampler: Optional[_Sampler] = None,
) -> np.ndarray:
    """Grid index of the rollout-argmin decision for each state (first index wins ties)."""
    u = _streams(seed, *key).random((config.horizon, states.shape[0], config.scenarios, 2))
    costs = rollout_costs(states, policy, params, grid, config.scenarios, config.horizon, u, sampler)
    return np.argmin(costs, axis=1)


@dataclass
class TrainingSet:
    features: np.ndarray
    masks: np.ndarray
    labels: np.ndarray


def collect(
    policy: Policy,
    params: InstanceParams,
    grid: np.ndarray,
    feature_map: FeatureMap,
    config: RolloutConfig,
    seed: int,
    round_index: int,
    stream: tuple = (),
) -> TrainingSet:
    """Warm up chains under ``policy``, then step them along their labelled decisions.

    ``stream`` extends the random-stream key so several calls in one round
    stay independent.
    """
    sampler = _Sampler(params)
    rng = _streams(seed, round_index, 0, *stream)
    chains = min(config.chains, config.samples)
    steps = -(-config.samples // chains)
    states = np.tile(SystemState.initial(params).to_array(), (chains, 1))
    offsets = config.warmup + rng.integers(0, config.spread + 1, size=chains)
    for t in range(int(offsets.max())):
        active = offsets > t
        x = np.asarray(policy.decide_batch(states), dtype=np.int64)
        nxt, _ = sampler.step(states, x, rng.random((chains, 2)))
        states = np.where(active[:, None], nxt, states)
    feats, masks, labels = [], [], []
    for step in range(steps):
        lab = label_states(states, policy, params, grid, config, seed, (round_index, 1, step, *stream), sampler)
        feats.append(feature_map(states, params))
        masks.append(feasible_mask(states, grid, params))
        labels.append(lab)
        states, _ = sampler.step(states, grid[lab], rng.random((chains, 2)))
    n = config.samples
    return TrainingSet(np.vstack(feats)[:n], np.vstack(masks)[:n], np.concatenate(labels)[:n])


def concat(sets: Sequence[TrainingSet]) -> TrainingSet:
    return TrainingSet(
        np.vstack([s.features for s in sets]),
        np.vstack([s.masks for s in sets]),
        np.concatenate([s.labels for s in sets]),
    )


def _build_net(inputs: int, outputs: int, net: NetConfig, seed: int):
    import torch

    torch.manual_seed(seed)
    layers, width = [], inputs
    for h in net.hidden:
        layers += [torch.nn.Linear(width, h), torch.nn.ReLU()]
        width = h
    layers.append(torch.nn.Linear(width, outputs))
    return torch.nn.Sequential(*layers)


def fit_classifier(data: TrainingSet, outputs: int, net: NetConfig, seed: int, model=None):
    """Masked cross-entropy fit; returns ``(model, layers, final_loss)``."""
    import torch

    gen = torch.Generator().manual_seed(seed)
    model = model or _build_net(data.features.shape[1], outputs, net, seed)
    opt = torch.optim.Adam(model.parameters(), lr=net.learning_rate)
    x = torch.as_tensor(data.features, dtype=torch.float32)
    m = torch.as_tensor(data.masks)
    y = torch.as_tensor(data.labels, dtype=torch.long)
    n = len(y)
    loss_value = float("nan")
    for _ in range(net.epochs):
        order = torch.randperm(n, generator=gen)
        for i in range(0, n, net.batch_size):
            idx = order[i : i + net.batch_size]
            logits = model(x[idx]).masked_fill(~m[idx], -1e9)
            loss = torch.nn.functional.cross_entropy(logits, y[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            loss_value = float(loss.detach())
        if not np.isfinite(loss_value):
            raise FloatingPointError("classifier loss became NaN")
    layers = [
        (mod.weight.detach().numpy().T.astype(np.float64), mod.bias.detach().numpy().astype(np.float64))
        for mod in model
        if isinstance(mod, torch.nn.Linear)
    ]
    return model, layers, loss_value


def training_accuracy(policy: ClassifierPolicy, data: TrainingSet) -> float:
    h = data.features
    for i, (w, b) in enumerate(policy.layers):
        h = h @ w + b
        if i < len(policy.layers) - 1:
            h = np.maximum(h, 0.0)
    h[~data.masks] = -np.inf
    return float(np.mean(np.argmax(h, axis=1) == data.labels))


@dataclass
class DclRound:
    policy: ClassifierPolicy
    validation_cost: float
    accuracy: float
    loss: float
    seconds: float


@dataclass
class DclResult:
    policy: ClassifierPolicy
    rounds: List[DclRound] = field(repr=False)
    best_round: int = 0
    seconds: float = 0.0


Validator = Callable[[Policy], float]


def train_rounds(
    collect_round: Callable[[Optional[ClassifierPolicy], int], TrainingSet],
    make_policy: Callable[[list], ClassifierPolicy],
    validator: Validator,
    iterations: int,
    outputs: int,
    net: NetConfig,
    seed: int,
    aggregate: bool = True,
) -> DclResult:
    """Shared round loop: label, fit, validate; the cheapest round wins.

    ``collect_round(incumbent, i)`` gets ``None`` in the first round, when
    the caller's initial policy drives sampling.
    """
    start = time.perf_counter()
    incumbent, model, rounds, pool = None, None, [], []
    for i in range(iterations):
        t0 = time.perf_counter()
        fresh = collect_round(incumbent, i)
        pool = pool + [fresh] if aggregate else [fresh]
        data = concat(pool)
        model, layers, loss = fit_classifier(data, outputs, net, seed + i, model)
        policy = make_policy(layers)
        cost = float(validator(policy))
        acc = training_accuracy(policy, data)
        rounds.append(DclRound(policy, cost, acc, loss, time.perf_counter() - t0))
        log.info("round %d: validation %.4f accuracy %.3f (%d labels)", i + 1, cost, acc, len(data.labels))
        incumbent = policy
    best = min(range(len(rounds)), key=lambda j: (rounds[j].validation_cost, j))
    return DclResult(rounds[best].policy, rounds, best, time.perf_counter() - start)


def dcl_train(
    params: InstanceParams,
    initial_policy: Policy,
    validator: Validator,
    config: RolloutConfig = RolloutConfig(),
    net: NetConfig = NetConfig(),
    seed: int = 0,
    feature_map: Optional[FeatureMap] = None,
    grid: Optional[np.ndarray] = None,
    aggregate: bool = True,
) -> DclResult:
    """Train on one instance; the round with the lowest validation cost is returned.

    With ``aggregate`` each round's classifier is fitted on the labels of
    all rounds so far, which keeps rarely visited ordering states in view.
    """
    feature_map = feature_map or FeatureMap(params.l_c, params.l_a)
    grid = grid if grid is not None else grid_for([params])

    def collect_round(incumbent, i):
        return collect(incumbent or initial_policy, params, grid, feature_map, config, seed, i)

    return train_rounds(
        collect_round,
        lambda layers: ClassifierPolicy(params, layers, feature_map, grid),
        validator,
        config.iterations,
        len(grid),
        net,
        seed,
        aggregate,
    )
