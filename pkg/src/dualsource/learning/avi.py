"""Approximate value iteration with a linear value function on post-decision states.

The post-decision state is what the next state would be if no item failed:
orders appended, arrivals booked, backorders served from stock.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..core import batch
from ..core.demand import cdf_table, failure_tables, sample_failures
from ..core.params import InstanceParams, SystemState
from ..core.policy import Policy
from .common import expected_state_cost, feasible_mask, grid_for
from .features import FeatureMap

log = logging.getLogger(__name__)

DEFAULT_SAMPLES = 2000
DEFAULT_HORIZON = 250
DEFAULT_EPSILON = 0.1
DEFAULT_DISCOUNT = 0.99
WEIGHT_BOUND = 1e12
DEFAULT_FORGETTING = 1.0


class AviDivergence(RuntimeError):
    """A value-function weight left the allowed magnitude."""


class RecursiveLeastSquares:
    """Exact online least squares.

    Until the normal matrix has full rank the minimum-norm batch solution is
    recomputed from running sums; afterwards Sherman-Morrison updates keep
    the inverse current, so the weights always equal the batch fit.  With
    ``forgetting < 1`` the fit weights sample ``i`` of ``n`` by
    ``forgetting ** (n - i)``, which lets bootstrapped targets move.
    """

    def __init__(self, dim: int, forgetting: float = 1.0, rcond: float = 1e-10):
        if not 0.0 < forgetting <= 1.0:
            raise ValueError("forgetting must lie in (0, 1]")
        self.dim = dim
        self.forgetting = forgetting
        self.rcond = rcond
        self.xtx = np.zeros((dim, dim))
        self.xty = np.zeros(dim)
        self.inverse: Optional[np.ndarray] = None
        self.weights = np.zeros(dim)
        self.count = 0

    def update(self, x: np.ndarray, y: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lam = self.forgetting
        self.xtx = lam * self.xtx + np.outer(x, x)
        self.xty = lam * self.xty + x * y
        self.count += 1
        if self.inverse is None:
            if self.count >= self.dim and np.linalg.cond(self.xtx) < 1.0 / self.rcond:
                self.inverse = np.linalg.inv(self.xtx)
                self.weights = self.inverse @ self.xty
            else:
                self.weights = np.linalg.lstsq(self.xtx, self.xty, rcond=self.rcond)[0]
        else:
            px = self.inverse @ x
            gain = px / (lam + x @ px)
            self.weights = self.weights + gain * (y - x @ self.weights)
            self.inverse = (self.inverse - np.outer(gain, px)) / lam
        return self.weights


@dataclass
class LinearVFA:
    weights: np.ndarray  # intercept first
    feature_map: FeatureMap
    discount: float = DEFAULT_DISCOUNT

    def design(self, features: np.ndarray) -> np.ndarray:
        return value_basis(features, self.feature_map)

    def value(self, states: np.ndarray, params: InstanceParams) -> np.ndarray:
        return self.design(self.feature_map(states, params)) @ self.weights


def value_basis(features: np.ndarray, feature_map: FeatureMap) -> np.ndarray:
    """Intercept, position, level parts and expected failures, with convex terms.

    A value that is linear in the inventory position makes the greedy rule
    bang-bang (order nothing or everything); with a square term it becomes
    an order-up-to rule.  Individual pipeline slots are left out: their
    weights are poorly identified from one trajectory and make fresh orders
    look worthless.
    """
    j = 4 + feature_map.l_c + feature_map.l_a
    ip, demand, level = features[:, j], features[:, j + 1], features[:, j + 3]
    over, short = np.maximum(level, 0), np.minimum(level, 0)
    cols = [np.ones(len(features)), ip, ip**2, over, short, over**2, short**2, demand]
    if feature_map.param_bounds is not None:
        return np.hstack([np.stack(cols, axis=1), features[:, j + 4 :]])
    return np.stack(cols, axis=1)


def basis_size(feature_map: FeatureMap) -> int:
    return 8 + (feature_map.size - 4 - feature_map.l_c - feature_map.l_a - 4)


def post_decision_states(states: np.ndarray, decisions: np.ndarray, params: InstanceParams) -> np.ndarray:
    zeros = np.zeros(states.shape[0], dtype=np.int64)
    nxt, _ = batch.step(states, decisions, zeros, zeros, params)
    return nxt


def _scores(vfa: LinearVFA, state: np.ndarray, grid: np.ndarray, params: InstanceParams):
    """Per-grid-decision cost plus discounted post-decision value; infeasible -> inf."""
    mask = feasible_mask(state[None, :], grid, params)[0]
    cand = grid[mask]
    rows = np.repeat(state[None, :], len(cand), axis=0)
    post = post_decision_states(rows, cand, params)
    feats = vfa.design(vfa.feature_map(post, params))
    scores = np.full(len(grid), np.inf)
    scores[mask] = batch.purchase_cost(cand, params) + vfa.discount * (feats @ vfa.weights)
    return scores, feats, mask


class VfaGreedyPolicy(Policy):
    """Cheapest immediate cost plus discounted approximate value; first index wins ties."""

    name = "avi"

    def __init__(self, params: InstanceParams, vfa: LinearVFA, grid: Optional[np.ndarray] = None):
        self.params = params
        self.vfa = vfa
        self.grid = grid if grid is not None else grid_for([params])
        vfa.feature_map.check(params)

    def for_instance(self, params: InstanceParams) -> "VfaGreedyPolicy":
        return VfaGreedyPolicy(params, self.vfa, self.grid)

    def decide_batch(self, states: np.ndarray) -> np.ndarray:
        p = self.params
        r, k = states.shape[0], len(self.grid)
        mask = feasible_mask(states, self.grid, p)
        rows = np.repeat(states, k, axis=0)
        dec = np.tile(self.grid, (r, 1))
        ok = mask.ravel()
        post = post_decision_states(rows[ok], dec[ok], p)
        val = np.full(r * k, np.inf)
        val[ok] = batch.purchase_cost(dec[ok], p) + self.vfa.discount * self.vfa.value(post, p)
        best = np.argmin(val.reshape(r, k), axis=1)
        return self.grid[best]

    def describe(self) -> dict:
        return {"name": self.name, "discount": self.vfa.discount, "weights": self.vfa.weights.tolist()}


@dataclass
class AviResult:
    vfa: LinearVFA
    policy: VfaGreedyPolicy
    samples: int
    weight_history: List[np.ndarray] = field(default_factory=list, repr=False)


def avi_train(
    params: InstanceParams,
    samples: int = DEFAULT_SAMPLES,
    horizon: int = DEFAULT_HORIZON,
    epsilon: float = DEFAULT_EPSILON,
    discount: float = DEFAULT_DISCOUNT,
    seed: int = 0,
    feature_map: Optional[FeatureMap] = None,
    weight_bound: float = WEIGHT_BOUND,
    forgetting: float = DEFAULT_FORGETTING,
    instance_sampler: Optional[Callable[[np.random.Generator], InstanceParams]] = None,
    grid: Optional[np.ndarray] = None,
) -> AviResult:
    """Forward-pass AVI with epsilon-greedy exploration.

    Each step computes the best one-step lookahead value ``v_hat`` of the
    current state and uses it as the target for the previous post-decision
    state.  The trajectory restarts from the initial state every ``horizon``
    steps; with ``instance_sampler`` a fresh instance is drawn at every
    restart and ``params`` only fixes the returned policy's instance.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    feature_map = feature_map or FeatureMap(params.l_c, params.l_a)
    feature_map.check(params)
    grid = grid if grid is not None else grid_for([params])
    rls = RecursiveLeastSquares(basis_size(feature_map), forgetting)
    vfa = LinearVFA(rls.weights.copy(), feature_map, discount)
    rng = np.random.default_rng(seed)
    current = params
    history = []
    for n in range(samples):
        if n % horizon == 0:
            if instance_sampler is not None:
                current = instance_sampler(rng)
                feature_map.check(current)
            pmf_c, pmf_a = failure_tables(current)
            cdf_c, cdf_a = cdf_table(pmf_c), cdf_table(pmf_a)
            state, prev = SystemState.initial(current).to_array(), None
        scores, feats, mask = _scores(vfa, state, grid, current)
        greedy = int(np.argmin(scores))
        v_hat = float(expected_state_cost(state[None, :], current)[0] + scores[greedy])
        if prev is not None:
            vfa.weights = rls.update(prev, v_hat).copy()
            if not np.all(np.isfinite(vfa.weights)) or np.abs(vfa.weights).max() > weight_bound:
                raise AviDivergence(f"weights diverged after {n} samples: max |w| = {np.abs(vfa.weights).max():.3g}")
        if rng.random() < epsilon:
            choice = int(rng.choice(np.flatnonzero(mask)))
        else:
            choice = greedy
        prev = feats[np.flatnonzero(mask).tolist().index(choice)]
        u = rng.random(2)
        k_c = sample_failures(cdf_c, state[None, 0], u[None, 0])
        k_a = sample_failures(cdf_a, state[None, 1], u[None, 1])
        state = batch.step(state[None, :], grid[choice][None, :], k_c, k_a, current)[0][0]
        if n % 100 == 0:
            history.append(vfa.weights.copy())
    log.info("avi finished %d samples, |w|max=%.3g", samples, np.abs(vfa.weights).max())
    return AviResult(vfa, VfaGreedyPolicy(params, vfa, grid), samples, history)
