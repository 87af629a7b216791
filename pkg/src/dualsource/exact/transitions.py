"""Precomputed one-step transition structure of an enumerated state space.

For every state and every failure pair ``(k_c, k_a)`` the successor is
stored *before* the new orders are appended (both newest slots zero).
Because the newest AM slot is the least significant digit of the state key,
successors under ``x_a = 0, 1, 2, ...`` occupy consecutive ordinals; only
the ordinal for ``x_a = 0`` is stored per CM batch count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import batch
from ..core.demand import failure_tables
from .statespace import StateSpace, merge_modes


@dataclass
class TransitionTable:
    space: StateSpace
    owner: np.ndarray  # (E,) state ordinal of each entry
    ptr: np.ndarray  # (n + 1,) entries of state i are ptr[i]:ptr[i + 1]
    prob: np.ndarray  # (E,)
    succ0: np.ndarray  # (E, max_batches + 1) ordinal for (x_c, 0); -1 if infeasible
    budget: np.ndarray  # (n,) S - IP
    base_cost: np.ndarray  # (n,) expected holding + backorder + maintenance
    expected_breakdown: np.ndarray  # (n, 3) the same split by component

    @property
    def params(self):
        return self.space.params

    @property
    def n_states(self) -> int:
        return len(self.space)

    def purchase(self, decisions: np.ndarray) -> np.ndarray:
        return batch.purchase_cost(decisions, self.params)

    def columns(self, decisions: np.ndarray) -> np.ndarray:
        """Successor ordinal of every entry under per-state ``decisions``."""
        d = decisions[self.owner]
        cols = self.succ0[np.arange(len(self.owner)), d[:, 0]] + d[:, 1]
        if (self.succ0[np.arange(len(self.owner)), d[:, 0]] < 0).any():
            raise ValueError("decision outside the order budget")
        return cols

    def feasible(self, decisions: np.ndarray) -> np.ndarray:
        items = decisions[:, 0] * self.params.q_c + decisions[:, 1]
        return (decisions >= 0).all(axis=1) & (items <= self.budget)

    def successors_of(self, rows: np.ndarray, decisions: np.ndarray):
        """``(entry_owner_local, successor_ordinals, probs)`` for a subset of ordinals."""
        starts, ends = self.ptr[rows], self.ptr[rows + 1]
        counts = ends - starts
        local = np.repeat(np.arange(len(rows)), counts)
        offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        entries = np.repeat(starts, counts) + offs
        d = decisions[local]
        base = self.succ0[entries, d[:, 0]]
        if (base < 0).any():
            raise ValueError("decision outside the order budget")
        return local, base + d[:, 1], self.prob[entries]


def build_transitions(space: StateSpace) -> TransitionTable:
    params = space.params
    states = space.states
    n = len(space)
    lay = batch.Layout.of(params)
    pmf_c, pmf_a = failure_tables(params)

    n_c, n_a = states[:, 0], states[:, 1]
    counts = (n_c + 1) * (n_a + 1)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    owner = np.repeat(np.arange(n), counts)
    j = np.arange(ptr[-1]) - ptr[owner]
    k_c = j // (n_a[owner] + 1)
    k_a = j % (n_a[owner] + 1)
    prob = pmf_c[n_c[owner], k_c] * pmf_a[n_a[owner], k_a]

    zeros = np.zeros((len(owner), 2), dtype=np.int64)
    nxt, costs = batch.step(states[owner], zeros, k_c, k_a, params)
    if space.model == "simplified":
        nxt = merge_modes(nxt)
    base_key = space.encode(nxt)
    del nxt

    breakdown = np.stack(
        [np.bincount(owner, weights=prob * costs[:, c], minlength=n) for c in (1, 2, 3)], axis=1
    )
    budget = params.s_max - batch.inventory_position(states, params)

    w_c = int(space.radix[lay.uc.stop - 1])
    # with backorders the budget S - IP reaches S + N
    max_batches = (params.s_max + params.n) // params.q_c
    succ0 = np.full((len(owner), max_batches + 1), -1, dtype=np.int32)
    entry_budget = budget[owner]
    for x_c in range(max_batches + 1):
        mask = entry_budget >= x_c * params.q_c
        if mask.any():
            succ0[mask, x_c] = space.lookup(base_key[mask] + x_c * w_c)
    return TransitionTable(
        space=space,
        owner=owner,
        ptr=ptr,
        prob=prob,
        succ0=succ0,
        budget=budget,
        base_cost=breakdown.sum(axis=1),
        expected_breakdown=breakdown,
    )
