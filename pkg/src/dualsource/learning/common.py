"""Decision enumeration and one-period expected costs used by the learners."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..core import batch
from ..core.demand import failure_tables
from ..core.params import InstanceParams


def global_grid(max_items: int, min_batch: int) -> np.ndarray:
    """All ``(x_c, x_a)`` that could be feasible for some instance, lexicographic.

    ``max_items`` bounds ``x_c * q_c + x_a`` (the largest ``S + N`` involved)
    and ``min_batch`` is the smallest CM batch size.
    """
    return batch.decision_grid(max_items, min_batch)


def grid_for(params_list) -> np.ndarray:
    return global_grid(max(p.s_max + p.n for p in params_list), min(p.q_c for p in params_list))


def feasible_mask(states: np.ndarray, grid: np.ndarray, params: InstanceParams) -> np.ndarray:
    """``(R, K)`` mask of grid decisions within each state's order budget."""
    budget = params.s_max - batch.inventory_position(states, params)
    items = grid[:, 0] * params.q_c + grid[:, 1]
    return items[None, :] <= budget[:, None]


@lru_cache(maxsize=64)
def _expected_backorder_table(params: InstanceParams) -> np.ndarray:
    """``[n_c, n_a, stock]`` -> expected backorder count charged this period."""
    pmf_c, pmf_a = failure_tables(params)
    n, top = params.n, params.s_max + params.n
    table = np.zeros((n + 1, n + 1, top + 1))
    stock = np.arange(top + 1)
    for n_c in range(n + 1):
        for n_a in range(n + 1 - n_c):
            bo = n - n_c - n_a
            joint = np.convolve(pmf_c[n_c, : n_c + 1], pmf_a[n_a, : n_a + 1])
            k = np.arange(len(joint))
            short = np.maximum(bo + k[None, :] - stock[:, None], 0)
            table[n_c, n_a] = short @ joint
    table.setflags(write=False)
    return table


def expected_state_cost(states: np.ndarray, params: InstanceParams) -> np.ndarray:
    """Expected holding, backorder and maintenance cost of the coming period."""
    table = _expected_backorder_table(params)
    stock = states[:, 2] + states[:, 3]
    return (
        params.h * stock
        + params.b * table[states[:, 0], states[:, 1], np.minimum(stock, table.shape[2] - 1)]
        + params.m * (params.mu_c * states[:, 0] + params.mu_a * states[:, 1])
    )
