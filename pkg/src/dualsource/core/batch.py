"""Array versions of the one-period dynamics, one state per row.

Row layout: ``[n_c, n_a, s_c, s_a, u_c[0..l_c-1], u_a[0..l_a-1]]``.  These
must agree exactly with :mod:`dualsource.core.model`; the test-suite checks
both paths against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import InstanceParams


@dataclass(frozen=True)
class Layout:
    l_c: int
    l_a: int

    @classmethod
    def of(cls, params: InstanceParams) -> "Layout":
        return cls(params.l_c, params.l_a)

    @property
    def dim(self) -> int:
        return 4 + self.l_c + self.l_a

    @property
    def uc(self) -> slice:
        return slice(4, 4 + self.l_c)

    @property
    def ua(self) -> slice:
        return slice(4 + self.l_c, 4 + self.l_c + self.l_a)


def backorders(states: np.ndarray, params: InstanceParams) -> np.ndarray:
    return params.n - states[:, 0] - states[:, 1]


def inventory_position(states: np.ndarray, params: InstanceParams) -> np.ndarray:
    lay = Layout.of(params)
    return (
        states[:, 2]
        + states[:, 3]
        + params.q_c * states[:, lay.uc].sum(axis=1)
        + states[:, lay.ua].sum(axis=1)
        - backorders(states, params)
    )


def expedited_position(states: np.ndarray, params: InstanceParams) -> np.ndarray:
    """Net stock plus all AM orders plus CM orders arriving within the AM lead time."""
    lay = Layout.of(params)
    # CM slot j (oldest first) arrives at the end of period t + j, together
    # with an AM order placed now when j == l_a
    uc = states[:, lay.uc][:, : params.l_a + 1]
    return (
        states[:, 2]
        + states[:, 3]
        - backorders(states, params)
        + states[:, lay.ua].sum(axis=1)
        + params.q_c * uc.sum(axis=1)
    )


def purchase_cost(x: np.ndarray, params: InstanceParams) -> np.ndarray:
    x_c, x_a = x[:, 0], x[:, 1]
    return (
        params.k_c * (x_c > 0)
        + params.k_a * (x_a > 0)
        + params.c_c * params.q_c * x_c
        + params.c_a * x_a
    )


def step(
    states: np.ndarray,
    x: np.ndarray,
    k_c: np.ndarray,
    k_a: np.ndarray,
    params: InstanceParams,
):
    """Apply decisions ``x`` (rows ``(x_c, x_a)``) and failures.

    Returns ``(next_states, costs)`` where ``costs`` has columns
    purchase, holding, backorder, maintenance.
    """
    lay = Layout.of(params)
    n_c, n_a, s_c, s_a = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    uc = states[:, lay.uc]
    ua = states[:, lay.ua]
    bo = params.n - n_c - n_a
    demand = bo + k_c + k_a
    arr_c = params.q_c * uc[:, 0]
    arr_a = ua[:, 0]
    if params.cm_first:
        y_c = np.minimum(demand, s_c)
        y_a = np.minimum(demand - y_c, s_a)
        z_c = np.minimum(demand - y_c - y_a, arr_c)
        z_a = np.minimum(demand - y_c - y_a - z_c, arr_a)
    else:
        y_a = np.minimum(demand, s_a)
        y_c = np.minimum(demand - y_a, s_c)
        z_a = np.minimum(demand - y_c - y_a, arr_a)
        z_c = np.minimum(demand - y_c - y_a - z_a, arr_c)

    stock = s_c + s_a
    costs = np.empty((states.shape[0], 4))
    costs[:, 0] = purchase_cost(x, params)
    costs[:, 1] = params.h * stock
    costs[:, 2] = params.b * np.maximum(demand - stock, 0)
    costs[:, 3] = params.m * (params.mu_c * n_c + params.mu_a * n_a)

    nxt = np.empty_like(states)
    nxt[:, 0] = n_c - k_c + y_c + z_c
    nxt[:, 1] = n_a - k_a + y_a + z_a
    nxt[:, 2] = s_c + arr_c - y_c - z_c
    nxt[:, 3] = s_a + arr_a - y_a - z_a
    c0 = lay.uc.start
    a0 = lay.ua.start
    nxt[:, c0 : c0 + params.l_c - 1] = uc[:, 1:]
    nxt[:, c0 + params.l_c - 1] = x[:, 0]
    nxt[:, a0 : a0 + params.l_a - 1] = ua[:, 1:]
    nxt[:, a0 + params.l_a - 1] = x[:, 1]
    return nxt, costs


def cap_to_budget(x: np.ndarray, states: np.ndarray, params: InstanceParams) -> np.ndarray:
    """Clip ``(x_c, x_a)`` to the ``S - IP`` budget; CM batches keep priority."""
    budget = np.maximum(params.s_max - inventory_position(states, params), 0)
    x = np.maximum(x, 0)
    x_c = np.minimum(x[:, 0], budget // params.q_c)
    x_a = np.minimum(x[:, 1], budget - x_c * params.q_c)
    return np.stack([x_c, x_a], axis=1)


def decision_grid(s_max: int, q_c: int) -> np.ndarray:
    """All ``(x_c, x_a)`` with ``x_c*q_c + x_a <= s_max`` in lexicographic order."""
    rows = [(x_c, x_a) for x_c in range(s_max // q_c + 1) for x_a in range(s_max - x_c * q_c + 1)]
    return np.array(rows, dtype=np.int64).reshape(-1, 2)
