"""Single-source base-stock policies and the search over source and level."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..core.batch import inventory_position
from ..core.params import InstanceParams
from ..core.policy import Policy

SOURCES = ("CM", "AM")


class BaseStockPolicy(Policy):
    """Order up to ``base_stock`` from one source only.

    CM orders are rounded up to whole batches, then capped by the ``S - IP``
    budget (which can bring them back under the target).
    """

    name = "bsp"

    def __init__(self, params: InstanceParams, source: str, base_stock: int):
        if source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        if not 0 <= base_stock <= params.s_max:
            raise ValueError(f"base_stock must lie in [0, {params.s_max}]")
        self.params = params
        self.source = source
        self.base_stock = int(base_stock)

    def decide_batch(self, states: np.ndarray) -> np.ndarray:
        p = self.params
        ip = inventory_position(states, p)
        shortfall = np.maximum(self.base_stock - ip, 0)
        budget = np.maximum(p.s_max - ip, 0)
        x = np.zeros((states.shape[0], 2), dtype=np.int64)
        if self.source == "CM":
            x[:, 0] = np.minimum(-(-shortfall // p.q_c), budget // p.q_c)
        else:
            x[:, 1] = np.minimum(shortfall, budget)
        return x

    def describe(self) -> dict:
        return {"name": self.name, "source": self.source, "base_stock": self.base_stock}

    def __repr__(self) -> str:
        return f"BaseStockPolicy(source={self.source!r}, base_stock={self.base_stock})"


@dataclass
class BspResult:
    policy: BaseStockPolicy
    cost: float
    costs: Dict[Tuple[str, int], float]


Evaluator = Callable[[Policy], float]


def bsp_solve(params: InstanceParams, evaluator: Evaluator, levels: Optional[range] = None) -> BspResult:
    """Exhaustive search over ``(source, level)``; ties prefer CM, then the lower level."""
    levels = range(params.s_max + 1) if levels is None else levels
    costs: Dict[Tuple[str, int], float] = {}
    best: Optional[Tuple[float, int, int]] = None
    for s_rank, source in enumerate(SOURCES):
        for level in levels:
            cost = float(evaluator(BaseStockPolicy(params, source, level)))
            costs[(source, level)] = cost
            key = (cost, s_rank, level)
            if best is None or key < best:
                best = key
    cost, s_rank, level = best
    return BspResult(BaseStockPolicy(params, SOURCES[s_rank], level), cost, costs)
