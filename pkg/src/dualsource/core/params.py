"""Problem data: instance parameters and the value types passed between solvers."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Tuple

import numpy as np

DEMAND_FAMILIES = ("poisson", "negative_binomial")


class ContractViolation(RuntimeError):
    """An internal invariant was broken; always a bug, never bad input."""


@dataclass(frozen=True)
class InstanceParams:
    """All inputs of one dual-sourcing instance.

    Rates are per item per period; ``l_c``/``l_a`` are whole periods and
    ``q_c`` is the CM batch size in parts.
    """

    n: int
    s_max: int
    mu_c: float
    mu_a: float
    var_c: float
    var_a: float
    l_c: int
    l_a: int
    c_c: float
    c_a: float
    k_c: float
    k_a: float
    q_c: int
    m: float
    h: float
    b: float
    demand_family: str = "negative_binomial"

    def __post_init__(self) -> None:
        for name in ("n", "s_max", "l_c", "l_a", "q_c"):
            value = getattr(self, name)
            if int(value) != value:
                raise ValueError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n < 1:
            raise ValueError("n (installed base) must be >= 1")
        if self.s_max < 0:
            raise ValueError("s_max must be >= 0")
        if self.q_c < 1:
            raise ValueError("q_c must be >= 1")
        if self.l_c < 1 or self.l_a < 1:
            raise ValueError("lead times must be >= 1 period")
        if self.mu_c <= 0 or self.mu_a <= 0:
            raise ValueError("failure rates must be > 0")
        if self.demand_family not in DEMAND_FAMILIES:
            raise ValueError(f"unknown demand_family {self.demand_family!r}")
        if self.demand_family == "poisson":
            for mu, var, tag in ((self.mu_c, self.var_c, "c"), (self.mu_a, self.var_a, "a")):
                if not np.isclose(var, mu, rtol=1e-12, atol=0.0):
                    raise ValueError(f"poisson family requires var_{tag} == mu_{tag}")
        else:
            if self.var_c < self.mu_c or self.var_a < self.mu_a:
                raise ValueError("variance-to-mean ratio must be >= 1")
        for name in ("c_c", "c_a", "k_c", "k_a", "m", "h", "b"):
            if getattr(self, name) < 0:
                raise ValueError(f"cost {name} must be >= 0")

    @classmethod
    def poisson(cls, **kwargs) -> "InstanceParams":
        kwargs.setdefault("var_c", kwargs["mu_c"])
        kwargs.setdefault("var_a", kwargs["mu_a"])
        return cls(demand_family="poisson", **kwargs)

    @property
    def cm_first(self) -> bool:
        """CM stock and arrivals are installed first (lower or equal failure rate)."""
        return self.mu_c <= self.mu_a

    @property
    def state_dim(self) -> int:
        return 4 + self.l_c + self.l_a

    def with_(self, **changes) -> "InstanceParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class SystemState:
    """State at the start of a period.

    ``u_c`` holds CM *batches* and ``u_a`` AM *items*, one slot per past
    period, oldest first; the oldest slot arrives at the end of this period.
    """

    n_c: int
    n_a: int
    s_c: int
    s_a: int
    u_c: Tuple[int, ...] = field(default=())
    u_a: Tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "u_c", tuple(int(v) for v in self.u_c))
        object.__setattr__(self, "u_a", tuple(int(v) for v in self.u_a))

    @classmethod
    def initial(cls, params: InstanceParams) -> "SystemState":
        """Full CM installed base, no stock, empty pipelines."""
        return cls(params.n, 0, 0, 0, (0,) * params.l_c, (0,) * params.l_a)

    @classmethod
    def from_array(cls, row, params: InstanceParams) -> "SystemState":
        row = [int(v) for v in row]
        lc = params.l_c
        return cls(row[0], row[1], row[2], row[3], tuple(row[4:4 + lc]), tuple(row[4 + lc:]))

    def to_array(self) -> np.ndarray:
        return np.array([self.n_c, self.n_a, self.s_c, self.s_a, *self.u_c, *self.u_a], dtype=np.int64)

    def check(self, params: InstanceParams) -> None:
        """Raise :class:`ContractViolation` if any state invariant fails."""
        from .model import backorders, inventory_position

        values = (self.n_c, self.n_a, self.s_c, self.s_a, *self.u_c, *self.u_a)
        if min(values) < 0:
            raise ContractViolation(f"negative field in {self}")
        if len(self.u_c) != params.l_c or len(self.u_a) != params.l_a:
            raise ContractViolation(f"pipeline length mismatch in {self}")
        if self.n_c + self.n_a > params.n:
            raise ContractViolation(f"installed base exceeds N in {self}")
        if inventory_position(self, params) > params.s_max:
            raise ContractViolation(f"inventory position exceeds S in {self}")
        if self.s_c + self.s_a > 0 and backorders(self, params) > 0:
            raise ContractViolation(f"stock on hand while backordered in {self}")


@dataclass(frozen=True, order=True)
class Decision:
    x_c: int  # CM batches
    x_a: int  # AM items

    def items(self, params: InstanceParams) -> int:
        return self.x_c * params.q_c + self.x_a


@dataclass(frozen=True)
class FailureRealization:
    k_c: int
    k_a: int


@dataclass(frozen=True)
class CostBreakdown:
    purchase: float = 0.0
    holding: float = 0.0
    backorder: float = 0.0
    maintenance: float = 0.0

    @property
    def total(self) -> float:
        return self.purchase + self.holding + self.backorder + self.maintenance

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(
            self.purchase + other.purchase,
            self.holding + other.holding,
            self.backorder + other.backorder,
            self.maintenance + other.maintenance,
        )
