"""Rule-based policies: base stock, dual index, and the weight-iteration wrapper."""

from .bsp import BaseStockPolicy, BspResult, bsp_solve
from .dual_index import (
    DualIndexParams,
    DualIndexPolicy,
    DualIndexResult,
    dual_index_decide,
    dual_index_orders,
    dual_index_solve,
    measure_rho,
)
from .iwa import (
    IwaResult,
    IwaStep,
    dual_index_inner_solver,
    exact_inner_solver,
    gamma_from_rho,
    iwa,
    rho_from_gamma,
)

__all__ = [
    "BaseStockPolicy",
    "BspResult",
    "DualIndexParams",
    "DualIndexPolicy",
    "DualIndexResult",
    "IwaResult",
    "IwaStep",
    "bsp_solve",
    "dual_index_decide",
    "dual_index_inner_solver",
    "dual_index_orders",
    "dual_index_solve",
    "exact_inner_solver",
    "gamma_from_rho",
    "iwa",
    "measure_rho",
    "rho_from_gamma",
]
