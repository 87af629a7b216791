"""Learned policies: value-function AVI, classifier DCL and population training."""

from .avi import AviDivergence, AviResult, LinearVFA, RecursiveLeastSquares, VfaGreedyPolicy, avi_train
from .common import expected_state_cost, feasible_mask, global_grid, grid_for
from .dcl import (
    ClassifierPolicy,
    DclResult,
    NetConfig,
    RolloutConfig,
    dcl_rollout_estimate,
    dcl_train,
    label_states,
)
from .epl import EplGrid, EplGridError, EplResult, epl_build_grid, epl_config, epl_sample, epl_train
from .features import FeatureMap, ParamBounds, extract_features

__all__ = [
    "AviDivergence",
    "AviResult",
    "ClassifierPolicy",
    "DclResult",
    "EplGrid",
    "EplGridError",
    "EplResult",
    "FeatureMap",
    "LinearVFA",
    "NetConfig",
    "ParamBounds",
    "RecursiveLeastSquares",
    "RolloutConfig",
    "VfaGreedyPolicy",
    "avi_train",
    "dcl_rollout_estimate",
    "dcl_train",
    "epl_build_grid",
    "epl_config",
    "epl_sample",
    "epl_train",
    "expected_state_cost",
    "extract_features",
    "feasible_mask",
    "global_grid",
    "grid_for",
    "label_states",
]
