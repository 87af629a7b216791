"""State features shared by the value-function and classifier learners.

Raw features are in natural units.  ``FeatureMap`` scales them by
instance-size constants and pads pipelines to a common length so a single
model can serve instances of different shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from ..core import batch
from ..core.params import InstanceParams

PARAM_FIELDS = (
    "n", "s_max", "mu_c", "mu_a", "var_c", "var_a", "l_c", "l_a",
    "c_c", "c_a", "k_c", "k_a", "q_c", "m", "h", "b",
)
SCHEMA_VERSION = 1


def derived_features(states: np.ndarray, params: InstanceParams) -> np.ndarray:
    """Columns: inventory position, expected failures, failure variance, inventory level."""
    n_c, n_a = states[:, 0], states[:, 1]
    ip = batch.inventory_position(states, params)
    mean = n_c * params.mu_c + n_a * params.mu_a
    var = n_c * params.var_c + n_a * params.var_a
    level = states[:, 2] + states[:, 3] - batch.backorders(states, params)
    return np.stack([ip, mean, var, level], axis=1).astype(float)


def raw_features(states: np.ndarray, params: InstanceParams) -> np.ndarray:
    """State columns followed by :func:`derived_features`."""
    return np.hstack([states.astype(float), derived_features(states, params)])


@dataclass(frozen=True)
class ParamBounds:
    """Per-parameter ``[low, high]`` used to normalise appended instance parameters."""

    low: Tuple[float, ...]
    high: Tuple[float, ...]

    @classmethod
    def of(cls, population: Sequence[InstanceParams]) -> "ParamBounds":
        values = np.array([[float(getattr(p, f)) for f in PARAM_FIELDS] for p in population])
        return cls(tuple(values.min(axis=0)), tuple(values.max(axis=0)))

    def contains(self, params: InstanceParams, tol: float = 1e-9) -> bool:
        v = np.array([float(getattr(params, f)) for f in PARAM_FIELDS])
        return bool(np.all(v >= np.array(self.low) - tol) and np.all(v <= np.array(self.high) + tol))

    def normalise(self, params: InstanceParams) -> np.ndarray:
        lo, hi = np.array(self.low), np.array(self.high)
        v = np.array([float(getattr(params, f)) for f in PARAM_FIELDS])
        span = np.where(hi > lo, hi - lo, 1.0)
        return np.where(hi > lo, (v - lo) / span, 0.0)


@dataclass(frozen=True)
class FeatureMap:
    """Fixed-length scaled features for states of any instance up to the given shape."""

    l_c: int
    l_a: int
    param_bounds: Optional[ParamBounds] = field(default=None)

    @classmethod
    def for_instances(cls, population: Sequence[InstanceParams], augment: bool = False) -> "FeatureMap":
        return cls(
            max(p.l_c for p in population),
            max(p.l_a for p in population),
            ParamBounds.of(population) if augment else None,
        )

    @property
    def size(self) -> int:
        base = 4 + self.l_c + self.l_a + 4
        return base + (len(PARAM_FIELDS) if self.param_bounds is not None else 0)

    def check(self, params: InstanceParams) -> None:
        if params.l_c > self.l_c or params.l_a > self.l_a:
            raise ValueError("instance pipelines are longer than the feature map supports")
        if self.param_bounds is not None and not self.param_bounds.contains(params):
            raise ValueError("instance parameters lie outside the training grid")

    def __call__(self, states: np.ndarray, params: InstanceParams) -> np.ndarray:
        rows = states.shape[0]
        n, s = float(params.n), float(max(params.s_max, 1))
        scale_mu = params.n * max(params.mu_c, params.mu_a)
        scale_var = params.n * max(params.var_c, params.var_a)
        out = np.zeros((rows, self.size))
        out[:, 0:2] = states[:, 0:2] / n
        out[:, 2:4] = states[:, 2:4] / s
        lay = batch.Layout.of(params)
        # pipelines are right-aligned so the newest order always sits in the last slot
        c0 = 4 + self.l_c - params.l_c
        out[:, c0 : 4 + self.l_c] = states[:, lay.uc] * params.q_c / s
        a0 = 4 + self.l_c + self.l_a - params.l_a
        out[:, a0 : 4 + self.l_c + self.l_a] = states[:, lay.ua] / s
        d = derived_features(states, params)
        j = 4 + self.l_c + self.l_a
        out[:, j] = d[:, 0] / s
        out[:, j + 1] = d[:, 1] / scale_mu
        out[:, j + 2] = d[:, 2] / scale_var
        out[:, j + 3] = d[:, 3] / s
        if self.param_bounds is not None:
            out[:, j + 4 :] = self.param_bounds.normalise(params)
        return out

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA_VERSION, "l_c": self.l_c, "l_a": self.l_a}
        if self.param_bounds is not None:
            d["param_low"] = list(self.param_bounds.low)
            d["param_high"] = list(self.param_bounds.high)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMap":
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported feature schema {d.get('schema')!r}")
        bounds = None
        if "param_low" in d:
            bounds = ParamBounds(tuple(d["param_low"]), tuple(d["param_high"]))
        return cls(int(d["l_c"]), int(d["l_a"]), bounds)


def extract_features(states: np.ndarray, params: InstanceParams, feature_map: Optional[FeatureMap] = None) -> np.ndarray:
    """Scaled features; a per-instance map is built when none is given."""
    states = np.atleast_2d(states)
    feature_map = feature_map or FeatureMap(params.l_c, params.l_a)
    return feature_map(states, params)
