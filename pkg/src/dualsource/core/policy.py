"""Common interface for every decision rule."""

from __future__ import annotations

import numpy as np

from .params import Decision, InstanceParams, SystemState


class Policy:
    """A stationary decision rule over full-model states.

    Subclasses implement :meth:`decide_batch`, taking state rows (see
    :mod:`dualsource.core.batch`) and returning integer rows ``(x_c, x_a)``.
    """

    params: InstanceParams
    name = "policy"

    def decide_batch(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decide(self, state: SystemState) -> Decision:
        x = self.decide_batch(state.to_array()[None, :])[0]
        return Decision(int(x[0]), int(x[1]))

    def describe(self) -> dict:
        return {"name": self.name}
