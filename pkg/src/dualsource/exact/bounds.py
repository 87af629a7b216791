"""Parameter helpers: the stock-cap rule and the single-rate reduction."""

from __future__ import annotations

import math

from ..core.demand import demand_sf
from ..core.params import InstanceParams


def determine_S(params: InstanceParams, epsilon: float) -> int:
    """Smallest cap ``S`` with ``P(D > S) < epsilon``.

    ``D`` is demand over ``l_c + 1`` periods with all ``N`` items failing at
    the higher of the two rates.  Never below the ceiling of ``E[D]``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    mu, var = (params.mu_a, params.var_a) if params.mu_a >= params.mu_c else (params.mu_c, params.var_c)
    periods = params.l_c + 1
    mean, variance = params.n * mu * periods, params.n * var * periods
    s = math.ceil(mean - 1e-12)
    while demand_sf(mean, variance, params.demand_family, s) >= epsilon:
        s += 1
    return s


def simplify_params(params: InstanceParams, gamma: float) -> InstanceParams:
    """Single-rate parameters for an installed base with AM share ``gamma``.

    The failure count of a random item mixes both modes; its variance adds
    the between-mode spread ``gamma (1 - gamma) (mu_a - mu_c)^2``.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if gamma == 0.0:
        mu, var = params.mu_c, params.var_c
    elif gamma == 1.0:
        mu, var = params.mu_a, params.var_a
    else:
        mu = gamma * params.mu_a + (1 - gamma) * params.mu_c
        var = (
            gamma * params.var_a
            + (1 - gamma) * params.var_c
            + gamma * (1 - gamma) * (params.mu_a - params.mu_c) ** 2
        )
    return params.with_(mu_c=mu, mu_a=mu, var_c=var, var_a=var)
