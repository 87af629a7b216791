"""Failure-count distributions of an installed (sub)base.

The per-item failure process is a Poisson process with logarithmic
compounding, which is the negative binomial.  For ``n`` items the count has
mean ``mu * n`` and variance ``var * n``; counts above ``n`` are folded into
``k = n`` because at most ``n`` operating items can fail.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import stats

from .params import InstanceParams


def nbinom_parameters(mean: float, variance: float) -> tuple[float, float]:
    """``(r, p)`` of the negative binomial with the given moments (scipy convention)."""
    if variance <= mean:
        raise ValueError(f"negative binomial needs variance > mean, got {variance} <= {mean}")
    return mean * mean / (variance - mean), mean / variance


def _count_distribution(mean: float, variance: float, family: str):
    if family == "poisson" or np.isclose(variance, mean, rtol=1e-12, atol=0.0):
        return stats.poisson(mean)
    r, p = nbinom_parameters(mean, variance)
    return stats.nbinom(r, p)


def failure_pmf(n: int, mu: float, var: float, family: str = "negative_binomial") -> np.ndarray:
    """Truncated pmf of the number of failures among ``n`` items, support ``0..n``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if family not in ("poisson", "negative_binomial"):
        raise ValueError(f"unknown family {family!r}")
    if family == "negative_binomial" and var < mu:
        raise ValueError(f"negative binomial needs var >= mu, got var={var}, mu={mu}")
    if n == 0:
        return np.ones(1)
    dist = _count_distribution(mu * n, var * n, family)
    pmf = np.empty(n + 1)
    pmf[:n] = dist.pmf(np.arange(n))
    # survival function, not 1 - cdf, so tiny tails do not vanish
    pmf[n] = dist.sf(n - 1)
    return pmf


def demand_sf(mean: float, variance: float, family: str, k) -> np.ndarray:
    """P(D > k) for an untruncated failure count with the given moments."""
    return _count_distribution(mean, variance, family).sf(k)


def demand_pmf(mean: float, variance: float, family: str, support: int) -> np.ndarray:
    """Untruncated pmf on ``0..support`` (no folding)."""
    return _count_distribution(mean, variance, family).pmf(np.arange(support + 1))


@lru_cache(maxsize=256)
def pmf_table(n_max: int, mu: float, var: float, family: str) -> np.ndarray:
    """Row ``n`` holds ``failure_pmf(n, ...)`` zero-padded to width ``n_max + 1``."""
    table = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        table[n, : n + 1] = failure_pmf(n, mu, var, family)
    table.setflags(write=False)
    return table


def cdf_table(pmf: np.ndarray) -> np.ndarray:
    """Cumulative table for inverse-transform sampling; padded entries are 1."""
    cdf = np.cumsum(pmf, axis=1)
    for n in range(pmf.shape[0]):
        cdf[n, n:] = 1.0
    return cdf


def failure_tables(params: InstanceParams) -> tuple[np.ndarray, np.ndarray]:
    """``(pmf_c, pmf_a)`` tables for every installed count ``0..N``."""
    return (
        pmf_table(params.n, params.mu_c, params.var_c, params.demand_family),
        pmf_table(params.n, params.mu_a, params.var_a, params.demand_family),
    )


def sample_failures(cdf: np.ndarray, counts: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-transform draw of failure counts for each installed count.

    ``uniforms`` in [0, 1) are the common random numbers; a fixed uniform maps
    to the same quantile whatever policy produced ``counts``.
    """
    rows = cdf[counts]
    return (rows <= uniforms[:, None]).sum(axis=1)
