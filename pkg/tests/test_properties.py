"""Fast invariants of the dynamics, the demand model and every policy."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import synthetic
from dualsource.core import batch
from dualsource.core.demand import cdf_table, failure_pmf, failure_tables, sample_failures
from dualsource.exact import enumerate_states, policy_iteration, simplify_params
from dualsource.heuristics import (
    BaseStockPolicy,
    DualIndexParams,
    DualIndexPolicy,
    exact_inner_solver,
    gamma_from_rho,
    iwa,
    rho_from_gamma,
)
from dualsource.learning import ClassifierPolicy, FeatureMap, avi_train, grid_for
from dualsource.sim import estimate_cost, run_batch

TRANSITIONS = 100_000
POLICY_STATES = 10_000


def random_states(params, count, rng):
    """Uniform-ish period-start states: stock only without backorders, ``IP <= S``."""
    lay = batch.Layout.of(params)
    out = np.empty((0, lay.dim), dtype=np.int64)
    while len(out) < count:
        m = 2 * count
        s = np.zeros((m, lay.dim), dtype=np.int64)
        installed = rng.integers(0, params.n + 1, m)
        s[:, 0] = rng.binomial(installed, 0.5)
        s[:, 1] = installed - s[:, 0]
        full = installed == params.n
        s[:, 2] = np.where(full, rng.integers(0, params.s_max + 1, m), 0)
        s[:, 3] = np.where(full, rng.integers(0, params.s_max + 1, m), 0)
        s[:, lay.uc] = rng.integers(0, max(params.s_max // params.q_c, 1) + 1, (m, params.l_c))
        s[:, lay.ua] = rng.integers(0, params.s_max + 1, (m, params.l_a))
        keep = batch.inventory_position(s, params) <= params.s_max
        out = np.vstack([out, s[keep]])
    return out[:count]


def random_transition(params, states, rng):
    budget = params.s_max - batch.inventory_position(states, params)
    x_c = rng.integers(0, budget // params.q_c + 1)
    x_a = rng.integers(0, budget - x_c * params.q_c + 1)
    x = np.stack([x_c, x_a], axis=1)
    k_c = rng.integers(0, states[:, 0] + 1)
    k_a = rng.integers(0, states[:, 1] + 1)
    nxt, costs = batch.step(states, x, k_c, k_a, params)
    return x, k_c, k_a, nxt, costs


@pytest.mark.parametrize("fixture", ["small_nb", "am_reliable"])
def test_conservation_and_ip_balance(fixture, request):
    params = request.getfixturevalue(fixture)
    rng = np.random.default_rng(11)
    states = random_states(params, TRANSITIONS, rng)
    x, k_c, k_a, nxt, costs = random_transition(params, states, rng)
    assert (nxt >= 0).all()
    # installed + backorders = N, with backorders recomputed from the flows
    installed_flow = nxt[:, 0] + nxt[:, 1] - (states[:, 0] + states[:, 1] - k_c - k_a)
    bo_next = batch.backorders(states, params) + k_c + k_a - installed_flow
    assert (bo_next >= 0).all()
    assert np.array_equal(nxt[:, 0] + nxt[:, 1] + bo_next, np.full(len(nxt), params.n))
    # backorders only when no stock is left over
    assert not ((bo_next > 0) & (nxt[:, 2] + nxt[:, 3] > 0)).any()
    ip_before = batch.inventory_position(states, params)
    ip_after = batch.inventory_position(nxt, params)
    assert np.array_equal(ip_after, ip_before + params.q_c * x[:, 0] + x[:, 1] - k_c - k_a)
    assert (costs >= 0).all()


def test_conservation_along_simulated_paths():
    params = synthetic(5)
    rng = np.random.default_rng(2)
    pmf_c, pmf_a = failure_tables(params)
    cdf_c, cdf_a = cdf_table(pmf_c), cdf_table(pmf_a)
    states = random_states(params, 1000, rng)
    for _ in range(100):
        budget = params.s_max - batch.inventory_position(states, params)
        x = np.stack([np.zeros(len(states), dtype=np.int64), np.maximum(budget, 0)], axis=1)
        k_c = sample_failures(cdf_c, states[:, 0], rng.random(len(states)))
        k_a = sample_failures(cdf_a, states[:, 1], rng.random(len(states)))
        assert (k_c <= states[:, 0]).all() and (k_a <= states[:, 1]).all()
        states, _ = batch.step(states, x, k_c, k_a, params)
        assert (states >= 0).all()
        assert (batch.backorders(states, params) >= 0).all()
        assert (batch.inventory_position(states, params) <= params.s_max).all()


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(0, 60),
    mu=st.floats(1e-4, 0.5),
    ratio=st.floats(1.0, 4.0),
    family=st.sampled_from(["poisson", "negative_binomial"]),
)
def test_pmf_normalised(n, mu, ratio, family):
    pmf = failure_pmf(n, mu, mu * ratio, family)
    assert len(pmf) == n + 1
    assert (pmf >= 0).all()
    assert abs(pmf.sum() - 1.0) <= 1e-12


def test_gamma_rho_inverse():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        gamma = rng.random()
        mu_c, mu_a = rng.uniform(1e-3, 0.5, 2)
        rho = rho_from_gamma(gamma, mu_c, mu_a)
        assert 0.0 <= rho <= 1.0
        assert abs(gamma_from_rho(rho, mu_c, mu_a) - gamma) <= 1e-12
        assert abs(rho_from_gamma(gamma_from_rho(gamma, mu_c, mu_a), mu_c, mu_a) - gamma) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(gamma=st.floats(0.0, 1.0), mu_c=st.floats(1e-4, 1.0), mu_a=st.floats(1e-4, 1.0))
def test_gamma_rho_inverse_generated(gamma, mu_c, mu_a):
    assert gamma_from_rho(rho_from_gamma(gamma, mu_c, mu_a), mu_c, mu_a) == pytest.approx(gamma, abs=1e-12)


def _random_classifier(params, seed):
    fm = FeatureMap(params.l_c, params.l_a)
    grid = grid_for([params])
    rng = np.random.default_rng(seed)
    layers = [
        (rng.normal(size=(fm.size, 16)), rng.normal(size=16)),
        (rng.normal(size=(16, len(grid))), rng.normal(size=len(grid))),
    ]
    return ClassifierPolicy(params, layers, fm, grid)


def _every_policy(params):
    pols = {
        "bsp-cm": BaseStockPolicy(params, "CM", params.s_max),
        "bsp-am": BaseStockPolicy(params, "AM", params.s_max // 2),
        "dual-index": DualIndexPolicy(params, DualIndexParams(1, 1)),
        "dual-index-wide": DualIndexPolicy(params, DualIndexParams(0, params.s_max)),
        "classifier": _random_classifier(params, 0),
        "avi": avi_train(params, samples=300, horizon=100, seed=1).policy,
    }
    return pols


def _check(policy, states, params):
    x = np.asarray(policy.decide_batch(states))
    budget = params.s_max - batch.inventory_position(states, params)
    assert x.shape == (len(states), 2)
    assert (x >= 0).all()
    assert (x[:, 0] * params.q_c + x[:, 1] <= budget).all()


def test_every_policy_feasible_on_random_states(small_nb):
    rng = np.random.default_rng(3)
    states = enumerate_states(small_nb).states
    sample = states[rng.integers(0, len(states), POLICY_STATES)]
    pols = _every_policy(small_nb)
    pols["exact"] = policy_iteration(small_nb).policy
    pols["exact-simplified"] = policy_iteration(simplify_params(small_nb, 0.3), "simplified").policy
    pols["iwa"] = iwa(small_nb, exact_inner_solver()).inner_policy
    for name, pol in pols.items():
        _check(pol, sample, small_nb)


def test_non_tabular_policies_feasible_on_synthetic():
    params = synthetic(10)
    states = random_states(params, POLICY_STATES, np.random.default_rng(4))
    for name, pol in _every_policy(params).items():
        _check(pol, states, params)


def test_crn_bit_identical_reruns(small_nb):
    pol = BaseStockPolicy(small_nb, "AM", 2)
    a = estimate_cost(pol, small_nb, replications=5, periods=500, warmup=50, seed=9)
    b = estimate_cost(pol, small_nb, replications=5, periods=500, warmup=50, seed=9)
    assert a.per_replication.tobytes() == b.per_replication.tobytes()
    c = run_batch(pol, small_nb, periods=500, warmup=50, replications=5, seed=9, chunk=7)
    assert c.average_cost().tobytes() == a.per_replication.tobytes()
    # replication r is the same stream whatever the batch size
    d = run_batch(pol, small_nb, periods=500, warmup=50, replications=2, seed=9)
    assert d.average_cost().tobytes() == a.per_replication[:2].tobytes()
    other = estimate_cost(pol, small_nb, replications=5, periods=500, warmup=50, seed=10)
    assert other.per_replication.tobytes() != a.per_replication.tobytes()
