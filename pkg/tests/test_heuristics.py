import numpy as np
import pytest
from scipy import stats

from dualsource.core import SystemState
from dualsource.core.batch import expedited_position, inventory_position
from dualsource.exact import build_transitions, enumerate_states, reachable_evaluation
from dualsource.heuristics import (
    BaseStockPolicy,
    DualIndexParams,
    DualIndexPolicy,
    bsp_solve,
    dual_index_decide,
    dual_index_orders,
    dual_index_solve,
    exact_inner_solver,
    gamma_from_rho,
    iwa,
    rho_from_gamma,
)
from dualsource.heuristics.dual_index import exhaustive_search, max_delta, newsvendor_level

import oracles


def _exact_cost(params):
    table = build_transitions(enumerate_states(params))
    return lambda pol: reachable_evaluation(pol, table).g


def test_base_stock_single_source(small_nb):
    space = enumerate_states(small_nb)
    for source, col in (("CM", 1), ("AM", 0)):
        x = BaseStockPolicy(small_nb, source, 2).decide_batch(space.states)
        assert (x[:, col] == 0).all()
        assert ((x[:, 0] * small_nb.q_c + x[:, 1]) <= small_nb.s_max - inventory_position(space.states, small_nb)).all()


def test_base_stock_rounds_cm_batches_up(small_nb):
    s = SystemState(3, 0, 0, 0, (0, 0), (0,)).to_array()[None, :]
    assert BaseStockPolicy(small_nb, "CM", 1).decide_batch(s).tolist() == [[1, 0]]
    assert BaseStockPolicy(small_nb, "AM", 3).decide_batch(s).tolist() == [[0, 3]]
    with pytest.raises(ValueError):
        BaseStockPolicy(small_nb, "CM", small_nb.s_max + 1)
    with pytest.raises(ValueError):
        BaseStockPolicy(small_nb, "XX", 1)


def test_bsp_solve_matches_brute_force(small_nb):
    cost = _exact_cost(small_nb)
    res = bsp_solve(small_nb, cost)
    brute = {(src, lvl): oracles.evaluate_policy(small_nb, BaseStockPolicy(small_nb, src, lvl).decide)
             for src in ("CM", "AM") for lvl in range(small_nb.s_max + 1)}
    assert res.cost == pytest.approx(min(brute.values()), abs=1e-8)
    assert res.costs[(res.policy.source, res.policy.base_stock)] == res.cost


def test_bsp_ties_prefer_cm_and_lower_level(small_nb):
    res = bsp_solve(small_nb, lambda pol: 1.0)
    assert (res.policy.source, res.policy.base_stock) == ("CM", 0)


def test_dual_index_orders_example(small_nb):
    # IP_A counts stock, AM pipeline and CM batches due within the AM lead time
    s = SystemState(3, 0, 0, 0, (1, 0), (0,)).to_array()[None, :]
    assert expedited_position(s, small_nb)[0] == small_nb.q_c
    x = dual_index_orders(s, small_nb, 3, 3)
    assert x.tolist() == [[0, 1]]
    x = dual_index_orders(SystemState.initial(small_nb).to_array()[None, :], small_nb, 1, 3)
    assert x.tolist() == [[1, 1]]


def test_dual_index_feasible_everywhere(small_nb):
    space = enumerate_states(small_nb)
    budget = small_nb.s_max - inventory_position(space.states, small_nb)
    for z_a in range(small_nb.s_max + 1):
        for d in range(small_nb.s_max - z_a + 1):
            x = DualIndexPolicy(small_nb, DualIndexParams(z_a, d)).decide_batch(space.states)
            assert (x >= 0).all() and ((x[:, 0] * small_nb.q_c + x[:, 1]) <= np.maximum(budget, 0)).all()


def test_dual_index_params_validation(small_nb):
    with pytest.raises(ValueError):
        DualIndexParams(-1, 0)
    with pytest.raises(ValueError):
        DualIndexPolicy(small_nb, DualIndexParams(2, small_nb.s_max))
    d = dual_index_decide(SystemState.initial(small_nb), DualIndexParams(1, 1), small_nb)
    assert d.items(small_nb) <= small_nb.s_max


def test_newsvendor_level_without_overshoot(small_nb):
    over = np.zeros(small_nb.s_max + small_nb.n + 2)
    over[0] = 1
    periods = small_nb.l_a + 1
    mean = periods * small_nb.mu_a * small_nb.n
    var = periods * small_nb.var_a * small_nb.n
    r, p = mean**2 / (var - mean), mean / var
    expect = int(stats.nbinom.ppf(small_nb.b / (small_nb.b + small_nb.h), r, p))
    assert newsvendor_level(small_nb, over) == min(expect, small_nb.s_max)


def test_dual_index_solve_near_grid_optimum(small_nb):
    res = dual_index_solve(small_nb, seed=3, overshoot_periods=20_000, cost_periods=20_000, replications=4)
    grid = exhaustive_search(small_nb, seed=3, periods=20_000, replications=4)
    assert res.policy.levels.delta <= max_delta(small_nb)
    assert res.cost <= min(grid.values()) * 1.05
    assert 0.0 <= res.rho <= 1.0


@pytest.mark.parametrize("mu_c,mu_a", [(0.01, 0.02), (0.05, 0.03), (0.1, 0.1)])
def test_gamma_rho_inverse(mu_c, mu_a):
    for rho in np.linspace(0, 1, 11):
        g = gamma_from_rho(rho, mu_c, mu_a)
        assert g == pytest.approx(oracles.gamma_from_rho(rho, mu_c, mu_a), abs=1e-15)
        assert rho_from_gamma(g, mu_c, mu_a) == pytest.approx(rho, abs=1e-12)


def test_iwa_exact_inner_terminates(small_nb):
    cost = _exact_cost(small_nb)
    res = iwa(small_nb, exact_inner_solver(), cost)
    assert res.converged and res.iterations <= 50
    assert res.trace[0].gamma == 0.0
    assert abs(res.trace[-1].gamma - res.trace[-2].gamma) < 0.2
    assert res.cost == pytest.approx(cost(res.inner_policy))


def test_iwa_detects_oscillation(small_nb):
    calls = []

    def flip(single):
        calls.append(single.mu_c)
        return BaseStockPolicy(small_nb, "CM", 1), 0.0 if len(calls) % 2 == 0 else 1.0

    res = iwa(small_nb, flip, lambda pol: float(len(calls)), psi=0.01)
    assert res.oscillated and not res.converged
    assert res.cost == min(s.cost for s in res.trace)


def test_iwa_iteration_cap(small_nb):
    res = iwa(small_nb, lambda single: (BaseStockPolicy(small_nb, "CM", 1), 1.0), None, psi=0.01, max_iterations=1)
    assert res.iterations == 1 and not res.converged
    with pytest.raises(ValueError):
        iwa(small_nb, lambda single: None, psi=1.5)
