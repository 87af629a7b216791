import numpy as np
import pytest

from dualsource.core import SystemState
from dualsource.exact import policy_iteration
from dualsource.heuristics import BaseStockPolicy, DualIndexParams, DualIndexPolicy
from dualsource.sim import (
    breakdown_report,
    compare_paired,
    estimate_cost,
    optimality_gap,
    read_csv,
    run_batch,
    simulate_episode,
    write_csv,
)
from dualsource.sim.reports import breakdown_rows, order_rows


@pytest.fixture(scope="module")
def optimal(small_nb):
    return policy_iteration(small_nb)


def test_estimate_deterministic(small_nb):
    pol = BaseStockPolicy(small_nb, "CM", 2)
    a = estimate_cost(pol, small_nb, 5, 500, 50, seed=11)
    b = estimate_cost(pol, small_nb, 5, 500, 50, seed=11)
    assert np.array_equal(a.per_replication, b.per_replication)
    c = estimate_cost(pol, small_nb, 5, 500, 50, seed=12)
    assert not np.array_equal(a.per_replication, c.per_replication)


def test_replication_matches_single_episode(small_nb):
    pol = BaseStockPolicy(small_nb, "AM", 2)
    est = estimate_cost(pol, small_nb, 4, 300, 20, seed=5)
    ep = simulate_episode(pol, small_nb, 300, 20, seed=5, replication=2)
    assert ep.average_cost == pytest.approx(est.per_replication[2], rel=1e-12)


def test_common_random_numbers_identical_policies(small_nb):
    pol = BaseStockPolicy(small_nb, "CM", 2)
    paired = compare_paired(pol, BaseStockPolicy(small_nb, "CM", 2), small_nb, 6, 400, 40, seed=1)
    assert paired.difference == 0.0 and paired.half_width == 0.0


def test_single_replication_degenerate(small_nb):
    est = estimate_cost(BaseStockPolicy(small_nb, "CM", 1), small_nb, 1, 200, 0)
    assert est.degenerate and est.half_width == 0.0
    with pytest.raises(ValueError):
        estimate_cost(BaseStockPolicy(small_nb, "CM", 1), small_nb, 0, 200, 0)


def test_breakdown_adds_up(small_nb):
    est = estimate_cost(DualIndexPolicy(small_nb, DualIndexParams(1, 1)), small_nb, 8, 500, 50)
    assert est.breakdown.sum() == pytest.approx(est.mean, rel=1e-12)
    row = breakdown_report("x", "di", est)
    assert row.total == pytest.approx(est.mean)
    episodes = [simulate_episode(BaseStockPolicy(small_nb, "CM", 2), small_nb, 100, seed=r) for r in range(3)]
    assert breakdown_report("x", "bsp", episodes).half_widths.shape == (4,)


def test_scripted_uniforms_force_failures(small_nb):
    pol = BaseStockPolicy(small_nb, "CM", 0)
    u = np.full((3, 1, 2), 0.999999)  # every installed CM item fails
    stats = run_batch(pol, small_nb, periods=3, warmup=0, uniforms=u)
    final = SystemState.from_array(stats.final_states[0], small_nb)
    assert final.n_c == 0 and final.n_a == 0
    assert stats.costs[0, 2] == pytest.approx(small_nb.b * (3 + 3 + 3))


def test_infeasible_policy_rejected(small_nb):
    class Greedy(BaseStockPolicy):
        def decide_batch(self, states):
            return np.full((states.shape[0], 2), 9)

    with pytest.raises(ValueError, match="ordered"):
        estimate_cost(Greedy(small_nb, "CM", 0), small_nb, 1, 10, 0)


def test_simulation_agrees_with_exact_gain(small_nb, optimal):
    est = estimate_cost(optimal.policy, small_nb, 40, 5000, 500, seed=3)
    assert abs(est.mean - optimal.g) <= 3 * est.std_error


def test_half_width_shrinks_with_replications(small_nb):
    pol = BaseStockPolicy(small_nb, "CM", 2)
    ratios = []
    for seed in range(6):
        a = estimate_cost(pol, small_nb, 20, 400, 40, seed=seed).half_width
        b = estimate_cost(pol, small_nb, 40, 400, 40, seed=seed + 100).half_width
        ratios.append(b / a)
    assert np.median(ratios) == pytest.approx(1 / np.sqrt(2), abs=0.2)


def test_optimality_gap():
    assert optimality_gap(110.0, 100.0) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        optimality_gap(1.0, 0.0)


def test_csv_roundtrip(tmp_path, small_nb):
    est = estimate_cost(BaseStockPolicy(small_nb, "CM", 2), small_nb, 3, 200, 10)
    path = tmp_path / "b.csv"
    write_csv(path, "breakdown", breakdown_rows([breakdown_report("inst", "bsp", est)]))
    schema, version, rows = read_csv(path)
    assert (schema, version) == ("breakdown", 1)
    assert float(rows[0]["total"]) == est.breakdown.sum()
    orders = list(order_rows("inst", "bsp", est.order_histogram))
    assert sum(r[4] for r in orders if r[2] == "CM") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        write_csv(tmp_path / "g.csv", "gaps", [(1, 2)])
