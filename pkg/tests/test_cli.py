import numpy as np
import pytest

from dualsource.cli import (
    ConfigError,
    EnergyBase,
    backorder_cost_from_fill_rate,
    generate_energy_grid,
    list_instances,
    load_hyperparameters,
    load_instance,
    load_policy,
    read_instance,
    save_instance,
    save_policy,
)
from dualsource.cli.config import instance_text, parse_instance, resolve_instance
from dualsource.cli.energy import instantiate, load_energy_template
from dualsource.cli.main import main
from dualsource.exact import enumerate_states, policy_iteration, simplify_params
from dualsource.heuristics import BaseStockPolicy, DualIndexParams, DualIndexPolicy
from dualsource.learning import avi_train

TABULATED = {
    "c_c": [5000, 5000, 5000, 5000, 1000, 1000, 1000, 1000, 2000, 2000],
    "k_c": [2000, 2000, 2000, 2000, 750, 750, 750, 750, 2000, 1000],
    "mu_c": [0.01, 0.01, 0.01, 0.01, 0.025, 0.025, 0.025, 0.025, 0.01, 0.025],
    "var_c": [0.02, 0.02, 0.02, 0.02, 0.05, 0.05, 0.05, 0.05, 0.02, 0.05],
    "l_c": [8, 8, 8, 8, 4, 4, 4, 4, 10, 6],
    "c_a": [10000, 10000, 7500, 7500, 2000, 2000, 1500, 1500, 3000, 2400],
    "mu_a": [0.02, 0.02, 0.015, 0.015, 0.05, 0.05, 0.0375, 0.0375, 0.015, 0.125],
    "var_a": [0.04, 0.04, 0.045, 0.045, 0.1, 0.1, 0.1125, 0.1125, 0.03, 0.375],
    "l_a": [2, 2, 4, 4, 1, 1, 2, 2, 1, 1],
    "m": [5000, 1250, 5000, 1250, 1000, 250, 1000, 250, 500, 2000],
    "h": [29, 19, 29, 19, 6, 4, 6, 4, 12, 12],
    "b": [5725, 1899, 5725, 1899, 1145, 380, 1145, 380, 2290, 2290],
    "s_max": [8, 7, 8, 7, 10, 9, 10, 9, 6, 11],
    "q_c": [5, 5, 5, 5, 7, 7, 7, 7, 5, 5],
}


@pytest.mark.parametrize("i", range(1, 11))
def test_bundled_synthetic_instances(i):
    p = load_instance(f"synthetic-{i:02d}")
    assert p.n == 7 and p.k_a == 0 and p.demand_family == "negative_binomial"
    for key, col in TABULATED.items():
        assert getattr(p, key) == col[i - 1], key


def test_large_variants():
    for i, j in ((11, 1), (12, 2)):
        big, base = load_instance(f"synthetic-{i}"), load_instance(f"synthetic-{j:02d}")
        assert big.n == 20 and big.with_(n=7) == base


def test_library_listing():
    names = list_instances()
    assert {"micro", "energy-template", "synthetic-01", "synthetic-12"} <= set(names)


def test_instance_files_roundtrip_bytes(tmp_path):
    for name in list_instances():
        if name == "energy-template":
            continue
        path = resolve_instance(name)
        doc = read_instance(name)
        out = tmp_path / f"{name}.ini"
        save_instance(doc, out)
        assert out.read_bytes() == path.read_bytes()


def test_instance_errors(tmp_path):
    good = instance_text(read_instance("micro"))
    with pytest.raises(ConfigError, match=r":\d+: unknown key 'colour'"):
        parse_instance(good + "colour = red\n")
    with pytest.raises(ConfigError, match="variance-to-mean"):
        parse_instance(instance_text(read_instance("synthetic-01")).replace("var_c = 0.02", "var_c = 0.005"))
    with pytest.raises(ConfigError, match="not a number"):
        parse_instance(good.replace("h = 2", "h = two"))
    with pytest.raises(ConfigError, match="template"):
        load_instance("energy-template")
    with pytest.raises(ConfigError):
        load_instance("no-such-instance")


def test_poisson_variances_optional():
    text = instance_text(read_instance("micro"))
    text = "\n".join(l for l in text.splitlines() if not l.startswith("var_")) + "\n"
    p = parse_instance(text).params
    assert p.var_c == p.mu_c and p.var_a == p.mu_a
    nb = instance_text(read_instance("synthetic-01")).replace("var_c = 0.02\n", "")
    with pytest.raises(ConfigError, match="var_c"):
        parse_instance(nb)


def test_library_env_override(tmp_path, monkeypatch):
    p = load_instance("micro").with_(h=7.0)
    save_instance(p, tmp_path / "micro.ini")
    monkeypatch.setenv("DUALSOURCE_LIBRARY", str(tmp_path))
    assert load_instance("micro").h == 7.0


def test_fill_rate_helper():
    assert backorder_cost_from_fill_rate(29, 0.995) == pytest.approx(5771, abs=1)
    with pytest.raises(ValueError):
        backorder_cost_from_fill_rate(29, 1.0)


def test_energy_grid_counts():
    template = load_energy_template()
    assert len(template) == 5
    grid = generate_energy_grid(template, 1000.0)
    assert len(grid) == 1215
    for k in range(5):
        assert len(generate_energy_grid(template[k : k + 1], 1000.0)) == 243
    assert generate_energy_grid(template, 1000.0) == grid


def test_energy_grid_levels():
    template = load_energy_template()
    item = template[0]
    base = EnergyBase(1000.0)
    single = generate_energy_grid([item], base, {})
    assert single == [instantiate(item, base)]
    orig = single[0]
    half = instantiate(item, base, l_a=0.5)
    assert half.l_a == max(1, round(0.5 * orig.l_a))
    assert instantiate(item, base, platforms=25).n == item.parts * 25
    assert instantiate(item, base, c_a=1.25).c_a == pytest.approx(1.25 * orig.c_a)
    assert instantiate(item, base, b="max").b == pytest.approx(base.b_max * orig.b)
    with pytest.raises(ValueError):
        generate_energy_grid([item], base, {"c_a": [-0.25]})
    with pytest.raises(ValueError):
        generate_energy_grid([item], base, {"colour": [1]})
    with pytest.raises(ValueError):
        EnergyBase(0.0)


def test_hyperparameter_file(tmp_path):
    hp = load_hyperparameters()
    assert hp["avi"]["epsilon"] == 0.1
    f = tmp_path / "hp.ini"
    f.write_text("[dcl]\nsamples = 50\n")
    assert load_hyperparameters(f)["dcl"]["samples"] == 50
    f.write_text("[dcl]\nsampels = 50\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_hyperparameters(f)


def test_policy_files_roundtrip(tmp_path, small_nb):
    states = enumerate_states(small_nb).states
    sol = policy_iteration(small_nb)
    simple = policy_iteration(simplify_params(small_nb, 0.2), "simplified")
    pols = [
        BaseStockPolicy(small_nb, "AM", 2),
        DualIndexPolicy(small_nb, DualIndexParams(1, 2)),
        sol.policy,
        simple.policy,
        avi_train(small_nb, samples=150, horizon=50).policy,
    ]
    for k, pol in enumerate(pols):
        path = tmp_path / f"p{k}"
        save_policy(pol, path)
        back = load_policy(path, small_nb)
        assert np.array_equal(back.decide_batch(states), pol.decide_batch(states))


def test_policy_file_errors(tmp_path, small_nb, micro):
    path = tmp_path / "p"
    save_policy(policy_iteration(micro).policy, path)
    with pytest.raises(ValueError):
        load_policy(path, small_nb)
    path.write_text("kind = base-stock\n")
    with pytest.raises(ValueError, match="header"):
        load_policy(path, small_nb)


def test_cli_solve_and_evaluate(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["solve-exact", "--instance", "micro", "--out", str(out)]) == 0
    assert "micro: g=" in capsys.readouterr().out
    args = ["evaluate", "--instance", "micro", "--policy", str(out / "{instance}.exact.policy"), "--policy", "bsp",
            "--replications", "3", "--periods", "300", "--warmup", "30", "--out", str(out)]
    assert main(args) == 0
    first = (out / "breakdown.csv").read_bytes()
    assert main(args) == 0
    assert (out / "breakdown.csv").read_bytes() == first
    assert first.count(b"\n") == 4


def test_cli_gaps_and_iwa(tmp_path):
    out = tmp_path / "r"
    assert main(["gaps", "--instance", "micro", "--replications", "3", "--periods", "300", "--warmup", "30",
                 "--out", str(out)]) == 0
    assert (out / "gaps.csv").read_text().count("\n") == 2 + 3
    assert main(["run-iwa", "--instance", "micro", "--replications", "2", "--periods", "200", "--out", str(out)]) == 0
    assert (out / "micro.iwa_trace.csv").exists() and (out / "micro.iwa.policy").exists()


def test_cli_errors(tmp_path, capsys):
    assert main(["solve-exact", "--out", str(tmp_path)]) == 2
    assert main(["solve-exact", "--instance", "nope", "--out", str(tmp_path)]) == 2
    assert main(["evaluate", "--instance", "micro", "--policy", "missing.json", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["list-instances"]) == 0
