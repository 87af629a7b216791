"""Command-line entry point: ``dualsource <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional

from ..core.params import InstanceParams
from ..core.policy import Policy
from ..exact import StateSpaceTooLarge, policy_iteration
from ..heuristics import bsp_solve, dual_index_inner_solver, dual_index_solve, exact_inner_solver, iwa
from ..sim import breakdown_report, estimate_cost, optimality_gap, write_csv
from ..sim.reports import breakdown_rows, order_rows
from .artifacts import ArtifactError, load_policy, save_policy
from .config import ConfigError, instance_set, list_instances, load_hyperparameters, read_instance

log = logging.getLogger("dualsource")

BUILTIN_POLICIES = ("exact", "bsp", "iwa", "dual-index")


class CommandError(RuntimeError):
    pass


def _instances(args) -> List[str]:
    refs = list(args.instance or [])
    for name in args.instance_set or []:
        refs += instance_set(name)
    if not refs:
        raise CommandError("give --instance or --instance-set")
    return refs


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _evaluator(args, params: InstanceParams) -> Callable[[Policy], float]:
    return lambda pol: estimate_cost(pol, params, args.replications, args.periods, args.warmup, args.seed).mean


def _label(args, ref: str) -> str:
    return Path(ref).stem


def _solve_exact(params: InstanceParams):
    try:
        return policy_iteration(params)
    except StateSpaceTooLarge as exc:
        raise CommandError(f"exact solve refused: {exc}") from None


def _builtin(name: str, params: InstanceParams, args, hp) -> Policy:
    if name == "exact":
        return _solve_exact(params).policy
    if name == "bsp":
        return bsp_solve(params, _evaluator(args, params)).policy
    if name == "dual-index":
        return dual_index_solve(params, seed=args.seed).policy
    if name == "iwa":
        return _run_iwa(params, args, hp).inner_policy
    raise CommandError(f"unknown policy {name!r}")


def _run_iwa(params, args, hp):
    inner = exact_inner_solver() if args.inner == "exact" else dual_index_inner_solver(seed=args.seed)
    return iwa(params, inner, _evaluator(args, params), hp["iwa"]["psi"], hp["iwa"]["max_iterations"])


def _policy_for(spec: str, params: InstanceParams, ref: str, args, hp) -> Policy:
    if spec in BUILTIN_POLICIES:
        return _builtin(spec, params, args, hp)
    path = Path(spec.replace("{instance}", _label(args, ref)))
    if not path.exists():
        raise CommandError(f"policy {spec!r} is neither {', '.join(BUILTIN_POLICIES)} nor an existing file")
    return load_policy(path, params)


def cmd_list_instances(args, hp) -> None:
    for name in list_instances():
        try:
            doc = read_instance(name)
            print(f"{name}\t{doc.description}")
        except ConfigError:
            print(f"{name}\t(ratio template)")


def cmd_solve_exact(args, hp) -> None:
    out = _out(args)
    for ref in _instances(args):
        params = read_instance(ref).params
        t0 = time.perf_counter()
        sol = _solve_exact(params)
        name = _label(args, ref)
        save_policy(sol.policy, out / f"{name}.exact.policy")
        print(f"{name}: g={sol.g:.6f} states={len(sol.space)} rounds={sol.iterations} "
              f"residual={sol.residual:.2e} ({time.perf_counter() - t0:.1f}s)")


def cmd_solve_bsp(args, hp) -> None:
    out = _out(args)
    for ref in _instances(args):
        params = read_instance(ref).params
        res = bsp_solve(params, _evaluator(args, params))
        name = _label(args, ref)
        save_policy(res.policy, out / f"{name}.bsp.policy")
        print(f"{name}: source={res.policy.source} level={res.policy.base_stock} cost={res.cost:.4f}")


def cmd_run_iwa(args, hp) -> None:
    out = _out(args)
    for ref in _instances(args):
        params = read_instance(ref).params
        res = _run_iwa(params, args, hp)
        name = _label(args, ref)
        save_policy(res.inner_policy, out / f"{name}.iwa.policy")
        write_csv(out / f"{name}.iwa_trace.csv", "iwa_trace", res.trace_rows())
        print(f"{name}: gamma={res.gamma_star:.4f} rho={res.rho_star:.4f} iterations={res.iterations} "
              f"cost={res.cost:.4f} converged={res.converged}")


def _validator(hp, params):
    v = hp["validation"]
    return lambda pol: estimate_cost(pol, params, v["replications"], v["periods"], v["warmup"], v["seed"]).mean


def _rollout_config(hp):
    from ..learning import RolloutConfig

    d = hp["dcl"]
    return RolloutConfig(d["iterations"], d["samples"], d["scenarios"], d["horizon"], d["warmup"], d["chains"], d["spread"])


def _net_config(hp):
    from ..learning import NetConfig

    d = hp["dcl"]
    hidden = tuple(int(x) for x in str(d["hidden"]).split(",") if x.strip())
    return NetConfig(hidden, d["learning_rate"], d["batch_size"], d["epochs"])


def cmd_train_avi(args, hp) -> None:
    from ..learning import avi_train

    out = _out(args)
    a = hp["avi"]
    for ref in _instances(args):
        params = read_instance(ref).params
        res = avi_train(params, a["samples"], a["horizon"], a["epsilon"], a["discount"], args.seed, forgetting=a["forgetting"])
        name = _label(args, ref)
        save_policy(res.policy, out / f"{name}.avi.json")
        print(f"{name}: trained on {res.samples} samples")


def cmd_train_dcl(args, hp) -> None:
    from ..learning import dcl_train

    out = _out(args)
    for ref in _instances(args):
        params = read_instance(ref).params
        start = bsp_solve(params, _validator(hp, params)).policy
        res = dcl_train(params, start, _validator(hp, params), _rollout_config(hp), _net_config(hp), args.seed)
        name = _label(args, ref)
        save_policy(res.policy, out / f"{name}.dcl.json")
        best = res.rounds[res.best_round]
        print(f"{name}: best round {res.best_round + 1} validation={best.validation_cost:.4f} ({res.seconds:.0f}s)")


def cmd_train_epl(args, hp) -> None:
    from ..learning import epl_build_grid, epl_train
    from ..learning.epl import epl_config

    out = _out(args)
    refs = _instances(args)
    population = [read_instance(r).params for r in refs]
    grid = epl_build_grid(population, members=True)
    e = hp["epl"]
    config = epl_config(_rollout_config(hp), e["scenario_factor"]).scaled(e["sample_factor"] / 2.5)
    net = _net_config(hp).deeper()
    res = epl_train(grid, "dcl", config, net, args.seed)
    save_policy(res.policy, out / "epl.dcl.json")
    print(f"epl over {len(population)} instances: best round {res.base.best_round + 1} ({res.base.seconds:.0f}s)")


def cmd_evaluate(args, hp) -> None:
    if not args.policy:
        raise CommandError("give --policy")
    out = _out(args)
    breakdown, orders = [], []
    for ref in _instances(args):
        params = read_instance(ref).params
        name = _label(args, ref)
        for spec in args.policy:
            policy = _policy_for(spec, params, ref, args, hp)
            est = estimate_cost(policy, params, args.replications, args.periods, args.warmup, args.seed)
            label = spec if spec in BUILTIN_POLICIES else policy.name
            breakdown.append(breakdown_report(name, label, est))
            orders += list(order_rows(name, label, est.order_histogram))
            print(f"{name} {label}: cost={est.mean:.4f} +/- {est.half_width:.4f}")
    write_csv(out / "breakdown.csv", "breakdown", breakdown_rows(breakdown))
    write_csv(out / "orders.csv", "orders", orders)


def cmd_gaps(args, hp) -> None:
    out = _out(args)
    specs = args.policy or ["exact", "bsp", "iwa"]
    rows = []
    for ref in _instances(args):
        params = read_instance(ref).params
        name = _label(args, ref)
        sol = _solve_exact(params)
        for spec in specs:
            policy = sol.policy if spec == "exact" else _policy_for(spec, params, ref, args, hp)
            est = estimate_cost(policy, params, args.replications, args.periods, args.warmup, args.seed)
            gap = optimality_gap(est.mean, sol.g)
            label = spec if spec in BUILTIN_POLICIES else policy.name
            rows.append((name, label, est.mean, est.half_width, gap))
            print(f"{name} {label}: cost={est.mean:.4f} gap={gap:.2f}%")
    write_csv(out / "gaps.csv", "gaps", rows)


COMMANDS: Dict[str, Callable] = {
    "solve-exact": cmd_solve_exact,
    "solve-bsp": cmd_solve_bsp,
    "run-iwa": cmd_run_iwa,
    "train-avi": cmd_train_avi,
    "train-dcl": cmd_train_dcl,
    "train-epl": cmd_train_epl,
    "evaluate": cmd_evaluate,
    "gaps": cmd_gaps,
    "list-instances": cmd_list_instances,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualsource", description="Dual-sourcing spare-parts policies.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--instance", action="append", help="library name or .ini path; repeatable")
    parser.add_argument("--instance-set", action="append", help="named group such as 'synthetic'")
    parser.add_argument("--policy", action="append",
                        help="exact, bsp, iwa, dual-index or a policy file ('{instance}' is substituted)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--replications", type=int, default=100)
    parser.add_argument("--periods", type=int, default=10_000)
    parser.add_argument("--warmup", type=int, default=1_000)
    parser.add_argument("--out", default="results")
    parser.add_argument("--hyperparams", help="INI file overriding training defaults")
    parser.add_argument("--threads", type=int, default=None, help="worker threads for numerical kernels")
    parser.add_argument("--inner", choices=("exact", "dual-index"), default="exact", help="IWA inner solver")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _set_threads(n: Optional[int]) -> None:
    if not n:
        return
    import numba
    import torch

    numba.set_num_threads(n)
    torch.set_num_threads(n)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.replications < 1 or args.periods < 1 or args.warmup < 0:
            raise CommandError("replications and periods must be >= 1, warmup >= 0")
        _set_threads(args.threads)
        COMMANDS[args.command](args, load_hyperparameters(args.hyperparams))
    except (CommandError, ConfigError, ArtifactError, ValueError) as exc:
        print(f"dualsource {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
