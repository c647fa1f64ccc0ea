"""Command-line entry point wiring the full pipeline.

Subcommands: generate | solve | dataset | train | eval | bench. Every
artifact embeds the resolved configuration and seed. Exit codes: 0 success,
2 usage error, 3 infeasible (certificate on stdout), 4 enumeration budget
exceeded. Relative output paths are resolved against $NOMA_COC_OUTDIR when
set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .association import associate
from .barrier import SolverConfig, SolveTrace
from .baseline import EnumerationBudget, opt_noc
from .channel import dbm_to_linear, generate_topology
from .dataset import (
    augment,
    check_no_leakage,
    generate_dataset,
    read_samples,
    split,
    write_samples,
)
from .domain import InterferenceConfig, Scenario, SystemParams
from .errors import BudgetExceededError, InfeasibleError
from .metrics import evaluate_scheme, runtime_bench, violation_cdf
from .solver import make_instance, solve_compensation, solve_compensation_interference
from .surrogate import SurrogateModel, TrainConfig, load_model, save_model, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_BUDGET = 4


def _outpath(path: str) -> str:
    outdir = os.environ.get("NOMA_COC_OUTDIR")
    if outdir and not os.path.isabs(path):
        return os.path.join(outdir, path)
    return path


def _write_json(path: str, doc) -> str:
    path = _outpath(path)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return path


def _args_doc(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _solver_config(args) -> SolverConfig:
    return SolverConfig(newton_tol=args.solver_tol, max_newton=args.solver_max_iter)


def _add_solver_flags(p) -> None:
    p.add_argument("--solver-tol", type=float, default=1e-9)
    p.add_argument("--solver-max-iter", type=int, default=200)
    p.add_argument("--trace", help="dump per-centering solve records to this JSONL file")


def _add_interference_flags(p) -> None:
    p.add_argument("--i-max-dbm", type=float, help="co-channel interference cap in dBm")
    p.add_argument(
        "--subchannels",
        help="JSON file mapping 'bs,cluster' to a subchannel id; default: cluster index",
    )


def _interference_config(args, scenario: Scenario) -> InterferenceConfig | None:
    if args.mode != "interference":
        return None
    if args.i_max_dbm is None:
        raise SystemExit("--i-max-dbm is required with --mode interference")
    if args.subchannels:
        with open(args.subchannels) as fh:
            raw = json.load(fh)
        subs = {tuple(int(v) for v in k.split(",")): sc for k, sc in raw.items()}
    else:
        subs = {
            (bs.id, cl): cl
            for bs in scenario.compensating_bss()
            for cl in range(len(scenario.clusters_of(bs.id)))
        }
    return InterferenceConfig(i_max=dbm_to_linear(args.i_max_dbm), subchannels=subs)


def _cmd_generate(args) -> int:
    scenario = generate_topology(args.cells, args.users, args.failed, seed=args.seed)
    path = _outpath(args.out)
    with open(path, "w") as fh:
        fh.write(scenario.to_json())
    print(path)
    return EXIT_OK


def _cmd_solve(args) -> int:
    with open(args.scenario) as fh:
        scenario = Scenario.from_json(fh.read())
    icfg = _interference_config(args, scenario)
    config = _solver_config(args)
    trace = SolveTrace() if args.trace else None
    if args.optimal:
        budget = EnumerationBudget(
            max_associations=args.budget_assoc, max_wall_time=args.budget_seconds
        )
        result = opt_noc(scenario, icfg=icfg, config=config, budget=budget)
        assoc, objective = result.assoc, result.objective
        solution = result.solution
        extra = {"enumerated": result.enumerated, "infeasible_assocs": result.infeasible}
    else:
        assoc, budgets = associate(scenario, icfg=icfg, config=config)
        solve = solve_compensation if icfg is None else solve_compensation_interference
        mode = "compensation" if icfg is None else "compensation_interference"
        objective = 0.0
        from .domain import PowerSolution

        solution = PowerSolution()
        if args.pa == "dnn":
            from .metrics import _solution_from_matrix
            from .surrogate import build_input, forward

            model = load_model(args.model)
            for bs_id in sorted({b for b, _ in assoc.entries.values()}):
                P = forward(model, build_input(scenario, bs_id, assoc, model.l_max))
                sol = _solution_from_matrix(scenario, bs_id, assoc, P)
                solution.p_connected.update(sol.p_connected)
                solution.p_failed.update(sol.p_failed)
        else:
            from .association import pre_solution

            pre = pre_solution(budgets)
            for bs_id in sorted({b for b, _ in assoc.entries.values()}):
                inst = make_instance(scenario, bs_id, mode, assoc=assoc, icfg=icfg, pre=pre)
                sol = solve(inst, config, trace=trace)
                objective += sol.objective
                solution.p_connected.update(sol.p_connected)
                solution.p_failed.update(sol.p_failed)
        extra = {}
    if trace is not None:
        with open(_outpath(args.trace), "w") as fh:
            for rec in trace.records:
                fh.write(json.dumps(rec) + "\n")
    doc = {
        "config": {
            "scenario": args.scenario,
            "mode": args.mode,
            "pa": args.pa,
            "optimal": args.optimal,
            "solver_tol": args.solver_tol,
        },
        "seed": scenario.seed,
        "association": json.loads(assoc.to_json()),
        "objective": objective,
        "p_connected": {f"{b},{c}": list(map(float, p)) for (b, c), p in solution.p_connected.items()},
        "p_failed": {f"{b},{c}": float(p) for (b, c), p in solution.p_failed.items()},
        **extra,
    }
    print(_write_json(args.out, doc))
    return EXIT_OK


def _cmd_dataset(args) -> int:
    if args.dataset_cmd == "generate":
        samples = generate_dataset(
            args.n, args.cells, args.users, args.failed, seed=args.seed
        )
        write_samples(_outpath(args.out), samples)
        print(_outpath(args.out))
    elif args.dataset_cmd == "split":
        samples = read_samples(getattr(args, "in"))
        ratios = tuple(float(r) for r in args.ratios.split(","))
        parts = split(samples, ratios, seed=args.seed)
        check_no_leakage(*parts)
        for part, name in zip(parts, ("train", "val", "test")):
            path = _outpath(f"{args.out_prefix}.{name}.jsonl")
            write_samples(path, part)
            print(path)
    else:
        samples = read_samples(getattr(args, "in"))
        out = augment(samples, args.factor, seed=args.seed)
        write_samples(_outpath(args.out), out)
        print(_outpath(args.out))
    return EXIT_OK


def _cmd_train(args) -> int:
    train_samples = read_samples(args.dataset)
    val_samples = read_samples(args.val)
    config = TrainConfig(
        batch_size=args.batch,
        learning_rate=args.lr,
        decay_rate=args.decay,
        epochs=args.epochs,
        seed=args.seed,
        decay_as_schedule=args.decay_as_schedule,
    )
    first = train_samples[0]
    model = SurrogateModel.init(
        q=first.q, l_max=first.H.shape[1], p_max=SystemParams().p_max, seed=args.seed
    )
    curves = train(model, train_samples, val_samples, config)
    save_model(model, _outpath(args.out))
    _write_json(
        args.out + ".curves.json",
        {"config": _args_doc(args) | {"command": "train"}, "curves": curves},
    )
    print(_outpath(args.out))
    return EXIT_OK


def _cmd_eval(args) -> int:
    paths = []
    if args.scenario:
        paths = [args.scenario]
    else:
        paths = sorted(
            os.path.join(args.scenarios, f)
            for f in os.listdir(args.scenarios)
            if f.endswith(".json")
        )
    model = load_model(args.model) if args.model else None
    scheme = args.scheme.upper()
    config = _solver_config(args)
    reports = []
    for path in paths:
        with open(path) as fh:
            scenario = Scenario.from_json(fh.read())
        icfg = _interference_config(args, scenario)
        reports.append(evaluate_scheme(scenario, scheme, model=model, icfg=icfg, config=config))
    cdf = violation_cdf(reports, SystemParams().s_min)
    doc = {
        "config": {"scheme": scheme, "scenarios": paths, "mode": args.mode},
        "reports": [r.to_json() for r in reports],
        "violation_cdf_p50_p95_p99": [float(np.percentile(cdf, p)) for p in (50, 95, 99)]
        if len(cdf)
        else [],
        "mean_jain": float(np.mean([r.jain for r in reports])),
        "mean_all_se": float(np.mean([r.avg_all_se for r in reports])),
        "mean_failed_se": float(np.mean([r.avg_failed_se for r in reports])),
    }
    print(_write_json(args.out, doc))
    return EXIT_OK


def _cmd_bench(args) -> int:
    sweep = [int(v) for v in args.sweep.split("=", 1)[1].split(",")]
    sizes = [(args.cells, args.users, f) for f in sweep]
    model = load_model(args.model) if args.model else None
    rows = runtime_bench(sizes, repetitions=args.reps, seed=args.seed, model=model)
    doc = {"config": _args_doc(args) | {"command": "bench"}, "rows": rows}
    print(_write_json(args.out, doc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noma-coc", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a network scenario")
    p.add_argument("--cells", type=int, default=3, help="compensating BS count")
    p.add_argument("--users", type=int, default=4, help="connected users per cell")
    p.add_argument("--failed", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="scenario.json")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("solve", help="associate failed users and allocate power")
    p.add_argument("--scenario", required=True)
    p.add_argument("--mode", choices=("isolated", "interference"), default="isolated")
    p.add_argument("--pa", choices=("solver", "dnn"), default="solver")
    p.add_argument("--model", help="model file for --pa dnn")
    p.add_argument("--optimal", action="store_true", help="brute-force baseline")
    p.add_argument("--budget-assoc", type=int, default=1_000_000)
    p.add_argument("--budget-seconds", type=float, default=3600.0)
    p.add_argument("--out", default="solution.json")
    _add_solver_flags(p)
    _add_interference_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("dataset", help="generate/split/augment training corpora")
    dsub = p.add_subparsers(dest="dataset_cmd", required=True)
    g = dsub.add_parser("generate")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--cells", type=int, default=3)
    g.add_argument("--users", type=int, default=4)
    g.add_argument("--failed", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="data.jsonl")
    s = dsub.add_parser("split")
    s.add_argument("--in", required=True)
    s.add_argument("--ratios", default="0.7,0.15,0.15")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-prefix", default="data")
    a = dsub.add_parser("augment")
    a.add_argument("--in", required=True)
    a.add_argument("--factor", type=int, default=4)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", default="data.aug.jsonl")
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("train", help="train the power-allocation surrogate")
    p.add_argument("--dataset", required=True, help="training split JSONL")
    p.add_argument("--val", required=True, help="validation split JSONL")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--decay", type=float, default=0.9)
    p.add_argument("--decay-as-schedule", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a scheme on scenarios")
    p.add_argument("--scheme", required=True, choices=("lc_noc", "lc_noc_dnn", "opt_noc", "no_oc"))
    p.add_argument("--scenario", help="single scenario file")
    p.add_argument("--scenarios", help="directory of scenario .json files")
    p.add_argument("--model")
    p.add_argument("--mode", choices=("isolated", "interference"), default="isolated")
    p.add_argument("--out", default="report.json")
    _add_solver_flags(p)
    _add_interference_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="runtime benchmarks over a size sweep")
    p.add_argument("--sweep", default="failed=2,4,6", help="e.g. failed=4,8,12")
    p.add_argument("--cells", type=int, default=3)
    p.add_argument("--users", type=int, default=8)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model")
    p.add_argument("--out", default="bench.json")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # allow `dataset --n ...` as shorthand for `dataset generate --n ...`
    if argv and argv[0] == "dataset" and len(argv) > 1 and argv[1].startswith("-"):
        argv.insert(1, "generate")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(json.dumps(exc.certificate()))
        return EXIT_INFEASIBLE
    except BudgetExceededError as exc:
        print(json.dumps({"budget_exceeded": True, "completed": exc.completed, "detail": str(exc)}))
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
