"""Solve problems, check approximation bounds and run the gridworld benchmark.

Exit codes: 0 success, 1 a checked bound or invariant failed, 2 usage error,
3 the problem was rejected (invalid file, failed precondition or budget).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .bounds import bound_sweep
from .distributions import CostDistribution
from .dp import solve_approx_dp, solve_infostate_dp, solve_memory_terminal_dp, solve_specialized_dp
from .errors import InvalidInfoStateError, MinimaxError
from .gridworld import GridConfig, budget_from_env, check_budget, run_benchmark
from .infostates import make_info
from .numeric import fmt, parse_number
from .problem import Problem, desk1_document, load_problem
from .system import MemoryGraph
from . import plotting, report

log = logging.getLogger("minimaxdp")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_REJECTED = 0, 1, 2, 3

DP_KINDS = ("memory", "specialized", "infostate", "approx")
INFO_KINDS = ("case1", "case2", "case3", "joint", "quantized", "window", "memory")


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: str
    seed: int | None
    out: str
    timestamp: str
    version: str
    options: dict

    def write(self, out: Path) -> Path:
        out.mkdir(parents=True, exist_ok=True)
        path = out / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _manifest(args, options: dict) -> RunManifest:
    return RunManifest(
        command=args.command,
        config=str(Path(args.config).resolve()),
        seed=getattr(args, "seed", None),
        out=str(Path(args.out).resolve()),
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        version=__version__,
        options=options,
    )


def _compressor(problem: Problem, name: str | None, required: bool):
    """Compressor from ``--info`` or, failing that, the config's ``compressor`` section."""
    section = dict(problem.compressor or {})
    if name is None:
        name = section.get("name")
        if name is None and problem.grid is not None and not required:
            name = "quantized"
        if name is None:
            raise UsageError("--info is required (and the config names no compressor)")
    options = {}
    if name == "window":
        options["length"] = int(section.get("length", 1))
        if section.get("declared_epsilon") is not None:
            options["declared_epsilon"] = [parse_number(e) for e in section["declared_epsilon"]]
    return make_info(problem.spec, name, **options)


def _kernel_for(ism, kernel: str) -> str:
    if kernel != "auto":
        return kernel
    return "model" if ism.name == "quantized" else "pooled"


def _root_keys(spec, ism) -> dict:
    return {
        y: ism.root_key(y, CostDistribution.normalized(spec.initial_cost_to_come(y)))
        for y in spec.root_observations()
    }


def cmd_solve(args) -> int:
    problem = load_problem(args.config)
    spec = problem.spec
    if args.dp in ("infostate", "approx") and args.info is None:
        raise UsageError(f"--dp={args.dp} needs --info")
    if args.dp in ("memory", "specialized") and args.info is not None:
        raise UsageError(f"--dp={args.dp} works on memories and takes no --info")
    out = Path(args.out)
    _manifest(args, {"dp": args.dp, "info": args.info, "kernel": args.kernel, "arith": args.arith}).write(out)
    counts = check_budget(spec, args.budget)

    start = time.perf_counter()
    actions = spec.U.labels
    if args.dp in ("memory", "specialized"):
        graph = MemoryGraph(spec)
        solver = solve_memory_terminal_dp if args.dp == "memory" else solve_specialized_dp
        table = solver(spec, graph)
        label = lambda m: m.label(spec)  # noqa: E731
        V0 = {y: table.V[0][i] for y, i in graph.root_index.items()}
        kernel = None
    else:
        ism = _compressor(problem, args.info, required=True)
        kernel = _kernel_for(ism, args.kernel)
        if args.dp == "infostate":
            dp = solve_infostate_dp(spec, ism, kernel)
        else:
            dp = solve_approx_dp(spec, ism, kernel)
        table = dp.table()
        label = ism.label
        V0 = {y: dp.value(0, k) for y, k in _root_keys(spec, ism).items()}
    seconds = time.perf_counter() - start

    report.write_values(out / f"values_{args.dp}.csv", table, label, actions, args.arith)
    report.write_law(out / f"law_{args.dp}.csv", table, label, actions)
    items = [("problem", spec.name), ("dp", args.dp), ("info", args.info or ""),
             ("kernel", kernel or ""), ("arith", args.arith)]
    items += [(f"V0[{spec.Y.labels[y]}]", fmt(v, args.arith)) for y, v in sorted(V0.items())]
    items += [(f"nodes[{t}]", n) for t, n in enumerate(table.sizes())]
    items += [(f"memories[{t}]", n) for t, n in enumerate(counts)]
    items.append(("wall_clock_s", f"{seconds:.6f}"))
    report.write_summary(out / f"summary_{args.dp}.csv", items)
    for y, v in sorted(V0.items()):
        print(f"V0[{spec.Y.labels[y]}] = {fmt(v, args.arith)}")
    return EXIT_OK


def cmd_check_bounds(args) -> int:
    problem = load_problem(args.config)
    spec = problem.spec
    ism = _compressor(problem, args.info, required=False)
    if not ism.has_metric:
        raise UsageError(f"compressor {ism.name} has no node metric")
    kernel = _kernel_for(ism, args.kernel)
    out = Path(args.out)
    _manifest(args, {"info": ism.name, "kernel": kernel, "arith": args.arith}).write(out)
    check_budget(spec, args.budget)

    declared = getattr(ism, "declared_epsilon", None)
    sweep = bound_sweep(spec, ism, kernel=kernel, declared_epsilon=declared)
    report.write_bounds(out / "bounds.csv", sweep, args.arith)
    report.write_stage_values(out / "eps.csv", sweep.computed_eps, args.arith, "eps")
    report.write_csv(
        out / "nodes.csv", ("stage", "classes", "approx_nodes", "memories"),
        zip(range(spec.T + 1), sweep.class_counts, sweep.approx_nodes, sweep.memory_counts),
    )
    items = [("problem", spec.name), ("info", ism.name), ("kernel", kernel), ("arith", args.arith)]
    items += [(f"V0[{spec.Y.labels[y]}]", fmt(v, args.arith)) for y, v in sorted(sweep.V0.items())]
    items += [(f"Vhat0[{spec.Y.labels[y]}]", fmt(v, args.arith)) for y, v in sorted(sweep.Vhat0.items())]
    items += [(f"Lambda0[{spec.Y.labels[y]}]", fmt(v, args.arith)) for y, v in sorted(sweep.Lambda0.items())]
    items.append(("alpha0", fmt(sweep.report.alpha[0], args.arith)))
    items += report.sweep_items(sweep)
    items.append(("wall_clock_s", f"{sweep.seconds:.6f}"))
    report.write_summary(out / "summary_bounds.csv", items)
    if not args.no_plots:
        plotting.plot_bounds(sweep, out / "bounds.png")
    for k, v in report.sweep_items(sweep):
        print(f"{k}: {v}")
    return EXIT_OK if sweep.ok else EXIT_FAIL


def cmd_bench(args) -> int:
    problem = load_problem(args.config)
    if problem.grid is None:
        raise UsageError("bench needs a config with a gridworld section")
    cfg: GridConfig = problem.grid
    sims = cfg.simulations if args.sims is None else args.sims
    seed = cfg.seed if args.seed is None else args.seed
    if sims < 0:
        raise UsageError("--sims must be nonnegative")
    out = Path(args.out)
    args.seed = seed
    _manifest(args, {"sims": sims, "jobs": args.jobs, "arith": args.arith,
                     "budget": budget_from_env(args.budget)}).write(out)

    result = run_benchmark(cfg, sims, seed, args.budget, args.jobs)
    report.write_bench(out / "bench.csv", result, args.arith)
    hist = result.histogram()
    report.write_hist(out / "hist.csv", result, args.arith)
    nodes = []
    status = []
    for c in result.cases:
        for t, (e, a, m) in enumerate(zip(c.exact_nodes, c.approx_nodes, c.memory_counts)):
            nodes.append((c.case_id, t, e, a, m))
        report.write_bounds(out / f"bounds_case{c.case_id}.csv", c.sweep, args.arith)
        status.append((c.case_id, "pass" if c.sweep_ok else "fail", "pass" if c.rollouts_ok else "fail",
                       fmt(c.Lambda0, args.arith)))
    report.write_csv(out / "nodes.csv", ("case", "stage", "exact_nodes", "approx_nodes", "memories"), nodes)
    report.write_csv(out / "checks.csv", ("case", "bound_sweep", "rollouts", "Lambda0"), status)
    if not args.no_plots:
        plotting.plot_histogram(hist, out / "hist.png")
        for c in result.cases:
            plotting.plot_bounds(c.sweep, out / f"bounds_case{c.case_id}.png")
    for c in result.cases:
        print(
            f"case {c.case_id}: V0={fmt(c.V0, 'float')} Vhat0={fmt(c.Vhat0, 'float')} "
            f"exact {c.runtime_exact:.3f}s approx {c.runtime_approx:.3f}s "
            f"sweep {'pass' if c.sweep_ok else 'fail'} rollouts {'pass' if c.rollouts_ok else 'fail'}"
        )
    return EXIT_OK if result.ok else EXIT_FAIL


def cmd_example_config(args) -> int:
    if args.which == "desk1":
        doc = desk1_document()
    elif args.which == "reduced-grid":
        doc = {"name": "gridworld-5x5", "gridworld": GridConfig.reduced().to_dict()}
    else:
        doc = {"name": "gridworld-9x9", "gridworld": GridConfig().to_dict()}
    text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minimax-dp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="JSON problem file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--arith", choices=("exact", "float"), default="exact")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for simulations")
    common.add_argument("--budget", type=int, default=None,
                        help="max feasible memories to enumerate (default: MINIMAX_DP_BUDGET or 5000000)")

    s = sub.add_parser("solve", parents=[common], help="solve one dynamic program")
    s.add_argument("--dp", choices=DP_KINDS, required=True)
    s.add_argument("--info", choices=INFO_KINDS)
    s.add_argument("--kernel", choices=("auto", "pooled", "model"), default="auto")
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("check-bounds", parents=[common], help="compute eps/alpha and sweep the bounds")
    b.add_argument("--info", choices=INFO_KINDS)
    b.add_argument("--kernel", choices=("auto", "pooled", "model"), default="auto")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--no-plots", action="store_true")
    b.set_defaults(func=cmd_check_bounds)

    g = sub.add_parser("bench", parents=[common], help="gridworld benchmark")
    g.add_argument("--sims", type=int, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--no-plots", action="store_true")
    g.set_defaults(func=cmd_bench)

    e = sub.add_parser("example-config", help="print a ready-made problem file")
    e.add_argument("which", choices=("desk1", "reduced-grid", "grid"))
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_example_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except InvalidInfoStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.counterexample:
            print(f"counterexample: {exc.counterexample}", file=sys.stderr)
        return EXIT_REJECTED
    except (MinimaxError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
