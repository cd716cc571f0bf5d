"""Command line front end.

Exit codes: 0 success, 1 bad input (parse, IO, usage), 2 infeasible instance
or baseline.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import bench, files
from .model import DEFAULT_COST_SCALE, AllocationError, Infeasible, ProblemInstance
from .network import to_dimacs, build_network, build_pareto_network
from .solver import SolverConfig, solve, solve_pareto
from .stats import NoPairs, WEIGHTINGS, compare_mechanisms, default_workers, permutation_test
from .synth import generate_outcomes, random_allocation

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


class InputError(Exception):
    pass


def _add_instance_args(p):
    p.add_argument("--input", required=True, help="headerless CSV, recipients x treatments")
    cap = p.add_mutually_exclusive_group(required=True)
    cap.add_argument("--capacity", type=int, help="same capacity for every treatment")
    cap.add_argument("--capacities", help="comma-separated per-treatment capacities")
    p.add_argument("--cost-scale", type=int, default=DEFAULT_COST_SCALE,
                   help="outcomes are multiplied by this and rounded to integer costs")


def _add_solver_args(p):
    p.add_argument("--rule", choices=("min-mean", "bellman-ford"), default="min-mean")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--json", action="store_true", help="machine-readable output")


def _load_instance(args) -> ProblemInstance:
    try:
        y = files.read_matrix_csv(args.input)
        caps = files.parse_capacities(args.capacity, args.capacities, y.shape[1])
        inst = ProblemInstance(y, caps, args.cost_scale)
        inst.scaled_costs  # overflow check up front
        return inst
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def _load_baseline(path):
    try:
        return files.read_baseline(path)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def _trace_sink(args):
    if not getattr(args, "trace", False):
        return None
    return lambda ev: print(f"cycle {ev}", file=sys.stderr)


def _emit_report(report, args, extra=None):
    data = report.to_dict()
    if extra:
        data.update(extra)
    if args.json:
        print(json.dumps(data))
        return
    for k, v in data.items():
        if isinstance(v, list):
            v = " ".join(str(x) for x in v)
        print(f"{k}: {v}")


def _dump(net, path):
    if path:
        with open(path, "w") as fh:
            fh.write(to_dimacs(net))


def cmd_solve(args) -> int:
    inst = _load_instance(args)
    if args.dump_network:
        _dump(build_network(inst), args.dump_network)
    report = solve(inst, SolverConfig(args.rule, args.max_iterations), _trace_sink(args))
    _emit_report(report, args)
    return EXIT_OK


def cmd_pareto(args) -> int:
    inst = _load_instance(args)
    base = _load_baseline(args.baseline)
    if args.dump_network:
        _dump(build_pareto_network(inst, base), args.dump_network)
    report = solve_pareto(inst, base, SolverConfig(args.rule, args.max_iterations),
                          _trace_sink(args))
    rows = np.arange(inst.n_recipients)
    delta = inst.outcomes[rows, report.allocation.assignment] - inst.outcomes[rows, base]
    _emit_report(report, args, {"delta": delta.tolist()})
    return EXIT_OK


def cmd_compare(args) -> int:
    inst = _load_instance(args)
    base = _load_baseline(args.baseline)
    order = None
    if args.order_seed is not None:
        order = np.random.default_rng(args.order_seed).permutation(inst.n_recipients)
    report = compare_mechanisms(inst, base, order, SolverConfig(args.rule, args.max_iterations))
    if args.json:
        print(json.dumps(report.to_dict()))
    else:
        sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_permtest(args) -> int:
    try:
        data = files.read_grouped_csv(args.input)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    report = permutation_test(data, args.replicates, args.seed, args.weighting,
                              workers=args.workers)
    sys.stdout.write(report.to_json() + "\n" if args.json else report.to_text())
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.n1 < 1 or args.n2 < 0 or not 0 <= args.heterogeneity <= 1:
        raise InputError("need --n1 >= 1, --n2 >= 0 and --heterogeneity in [0, 1]")
    y = generate_outcomes(args.n1, args.n2, args.heterogeneity, args.seed)
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        files.write_matrix_csv(y, out)
    finally:
        if args.output:
            out.close()
    if args.baseline_output:
        if args.capacity is None and args.capacities is None:
            raise InputError("--baseline-output needs --capacity or --capacities")
        caps = files.parse_capacities(args.capacity, args.capacities, args.n1)
        try:
            inst = ProblemInstance(y, caps)
            base = random_allocation(inst, args.seed)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        with open(args.baseline_output, "w") as fh:
            files.write_baseline(base.assignment, fh)
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        grid = [int(v) for v in args.n2_grid.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"bad grid {args.n2_grid!r}") from None
    if not grid or min(grid) < 1 or args.n1 < 1 or args.repetitions < 1:
        raise InputError("grid values, --n1 and --repetitions must be positive")
    rules = ("min_mean", "bellman_ford") if args.rule == "both" else (args.rule.replace("-", "_"),)
    rows = bench.run_grid(args.n1, grid, rules, args.repetitions, args.capacity,
                          args.heterogeneity, args.seed)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=bench.FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({**r, "seconds": f"{r['seconds']:.6f}"})
    finally:
        if args.output:
            out.close()
    for rule in rules:
        med = bench.median_seconds(rows, rule)
        summary = ", ".join(f"n2={k}: {v:.4f}s" for k, v in med.items())
        print(f"median {rule}: {summary}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="allocflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="optimal allocation")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--dump-network", metavar="PATH", help="write the network in DIMACS format")
    p.add_argument("--trace", action="store_true", help="log canceled cycles to stderr")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("pareto", help="best allocation leaving nobody worse off than a baseline")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--baseline", required=True, help="one treatment index per line")
    p.add_argument("--dump-network", metavar="PATH")
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("compare", help="mean outcome under actual/greedy/optimal/pareto")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--baseline", required=True)
    p.add_argument("--order-seed", type=int, default=None,
                   help="shuffle the greedy visiting order with this seed")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("permtest", help="permutation test of between-arm differences")
    p.add_argument("--input", required=True, help="CSV with columns group,arm,outcome")
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weighting", choices=WEIGHTINGS, default="pair")
    p.add_argument("--workers", type=int, default=default_workers(),
                   help="threads (default: $ALLOCFLOW_THREADS or 1)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_permtest)

    p = sub.add_parser("gen", help="write a synthetic outcome matrix")
    p.add_argument("--n1", type=int, required=True, help="treatments")
    p.add_argument("--n2", type=int, required=True, help="recipients")
    p.add_argument("--heterogeneity", type=float, default=1.0,
                   help="interaction strength in [0, 1]; 0 = additive outcomes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="CSV path (default stdout)")
    cap = p.add_mutually_exclusive_group()
    cap.add_argument("--capacity", type=int)
    cap.add_argument("--capacities")
    p.add_argument("--baseline-output", help="also write a random feasible baseline here")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="time the solver over a size grid (CSV)")
    p.add_argument("--n1", type=int, default=10)
    p.add_argument("--n2-grid", default="100,200,400")
    p.add_argument("--rule", choices=("min-mean", "bellman-ford", "both"), default="min-mean")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--capacity", type=int, default=None, help="default: ceil(n2/n1)")
    p.add_argument("--heterogeneity", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc} (a solution exists iff total capacity >= number of recipients)",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    except NoPairs as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, AllocationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
