"""Command-line front end: ``qconsensus {run,sweep,golden,check}``.

Exit codes: 0 success, 1 invalid input, 2 golden or invariant failure,
3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from . import io
from .analysis import check_invariants, sweep
from .engine import ALGORITHMS, TERMINATIONS, ConfigError, RunConfig, run
from .golden import run_golden
from .graph import GraphError
from .protocol import Average
from .workloads import SpecError, parse_graph_spec, parse_values_random, random_values

OUT_ENV = "QCONSENSUS_OUT"

EXIT_OK, EXIT_INPUT, EXIT_FAILED, EXIT_RUNTIME = 0, 1, 2, 3

INPUT_ERRORS = (ConfigError, GraphError, SpecError, io.FormatError, ValueError, OSError)


def _out_dir(args) -> Path:
    path = Path(args.out or os.environ.get(OUT_ENV) or "qconsensus-out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alg", choices=ALGORITHMS, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--graph", help="ring-directed:N | ring-undirected:N | random:N:P[:SEED]")
    g.add_argument("--graph-file", help="graph file, first line 'n m', then 'receiver sender'")
    v = p.add_mutually_exclusive_group(required=True)
    v.add_argument("--values", help="comma-separated initial values")
    v.add_argument("--values-file")
    v.add_argument("--values-random", metavar="LOW:HIGH[:TOTAL]")
    p.add_argument("--priorities", help="priority file, lines 'node neighbor order'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--termination", choices=TERMINATIONS, help="default: quiescence for alg3, convergence otherwise")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./qconsensus-out)")


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qconsensus", description="Quantized average consensus simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one run and write its trace")
    _add_run_options(p_run)

    p_sweep = sub.add_parser("sweep", help="run many seeds and write summary + plot data")
    _add_run_options(p_sweep)
    p_sweep.add_argument("--count", type=int, default=1)
    p_sweep.add_argument("--workers", type=int, default=1)

    sub.add_parser("golden", help="replay the two worked examples against their tables")

    p_check = sub.add_parser("check", help="re-check invariants on a written trace")
    p_check.add_argument("trace")
    p_check.add_argument("messages")
    p_check.add_argument("--alg", choices=ALGORITHMS, help="default: read summary.json beside the trace")
    return parser


class _Sources:
    """Resolved graph/value/priority sources for one command line."""

    def __init__(self, args) -> None:
        self.args = args
        if args.graph:
            self.make_graph, self.graph_fixed = parse_graph_spec(args.graph)
        else:
            g = io.parse_graph(io.read_text(args.graph_file))
            self.make_graph, self.graph_fixed = (lambda _s: g), True
        self.fixed_values: Optional[list[int]] = None
        self.random_spec = None
        if args.values is not None:
            self.fixed_values = io.parse_values(args.values)
        elif args.values_file:
            self.fixed_values = io.parse_values(io.read_text(args.values_file))
        else:
            self.random_spec = parse_values_random(args.values_random)
        self.priority_text = io.read_text(args.priorities) if args.priorities else None

    def config(self, seed: int) -> RunConfig:
        args = self.args
        graph = self.make_graph(seed)
        if self.fixed_values is not None:
            values = self.fixed_values
        else:
            low, high, total = self.random_spec
            values = random_values(graph.n, low, high, seed, total)
        priorities = io.parse_priorities(self.priority_text, graph) if self.priority_text else None
        termination = args.termination or ("quiescence" if args.alg == "alg3" else "convergence")
        return RunConfig(
            algorithm=args.alg,
            graph=graph,
            initial_values=values,
            priorities=priorities,
            seed=seed,
            max_rounds=args.max_rounds,
            termination=termination,
        )


def cmd_run(args) -> int:
    cfg = _Sources(args).config(args.seed)
    trace = run(cfg)
    out = _out_dir(args)
    io.write_trace_csv(out / "trace.csv", trace.snapshots)
    io.write_messages_csv(out / "messages.csv", trace.messages)
    summary = io.run_summary(trace)
    io.write_json(out / "summary.json", summary)
    print(f"k0={summary['k0']} terminated_by={summary['terminated_by']} rounds={summary['rounds']}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.count < 1:
        raise ConfigError("--count must be at least 1")
    sources = _Sources(args)
    seeds = [args.seed + i for i in range(args.count)]
    configs = [(s, sources.config(s)) for s in seeds]
    result = sweep(configs, workers=args.workers)
    out = _out_dir(args)
    io.write_sweep_csv(out / "sweep.csv", result.rows)
    io.write_plot_csv(out / "plot.csv", result.plot)
    io.write_json(out / "sweep_summary.json", asdict(result.summary))
    s = result.summary
    print(f"runs={s.runs} fraction_converged={s.fraction_converged:.6g} errors={s.errors}")
    for row in result.rows:
        if row.error:
            print(f"seed {row.seed}: {row.error}", file=sys.stderr)
    return EXIT_RUNTIME if s.errors else EXIT_OK


def cmd_golden(args) -> int:
    results, _t1, t2 = run_golden()
    for r in results:
        status = "PASS" if r.ok else f"FAIL ({r.mismatch})"
        print(f"{r.name} k={r.round}: {status}")
    last = max(r.round for r in results if r.name == "example2")
    late = [m for m in t2.messages if m.send_round >= last]
    print(f"example2 messages sent at k>={last}: {len(late)}")
    ok = all(r.ok for r in results) and not late
    return EXIT_OK if ok else EXIT_FAILED


def cmd_check(args) -> int:
    snapshots = io.read_trace_csv(args.trace)
    messages = io.read_messages_csv(args.messages)
    alg = args.alg
    if alg is None:
        summary_path = Path(args.trace).with_name("summary.json")
        if not summary_path.exists():
            raise ConfigError("no --alg given and no summary.json next to the trace")
        alg = json.loads(summary_path.read_text())["algorithm"]
    if not snapshots:
        raise io.FormatError("trace is empty")
    first = snapshots[0]
    avg = Average(sum(s.mass.y for s in first), len(first))
    verdicts = check_invariants(snapshots, messages, alg, avg)
    for name, violations in verdicts.items():
        if violations:
            print(f"{name}: FAIL ({len(violations)} violations)")
            for v in violations[:10]:
                print(f"  {v}")
        else:
            print(f"{name}: PASS")
    return EXIT_FAILED if any(verdicts.values()) else EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "golden": cmd_golden, "check": cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
