"""leofuzz command line: genseq, fuzz, bench and report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .bench import SHIPPED, format_table, read_seed_dir, run_bench
from .config import STRATEGIES, STRATEGY_ALIASES, ConfigError, load_config, parse_duration
from .coverage import assign_priorities
from .engine import CampaignError, run_campaign
from .graphs import (
    GraphError,
    TargetError,
    TargetSequence,
    dump_sequences,
    generate_target_sequence,
    load_sequences,
    parse_graphs,
    resolve_target,
)
from .simprog import load_program

log = logging.getLogger("leofuzz")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2


class UsageError(Exception):
    pass


def sequences_from_targets(graphs, text: str, epsilon: float = 0.5) -> list[TargetSequence]:
    """Resolve a targets file, naming the offending line on failure."""
    seqs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        path, sep, num = line.rpartition(":")
        if not sep or not path or not num.strip().isdigit():
            raise UsageError(f"targets line {lineno}: expected file:line, got {raw.strip()!r}")
        try:
            target = resolve_target(graphs, (path.strip(), int(num)))
            seqs.append(generate_target_sequence(graphs, target))
        except TargetError as exc:
            raise UsageError(f"targets line {lineno}: {exc}") from exc
    assign_priorities(seqs, epsilon)
    return seqs


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc.strerror}") from exc


# -- commands ----------------------------------------------------------------


def cmd_genseq(args: argparse.Namespace) -> int:
    graphs = parse_graphs(Path(args.graphs))
    seqs = sequences_from_targets(graphs, _read(args.targets, "targets"), args.epsilon)
    text = dump_sequences(seqs)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    log.info("wrote %d sequence(s)", len(seqs))
    return EXIT_OK


_CONFIG_FLAGS = (
    "strategy", "beta", "epsilon", "alpha", "t_k", "tx_frac", "tx_seconds", "base_energy",
    "rate_init", "gamma", "delta", "th_min", "exec_budget", "rng_seed", "exec_seconds",
)


def _config_from_args(args: argparse.Namespace, **extra: Any):
    overrides = {k: getattr(args, k, None) for k in _CONFIG_FLAGS}
    if getattr(args, "budget", None) is not None:
        overrides["budget"] = parse_duration(args.budget)
    if getattr(args, "deterministic", False):
        overrides["deterministic"] = True
    if getattr(args, "no_concolic", False):
        overrides["concolic"] = False
    overrides.update(extra)
    return load_config(args.config, **overrides)


def cmd_fuzz(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    program_path = args.program or args.graphs
    if program_path is None:
        raise UsageError("fuzz needs --program (or a --graphs file with predicates)")
    program = load_program(Path(program_path))
    graphs = parse_graphs(Path(args.graphs)) if args.graphs else program.graphs
    if args.sequences:
        sequences = load_sequences(_read(args.sequences, "sequences"))
    elif args.targets:
        sequences = sequences_from_targets(graphs, _read(args.targets, "targets"), config.epsilon)
    else:
        raise UsageError("fuzz needs --targets or --sequences")
    if not args.seeds:
        raise UsageError("fuzz needs --seeds")
    try:
        seeds = read_seed_dir(args.seeds)
    except OSError as exc:
        raise UsageError(f"cannot read seeds {args.seeds}: {exc.strerror}") from exc
    crashes, stats = run_campaign(program, sequences, seeds, config, out_dir=args.out)
    summary = {
        "strategy": stats.strategy,
        "rng_seed": stats.rng_seed,
        "executions": stats.executions,
        "reached": sorted(stats.first_reach),
        "targets": stats.targets,
        "executions_to_all": stats.executions_to_all,
        "crashes": sorted(crashes.crashes),
        "stop": stats.stop_reason,
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if stats.all_reached else EXIT_BUDGET


def cmd_bench(args: argparse.Namespace) -> int:
    strategies = [STRATEGY_ALIASES.get(s, s) for s in (args.strategies or STRATEGIES)]
    base = _config_from_args(args, deterministic=True)
    if base.exec_budget is None:
        base = base.replace(exec_budget=1_000_000)
    if args.budget is None:
        base = base.replace(budget=float("inf"))
    report = run_bench(args.fixtures, strategies, args.runs, base, base.rng_seed)
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n")
    print(report.text_table(strategies[0]))
    return EXIT_OK


def _report_stats(path: Path) -> str:
    events = []
    for line in path.read_text().splitlines():
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError:
            break  # a truncated final line
    lines = []
    for ev in events:
        kind = ev.get("event")
        if kind == "target":
            lines.append(f"target  {ev['target']:<24} first reached at execution {ev['executions']}")
        elif kind == "stage":
            name = "exploitation" if ev["sof"] == 1 else "exploration"
            lines.append(f"stage   -> {name:<21} at execution {ev['executions']} "
                         f"(epoch {ev['epoch']}, rate {ev['rate']:.4f})")
        elif kind == "end":
            lines.append(f"end     {ev['stop']:<24} executions {ev['executions']}, "
                         f"{len(ev['crashes'])} crash site(s), cq {ev['cq']}, dq {ev['dq']}")
    return "\n".join(lines)


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.input)
    if path.is_dir():
        path = path / "stats.jsonl"
    if not path.exists():
        raise UsageError(f"no such file: {path}")
    if path.suffix == ".jsonl":
        print(_report_stats(path))
    else:
        print(format_table(json.loads(path.read_text()), args.reference))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("campaign settings (override --config)")
    g.add_argument("--config", help="key=value config file")
    g.add_argument("--budget", help="time budget, e.g. 60, 90s, 5m")
    g.add_argument("--exec-budget", type=int, help="maximum number of executions")
    g.add_argument("--rng-seed", type=int)
    g.add_argument("--deterministic", action="store_true",
                   help="virtual clock and cooperative concolic worker; runs replay exactly")
    g.add_argument("--exec-seconds", type=float, help="virtual seconds per execution")
    g.add_argument("--beta", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--t-k", type=float)
    g.add_argument("--tx-frac", type=float, help="annealing horizon as a fraction of the budget")
    g.add_argument("--tx-seconds", type=float, help="annealing horizon in seconds")
    g.add_argument("--base-energy", type=int)
    g.add_argument("--rate-init", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--th-min", type=float)
    g.add_argument("--no-concolic", action="store_true", help="disable the concolic worker")


def _strategy(text: str) -> str:
    name = STRATEGY_ALIASES.get(text, text)
    if name not in STRATEGIES:
        raise argparse.ArgumentTypeError(f"unknown strategy {text!r}")
    return name


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leofuzz", description="Multi-target directed greybox fuzzing simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("genseq", help="compute target sequences")
    p.add_argument("--graphs", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_genseq)

    p = sub.add_parser("fuzz", help="run one campaign")
    p.add_argument("--program", help="program file (graphs plus predicates)")
    p.add_argument("--graphs", help="graph file used for sequence generation")
    p.add_argument("--targets")
    p.add_argument("--sequences", help="sequence file written by genseq")
    p.add_argument("--seeds", help="seed directory or single file")
    p.add_argument("--out", help="output directory for corpora and stats.jsonl")
    p.add_argument("--strategy", type=_strategy)
    _add_config_flags(p)
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("bench", help="compare strategies over fixtures")
    p.add_argument("--fixtures", nargs="+", default=["fig1", "multi10"],
                   help=f"shipped names ({', '.join(SHIPPED)}) or program paths")
    p.add_argument("--strategies", nargs="+", type=_strategy)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--out", help="write the JSON report here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench, strategy=None)

    p = sub.add_parser("report", help="summarize stats.jsonl or a bench report")
    p.add_argument("input", help="stats.jsonl, an output directory, or a bench JSON report")
    p.add_argument("--reference", default="mes")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "runs", 1) < 1:
            raise UsageError("--runs must be >= 1")
        return args.func(args)
    except (UsageError, ConfigError, GraphError, TargetError, CampaignError, FileNotFoundError) as exc:
        print(f"leofuzz: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
