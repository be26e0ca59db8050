"""Strategy benchmarking over fixture programs.

Every (fixture, strategy, run) cell is one deterministic campaign seeded
with ``rng_seed + run_index``.  Executions, not wall-clock time, are the
primary metric so reports are reproducible.
"""

from __future__ import annotations

import json
import logging
import statistics
import time
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .config import STRATEGIES, CampaignConfig
from .engine import run_campaign
from .graphs import TargetSequence, build_sequences, parse_targets
from .simprog import SimProgram, load_program

log = logging.getLogger(__name__)

SHIPPED = ("p0", "fig1", "fig1_magic4", "multi10", "fig3")


@dataclass
class Fixture:
    name: str
    program: SimProgram
    sequences: list[TargetSequence]
    seeds: list[bytes]


def fixture_dir() -> Path:
    return Path(str(resources.files("leofuzz") / "fixtures"))


def read_seed_dir(path: str | Path) -> list[bytes]:
    """All regular files in ``path``, in name order."""
    path = Path(path)
    if path.is_file():
        return [path.read_bytes()]
    return [p.read_bytes() for p in sorted(path.iterdir()) if p.is_file()]


def load_fixture(spec: str | Path, epsilon: float = 0.5) -> Fixture:
    """Load a shipped fixture by name, or a program file with sibling files.

    For ``dir/prog.json`` the targets come from ``dir/prog.targets`` and the
    seeds from ``dir/seeds/prog/``.
    """
    path = Path(spec)
    if not path.suffix and not path.exists():
        path = fixture_dir() / f"{spec}.json"
    if not path.exists():
        raise FileNotFoundError(f"no such fixture: {spec}")
    program = load_program(path)
    targets = parse_targets(path.with_suffix(".targets").read_text())
    seeds = read_seed_dir(path.parent / "seeds" / path.stem)
    return Fixture(path.stem, program, build_sequences(program.graphs, targets, epsilon), seeds)


def a12(a: Sequence[float], b: Sequence[float]) -> float:
    """Vargha-Delaney effect size for "a needs fewer executions than b".

    P(a < b) + 0.5 P(a == b) over all run pairs; 0.5 means no difference.
    """
    if not a or not b:
        raise ValueError("a12 needs two non-empty samples")
    wins = 0.0
    for x in a:
        for y in b:
            if x < y:
                wins += 1.0
            elif x == y:
                wins += 0.5
    return wins / (len(a) * len(b))


@dataclass
class RunRecord:
    rng_seed: int
    executions: int
    executions_to_all: int | None
    targets_reached: int
    reached: list[str]
    crashes: list[str]
    seconds: float


@dataclass
class CellSummary:
    fixture: str
    strategy: str
    targets: int
    runs: list[RunRecord] = field(default_factory=list)
    budget: int = 0

    @property
    def scores(self) -> list[int]:
        """Executions to all targets, with unfinished runs counted at budget."""
        return [r.executions_to_all if r.executions_to_all is not None else self.budget for r in self.runs]

    @property
    def completed(self) -> int:
        return sum(r.executions_to_all is not None for r in self.runs)

    @property
    def median(self) -> float:
        return float(statistics.median(self.scores))

    @property
    def mean(self) -> float:
        return float(statistics.fmean(self.scores))

    @property
    def reproduced(self) -> int:
        """Distinct targets hit in at least one run."""
        return len({t for r in self.runs for t in r.reached})

    def to_dict(self) -> dict[str, Any]:
        return {
            "fixture": self.fixture,
            "strategy": self.strategy,
            "targets": self.targets,
            "budget": self.budget,
            "completed": self.completed,
            "reproduced": self.reproduced,
            "median": self.median,
            "mean": self.mean,
            "scores": self.scores,
            "runs": [asdict(r) for r in self.runs],
        }


@dataclass
class BenchReport:
    cells: list[CellSummary]
    runs: int
    rng_seed: int

    def cell(self, fixture: str, strategy: str) -> CellSummary:
        for c in self.cells:
            if c.fixture == fixture and c.strategy == strategy:
                return c
        raise KeyError((fixture, strategy))

    def a12_table(self) -> list[dict[str, Any]]:
        out = []
        by_fixture: dict[str, list[CellSummary]] = {}
        for c in self.cells:
            by_fixture.setdefault(c.fixture, []).append(c)
        for fixture, cells in by_fixture.items():
            for x in cells:
                for y in cells:
                    if x is not y:
                        out.append({"fixture": fixture, "a": x.strategy, "b": y.strategy,
                                    "a12": a12(x.scores, y.scores)})
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "runs": self.runs,
            "rng_seed": self.rng_seed,
            "cells": [c.to_dict() for c in self.cells],
            "a12": self.a12_table(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def text_table(self, reference: str = "mes") -> str:
        return format_table(self.to_dict(), reference)


def format_table(report: dict[str, Any], reference: str = "mes") -> str:
    """Render a report dict as a fixed-width table.

    Factor and A12 compare the reference strategy against each row.
    """
    pairs = {(p["fixture"], p["a"], p["b"]): p["a12"] for p in report.get("a12", [])}
    medians = {(c["fixture"], c["strategy"]): c["median"] for c in report["cells"]}
    header = f"{'Fixture':<14}{'Strategy':<16}{'Tgt.':>5}{'Rep.':>6}{'Done':>7}{'TTE(med)':>11}{'TTE(mean)':>12}{'Factor':>8}{'A12':>7}"
    lines = [header, "-" * len(header)]
    for c in report["cells"]:
        fx, st = c["fixture"], c["strategy"]
        ref = medians.get((fx, reference))
        if st == reference or ref is None:
            factor = a = "---"
        else:
            factor = f"{c['median'] / ref:.2f}" if ref else "inf"
            a = f"{pairs[(fx, reference, st)]:.2f}"
        done = f"{c['completed']}/{len(c['runs'])}"
        lines.append(
            f"{fx:<14}{st:<16}{c['targets']:>5}{c['reproduced']:>6}{done:>7}"
            f"{c['median']:>11.0f}{c['mean']:>12.0f}{factor:>8}{a:>7}"
        )
    return "\n".join(lines)


def run_bench(
    fixtures: Iterable[str | Path | Fixture],
    strategies: Sequence[str] = STRATEGIES,
    runs: int = 10,
    base_config: CampaignConfig | None = None,
    rng_seed: int = 0,
) -> BenchReport:
    if runs < 1:
        raise ValueError("runs must be >= 1")
    base = base_config or CampaignConfig(deterministic=True, exec_budget=1_000_000, budget=1e9)
    if base.exec_budget is None:
        raise ValueError("bench needs an execution budget")
    loaded = [f if isinstance(f, Fixture) else load_fixture(f, base.epsilon) for f in fixtures]
    cells = []
    for fx in loaded:
        for strategy in strategies:
            cfg = base.replace(strategy=strategy)
            cell = CellSummary(fx.name, cfg.strategy, len(fx.sequences), budget=base.exec_budget)
            for i in range(runs):
                t0 = time.perf_counter()
                crashes, stats = run_campaign(fx.program, fx.sequences, fx.seeds, cfg, rng_seed=rng_seed + i)
                cell.runs.append(RunRecord(
                    rng_seed=rng_seed + i,
                    executions=stats.executions,
                    executions_to_all=stats.executions_to_all,
                    targets_reached=len(stats.first_reach),
                    reached=sorted(stats.first_reach),
                    crashes=sorted(crashes.crashes),
                    seconds=round(time.perf_counter() - t0, 3),
                ))
            log.info("%s/%s: median %.0f, %d/%d complete", fx.name, cell.strategy, cell.median,
                     cell.completed, runs)
            cells.append(cell)
    return BenchReport(cells, runs, rng_seed)
