"""The fuzzing loop: seed selection, energy, mutation, execution, routing."""

from __future__ import annotations

import dataclasses
import json
import logging
import queue as _queue
import random
import threading
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .config import CampaignConfig
from .coverage import CoverageMap, ExecutionTrace, Outcome, SeedCoverage, classify_input, seed_coverage
from .graphs import GraphSemanticError, TargetSequence
from .mutation import mutate
from .scheduler import (
    EnergyDecision,
    accept_schedule,
    decide,
    distance_factor,
    harmonic_node_distances,
    harmonic_seed_distance,
    mes_factor,
)
from .simprog import ConcolicWorker, SimProgram, run_raw
from .stagecoord import EXPLOITATION, EXPLORATION, StageState, record_execution_outcome, stage_coord

log = logging.getLogger(__name__)

CRASH = "crash"


class CampaignError(ValueError):
    pass


@dataclass
class Seed:
    id: int
    data: bytes
    trace: ExecutionTrace
    raw: tuple[str, ...]
    coverage: SeedCoverage
    origin: str = "fuzzer"
    distance: float | None = None


class SeedQueue:
    """Append-only seed list read through a cyclic cursor.

    ``append`` and ``snapshot`` take a lock so a second producer thread can
    share the queue with the engine loop.
    """

    def __init__(self, name: str = ""):
        self.name = name
        self.items: list[Seed] = []
        self.cursor = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.snapshot())

    def append(self, seed: Seed) -> None:
        with self._lock:
            self.items.append(seed)

    def snapshot(self) -> list[Seed]:
        with self._lock:
            return list(self.items)

    def get_next(self) -> Seed:
        with self._lock:
            if not self.items:
                raise IndexError(f"queue {self.name or '?'} is empty")
            if self.cursor >= len(self.items):
                self.cursor = 0
            seed = self.items[self.cursor]
            self.cursor = (self.cursor + 1) % len(self.items)
            return seed


def get_next_seed(queue: SeedQueue) -> Seed:
    return queue.get_next()


@dataclass
class CrashStore:
    crashes: dict[str, Seed] = field(default_factory=dict)
    attempts: int = 0

    def add(self, seed: Seed, block: str) -> bool:
        self.attempts += 1
        if block in self.crashes:
            return False
        self.crashes[block] = seed
        return True

    def __len__(self) -> int:
        return len(self.crashes)


@dataclass
class CampaignStats:
    strategy: str
    rng_seed: int
    budget: float
    exec_budget: int | None
    start: float = 0.0
    executions: int = 0
    elapsed: float = 0.0
    first_reach: dict[str, dict[str, Any]] = field(default_factory=dict)
    stage_log: list[dict[str, Any]] = field(default_factory=list)
    targets: list[str] = field(default_factory=list)
    routed: dict[str, int] = field(default_factory=lambda: {"crash": 0, "dq": 0, "cq": 0, "discarded": 0})
    generated: int = 0
    bootstrap: int = 0
    concolic_inputs: int = 0
    iterations: int = 0
    skipped: int = 0
    fallbacks: int = 0
    selections: list[tuple[int, int, int]] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def all_reached(self) -> bool:
        return bool(self.targets) and all(t in self.first_reach for t in self.targets)

    @property
    def executions_to_all(self) -> int | None:
        if not self.all_reached:
            return None
        return max(self.first_reach[t]["executions"] for t in self.targets)


class _Clock:
    def __init__(self, deterministic: bool, exec_seconds: float):
        self.deterministic = deterministic
        self.exec_seconds = exec_seconds
        self._start = time.monotonic()

    def now(self, executions: int) -> float:
        if self.deterministic:
            return executions * self.exec_seconds
        return time.monotonic() - self._start


class EventLog:
    """Append-only JSON-lines sink; every line is flushed as it is written."""

    def __init__(self, path: Path | None = None):
        self.events: list[dict[str, Any]] = []
        self._fh = open(path, "a", encoding="utf-8") if path is not None else None

    def emit(self, event: dict[str, Any]) -> None:
        self.events.append(event)
        if self._fh is not None:
            self._fh.write(json.dumps(event, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class Campaign:
    """One fuzzing campaign over a simulated program.

    The loop follows the classic directed-greybox shape: pick a stage, pull
    a seed from the matching queue, give it energy, and spend that energy
    on mutants that are executed and routed to the crash store, the
    directed queue, the coverage queue, or the bin.
    """

    def __init__(
        self,
        program: SimProgram,
        sequences: Sequence[TargetSequence],
        initial_seeds: Sequence[bytes],
        config: CampaignConfig,
        out_dir: str | Path | None = None,
    ):
        if not initial_seeds:
            raise CampaignError("empty seed corpus")
        if not sequences:
            raise CampaignError("no target sequences")
        try:
            self.program = program.instrument_for(sequences)
        except GraphSemanticError as exc:
            raise CampaignError(f"program/sequence mismatch: {exc}") from exc
        # g_max_cov is campaign state; never touch the caller's objects
        self.sequences = [dataclasses.replace(s, blocks=list(s.blocks)) for s in sequences]
        self.initial_seeds = [bytes(s) for s in initial_seeds]
        self.config = config
        self.sched = config.scheduler()
        self.rng = random.Random(config.rng_seed)
        self.state: StageState = config.stage_state()
        self.mes = config.strategy == "mes"

        self.cq = SeedQueue("cq")
        self.dq = SeedQueue("dq")
        self.crashes = CrashStore()
        self.coverage = CoverageMap()
        self.targets = {s.target.resolved_block: s.target.label for s in self.sequences}
        self.stats = CampaignStats(
            strategy=config.strategy,
            rng_seed=config.rng_seed,
            budget=config.effective_budget,
            exec_budget=config.exec_budget,
            targets=sorted(set(self.targets.values())),
        )
        self.clock = _Clock(config.deterministic, config.exec_seconds)
        self._cache: dict[tuple[str, ...], tuple[ExecutionTrace, SeedCoverage, float | None]] = {}
        self._next_id = 0
        self._dist_lo = float("inf")
        self._dist_hi = float("-inf")
        self._node_dist: dict[str, float] = {}
        if config.strategy == "aflgo_distance":
            self._node_dist = harmonic_node_distances(
                self.program.graphs.icfg(returns=True), list(self.targets)
            )
        self._fallback_logged = False
        self._done = False
        self._worker = ConcolicWorker(self.program, config.concolic_max_solutions) if config.concolic else None
        self._pending: _queue.Queue[bytes] = _queue.Queue()

        self.out_dir = Path(out_dir) if out_dir is not None else None
        stats_path = None
        if self.out_dir is not None:
            for sub in ("queue_cov", "queue_dir", "crashes"):
                (self.out_dir / sub).mkdir(parents=True, exist_ok=True)
            stats_path = self.out_dir / "stats.jsonl"
            stats_path.unlink(missing_ok=True)
        self.log = EventLog(stats_path)

    # -- bookkeeping -------------------------------------------------------

    def now(self) -> float:
        return self.clock.now(self.stats.executions)

    def _event(self, kind: str, **fields: Any) -> None:
        ev = {"event": kind, "executions": self.stats.executions, "t": round(self.now(), 6)}
        ev.update(fields)
        self.log.emit(ev)

    def _budget_left(self) -> bool:
        cfg = self.config
        if cfg.exec_budget is not None and self.stats.executions >= cfg.exec_budget:
            self.stats.stop_reason = self.stats.stop_reason or "exec_budget"
            return False
        if self.now() >= cfg.effective_budget:
            self.stats.stop_reason = self.stats.stop_reason or "time_budget"
            return False
        return True

    def _write(self, sub: str, name: str, data: bytes) -> None:
        if self.out_dir is not None:
            (self.out_dir / sub / name).write_bytes(data)

    # -- execution ---------------------------------------------------------

    def _observe(self, raw: tuple[str, ...]) -> tuple[ExecutionTrace, SeedCoverage, float | None]:
        hit = self._cache.get(raw)
        if hit is None:
            inst = self.program.instrumented
            blocks = tuple(b for b in raw if b in inst)  # type: ignore[operator]
            trace = ExecutionTrace(blocks=blocks, edge_set=frozenset(zip(raw, raw[1:])))
            cov = seed_coverage(blocks, self.sequences)
            dist = None
            if self._node_dist:
                try:
                    dist = harmonic_seed_distance(raw, self._node_dist)
                except ValueError:
                    dist = None
            hit = (trace, cov, dist)
            if len(self._cache) < 200_000:
                self._cache[raw] = hit
        return hit

    def run_input(self, data: bytes, origin: str = "fuzzer") -> Outcome | str | None:
        """Execute one input and route it.  Returns the routing outcome."""
        if not self._budget_left():
            self._done = True
            return None
        self.stats.executions += 1
        raw_list, crashed, _, _ = run_raw(self.program, data)
        raw = tuple(raw_list)
        trace, cov, dist = self._observe(raw)

        for block in self.targets.keys() & set(raw):
            label = self.targets[block]
            if label not in self.stats.first_reach:
                self.stats.first_reach[label] = {
                    "executions": self.stats.executions,
                    "t": round(self.now(), 6),
                }
                self._event("target", target=label, block=block)
        if dist is not None:
            self._dist_lo = min(self._dist_lo, dist)
            self._dist_hi = max(self._dist_hi, dist)

        seed = Seed(self._next_id + 1, data, trace, raw, cov, origin, dist)
        outcome = self.route_input(seed, crashed)
        if self.config.stop_on_all_targets and self.stats.all_reached:
            self.stats.stop_reason = "all_targets"
            self._done = True
        return outcome

    def route_input(self, seed: Seed, crashed: str | None) -> Outcome | str:
        """Send an executed input to the crash store, DQ, CQ, or nowhere."""
        stats = self.stats
        generated = seed.origin != "initial"
        if generated:
            stats.generated += 1
        # classification must see the maxima from before this execution
        if crashed is not None:
            outcome: Outcome | str = CRASH
        else:
            outcome, _ = classify_input(seed.trace, self.sequences, self.coverage, seed.coverage)
        for c, s in zip(seed.coverage.per_sequence, self.sequences):
            if c > s.g_max_cov:
                s.g_max_cov = c

        if crashed is not None:
            self._next_id += 1
            if generated:
                stats.routed["crash"] += 1
            if self.crashes.add(seed, crashed):
                self._write("crashes", f"id_{seed.id:06d}_{crashed}", seed.data)
                self._event("crash", block=crashed, seed=seed.id, origin=seed.origin)
            return CRASH

        self.coverage.update(seed.trace.edge_set)
        if seed.origin == "initial":
            self._next_id += 1
            self.cq.append(seed)
            self._write("queue_cov", f"id_{seed.id:06d}", seed.data)
            if outcome is Outcome.DIRECTED and self.mes:
                self.dq.append(seed)
                self._write("queue_dir", f"id_{seed.id:06d}", seed.data)
            return outcome

        if self.mes:
            record_execution_outcome(self.state, outcome)  # type: ignore[arg-type]
        if outcome is Outcome.DIRECTED and self.mes:
            self._next_id += 1
            self.dq.append(seed)
            stats.routed["dq"] += 1
            self._write("queue_dir", f"id_{seed.id:06d}", seed.data)
        elif outcome is not Outcome.NEITHER:
            self._next_id += 1
            self.cq.append(seed)
            stats.routed["cq"] += 1
            self._write("queue_cov", f"id_{seed.id:06d}", seed.data)
        else:
            stats.routed["discarded"] += 1
        return outcome

    # -- scheduling --------------------------------------------------------

    def factor(self, seed: Seed) -> float:
        strategy = self.config.strategy
        if strategy == "mes":
            return mes_factor(seed.coverage, self.sequences, self.sched.beta)
        if strategy == "seqcov_single":
            return seed.coverage.best
        return distance_factor(seed.distance, self._dist_lo, self._dist_hi)

    def energy(self, seed: Seed) -> EnergyDecision:
        return decide(self.factor(seed), self.now(), self.sched)

    def _select_queue(self) -> SeedQueue:
        if not self.mes:
            return self.cq
        if self.state.sof == EXPLOITATION:
            if len(self.dq):
                return self.dq
            self.stats.fallbacks += 1
            if not self._fallback_logged:
                self._fallback_logged = True
                self._event("fallback", wanted="dq", used="cq")
            return self.cq
        return self.cq if len(self.cq) else self.dq

    def _coordinate(self) -> None:
        before = self.state.sof
        stage_coord(self.state, self.now())
        if self.state.sof != before:
            self._fallback_logged = False
            entry = {"sof": self.state.sof, "epoch": self.state.epoch, "rate": round(self.state.rate, 12)}
            self.stats.stage_log.append({"executions": self.stats.executions, **entry})
            self._event("stage", **entry)

    def _concolic_round(self) -> None:
        assert self._worker is not None
        _, candidates = self._worker.step(self.dq.snapshot(), self.cq.snapshot(), self.coverage)
        self._run_concolic(candidates)

    def _run_concolic(self, candidates: Iterable[bytes]) -> None:
        for data in candidates:
            if self._done:
                return
            self.stats.concolic_inputs += 1
            self.run_input(data, origin="concolic")

    def _drain_pending(self) -> None:
        while True:
            try:
                data = self._pending.get_nowait()
            except _queue.Empty:
                return
            self._run_concolic([data])

    def _thread_worker(self, stop: threading.Event) -> None:
        assert self._worker is not None
        while not stop.is_set():
            seed, candidates = self._worker.step(self.dq.snapshot(), self.cq.snapshot(), self.coverage)
            for c in candidates:
                self._pending.put(c)
            if seed is None:
                stop.wait(0.01)

    def bootstrap(self) -> None:
        for data in self.initial_seeds:
            if self._done:
                return
            self.stats.bootstrap += 1
            self.run_input(data, origin="initial")

    def run(self) -> tuple[CrashStore, CampaignStats]:
        cfg = self.config
        self._event(
            "start",
            strategy=cfg.strategy,
            rng_seed=cfg.rng_seed,
            targets=self.stats.targets,
            sequences=[s.blocks for s in self.sequences],
            concolic=cfg.concolic,
        )
        stop = threading.Event()
        thread = None
        try:
            self.bootstrap()
            if not len(self.cq) and not len(self.dq) and not self._done:
                # every initial seed crashed; keep fuzzing from them anyway
                for data in self.initial_seeds:
                    raw = tuple(run_raw(self.program, data)[0])
                    trace, cov, dist = self._observe(raw)
                    self._next_id += 1
                    self.cq.append(Seed(self._next_id, data, trace, raw, cov, "initial", dist))
            if self._worker is not None and not cfg.deterministic:
                thread = threading.Thread(target=self._thread_worker, args=(stop,), daemon=True)
                thread.start()
            milestone = cfg.milestone_every
            next_milestone = milestone
            while not self._done and self._budget_left():
                if self.mes:
                    self._coordinate()
                q = self._select_queue()
                seed = q.get_next()
                decision = self.energy(seed)
                best = max(self.energy(s).cap for s in q.snapshot())
                self.stats.iterations += 1
                if not accept_schedule(decision.cap, best, decision.temperature, self.sched.t_k, self.rng):
                    self.stats.skipped += 1
                    continue
                done_here = 0
                for _ in range(decision.menergy):
                    if self._done:
                        break
                    child = mutate(seed.data, self.rng, cfg.max_input_len)
                    if self.run_input(child) is None:
                        break
                    done_here += 1
                if cfg.record_selections:
                    self.stats.selections.append((seed.id, decision.menergy, done_here))
                if self._worker is not None:
                    if cfg.deterministic:
                        if self.stats.iterations % cfg.concolic_every == 0:
                            self._concolic_round()
                    else:
                        self._drain_pending()
                while milestone and self.stats.executions >= next_milestone:
                    self._event("exec", cq=len(self.cq), dq=len(self.dq), crashes=len(self.crashes))
                    next_milestone += milestone
            if not self.stats.stop_reason:
                self.stats.stop_reason = "all_targets" if self.stats.all_reached else "budget"
        finally:
            stop.set()
            if thread is not None:
                thread.join(timeout=5)
            self.stats.elapsed = self.now()
            self._event(
                "end",
                reached=sorted(self.stats.first_reach),
                crashes=sorted(self.crashes.crashes),
                cq=len(self.cq),
                dq=len(self.dq),
                stop=self.stats.stop_reason,
            )
            self.log.close()
        return self.crashes, self.stats


def run_campaign(
    program: SimProgram,
    sequences: Sequence[TargetSequence],
    initial_seeds: Sequence[bytes],
    config: CampaignConfig,
    rng_seed: int | None = None,
    out_dir: str | Path | None = None,
) -> tuple[CrashStore, CampaignStats]:
    if rng_seed is not None:
        config = config.replace(rng_seed=rng_seed)
    return Campaign(program, sequences, initial_seeds, config, out_dir).run()
