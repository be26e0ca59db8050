"""Deterministic simulated programs and a single-edge branch solver.

A program is a graph file whose edges carry byte predicates.  Executing an
input walks the interprocedural graph from the entry block: at every block
the first out-edge whose predicate holds is taken, falling back to the
block's default edge.  A block with no viable out-edge returns to its
caller (or ends the run at top level).  Reaching a crash block is the crash
signal.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any

from .coverage import CoverageMap, ExecutionTrace
from .graphs import GraphSemanticError, ProgramGraphs, TargetSequence, graphs_from_doc, load_json

Edge = tuple[str, str]

PREDICATE_KINDS = ("byte_eq", "byte_lt", "magic_bytes", "length_ge", "always")
DEFAULT_MAX_STEPS = 4096
DEFAULT_MAX_INPUT = 4096


@dataclass(frozen=True)
class Predicate:
    kind: str
    offset: int = 0
    value: int | bytes = 0

    def __post_init__(self) -> None:
        if self.kind not in PREDICATE_KINDS:
            raise ValueError(f"unknown predicate kind {self.kind!r}")
        if self.offset < 0:
            raise ValueError("predicate offset must be >= 0")
        if self.kind == "magic_bytes":
            if not isinstance(self.value, bytes) or not self.value:
                raise ValueError("magic_bytes needs a non-empty byte string")
        elif self.kind in ("byte_eq", "byte_lt"):
            if not isinstance(self.value, int) or not 0 <= self.value <= 255:
                raise ValueError(f"{self.kind} needs a byte value")
        elif self.kind == "length_ge":
            if not isinstance(self.value, int) or self.value < 0:
                raise ValueError("length_ge needs a non-negative length")

    @property
    def extent(self) -> int:
        """Smallest input length the predicate can look at."""
        if self.kind == "magic_bytes":
            return self.offset + len(self.value)  # type: ignore[arg-type]
        if self.kind in ("byte_eq", "byte_lt"):
            return self.offset + 1
        if self.kind == "length_ge":
            return int(self.value)  # type: ignore[arg-type]
        return 0

    def holds(self, data: bytes) -> bool:
        return _compile(self)(data)


def _compile(p: Predicate) -> Callable[[bytes], bool]:
    off = p.offset
    if p.kind == "byte_eq":
        v = p.value
        return lambda d: len(d) > off and d[off] == v
    if p.kind == "byte_lt":
        v = p.value
        return lambda d: len(d) > off and d[off] < v
    if p.kind == "magic_bytes":
        magic = p.value
        end = off + len(magic)  # type: ignore[arg-type]
        return lambda d: d[off:end] == magic
    if p.kind == "length_ge":
        n = p.value
        return lambda d: len(d) >= n
    return lambda d: True


@dataclass(frozen=True)
class ExecResult:
    trace: ExecutionTrace
    raw: tuple[str, ...]
    crashed_at: str | None
    steps: int
    overflow: bool = False


@dataclass
class _Node:
    crash: bool
    calls: list[tuple[Callable[[bytes], bool] | None, str]]
    call_default: str | None
    options: list[tuple[Callable[[bytes], bool] | None, str]]
    default: str | None


@dataclass
class SimProgram:
    graphs: ProgramGraphs
    predicates: dict[Edge, Predicate]
    crash_blocks: frozenset[str]
    default_edges: dict[str, str] = field(default_factory=dict)
    max_steps: int = DEFAULT_MAX_STEPS
    max_input: int = DEFAULT_MAX_INPUT
    instrumented: frozenset[str] | None = None
    _plan: dict[str, _Node] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._validate()
        self._plan = self._build_plan()

    def _validate(self) -> None:
        g = self.graphs
        for block in self.crash_blocks:
            if block not in g.block_function:
                raise GraphSemanticError(f"unknown crash block {block!r}", "crash_blocks")
        edges = set(g.intra_edges()) | set(g.call_edges())
        for e, p in self.predicates.items():
            if e not in edges:
                raise GraphSemanticError(f"predicate on unknown edge {list(e)}", "predicates")
            if p.extent > self.max_input:
                raise GraphSemanticError(f"predicate on {list(e)} reads past max_input", "predicates")
        for a, b in self.default_edges.items():
            if (a, b) not in edges:
                raise GraphSemanticError(f"default edge {[a, b]} is not an edge", "default_edges")
        for block in g.all_blocks():
            outs = g.successors(block)
            if len(outs) < 2:
                continue
            if block not in self.default_edges:
                raise GraphSemanticError(f"block {block!r} branches without a default edge", "default_edges")
            for s in outs:
                if s != self.default_edges[block] and (block, s) not in self.predicates:
                    raise GraphSemanticError(f"branch edge {[block, s]} has no predicate", "predicates")
        if self.max_steps < 1:
            raise GraphSemanticError("max_steps must be positive", "max_steps")

    def _build_plan(self) -> dict[str, _Node]:
        g = self.graphs
        plan: dict[str, _Node] = {}

        def pred(edge: Edge) -> Callable[[bytes], bool] | None:
            p = self.predicates.get(edge)
            return None if p is None or p.kind == "always" else _compile(p)

        for block in g.all_blocks():
            default = self.default_edges.get(block)
            succ_default = default if default in g.successors(block) else None
            options = [(pred((block, s)), s) for s in g.successors(block) if s != succ_default]
            entries = [g.cfgs[c].entry_block for c in g.calls.get(block, [])]
            call_default = default if default in entries else None
            calls = [(pred((block, e)), e) for e in entries if e != call_default]
            plan[block] = _Node(
                crash=block in self.crash_blocks,
                calls=calls,
                call_default=call_default,
                options=options,
                default=succ_default,
            )
        return plan

    @property
    def entry_block(self) -> str:
        return self.graphs.entry_block

    def with_instrumentation(self, blocks: Iterable[str]) -> SimProgram:
        return dataclasses.replace(self, instrumented=frozenset(blocks))

    def instrument_for(self, sequences: Sequence[TargetSequence]) -> SimProgram:
        blocks = {b for s in sequences for b in s.blocks}
        unknown = blocks - set(self.graphs.block_function)
        if unknown:
            raise GraphSemanticError(f"sequence blocks not in program: {sorted(unknown)}", "sequences")
        return self.with_instrumentation(blocks)


def _choose(options: list[tuple[Callable[[bytes], bool] | None, str]], default: str | None, data: bytes) -> str | None:
    for test, dest in options:
        if test is None or test(data):
            return dest
    return default


def run_raw(program: SimProgram, data: bytes) -> tuple[list[str], str | None, int, bool]:
    """Walk the program on ``data``; returns (raw trace, crash block, steps, overflow)."""
    plan = program._plan
    block = program.entry_block
    raw = [block]
    stack: list[str] = []
    steps = 0
    limit = program.max_steps
    entering = True
    while True:
        node = plan[block]
        if entering and node.crash:
            return raw, block, steps, False
        if steps >= limit:
            return raw, None, steps, True
        if entering and (node.calls or node.call_default):
            callee = _choose(node.calls, node.call_default, data)
            if callee is not None:
                stack.append(block)
                block = callee
                raw.append(block)
                steps += 1
                continue
        nxt = _choose(node.options, node.default, data)
        if nxt is None:
            if not stack:
                return raw, None, steps, False
            block = stack.pop()
            entering = False
            continue
        block = nxt
        raw.append(block)
        steps += 1
        entering = True


def execute(program: SimProgram, data: bytes) -> ExecResult:
    raw, crashed, steps, overflow = run_raw(program, data)
    inst = program.instrumented
    blocks = tuple(raw) if inst is None else tuple(b for b in raw if b in inst)
    trace = ExecutionTrace(blocks=blocks, edge_set=frozenset(zip(raw, raw[1:])))
    return ExecResult(trace=trace, raw=tuple(raw), crashed_at=crashed, steps=steps, overflow=overflow)


# -- loading -----------------------------------------------------------------


def _predicate_value(kind: str, value: Any, where: str) -> int | bytes:
    if kind == "magic_bytes":
        if isinstance(value, str):
            return value.encode("latin-1")
        if isinstance(value, list) and all(isinstance(v, int) and 0 <= v <= 255 for v in value):
            return bytes(value)
        raise GraphSemanticError("magic_bytes value must be a string or byte list", where)
    if kind in ("byte_eq", "byte_lt"):
        if isinstance(value, str) and len(value) == 1:
            return ord(value)
        if isinstance(value, int):
            return value
        raise GraphSemanticError(f"{kind} value must be a byte or one-character string", where)
    if kind == "length_ge":
        if isinstance(value, int):
            return value
        raise GraphSemanticError("length_ge value must be an integer", where)
    return 0


def program_from_doc(doc: dict[str, Any]) -> SimProgram:
    graphs = graphs_from_doc(doc)
    predicates: dict[Edge, Predicate] = {}
    for i, item in enumerate(doc.get("predicates", [])):
        where = f"predicates[{i}]"
        if not isinstance(item, dict):
            raise GraphSemanticError("predicate must be an object", where)
        kind = item.get("kind", "always")
        if kind not in PREDICATE_KINDS:
            raise GraphSemanticError(f"unknown predicate kind {kind!r}", where)
        edge = (item.get("from"), item.get("to"))
        if edge in predicates:
            raise GraphSemanticError(f"second predicate on edge {list(edge)}", where)
        try:
            predicates[edge] = Predicate(
                kind=kind,
                offset=int(item.get("offset", 0)),
                value=_predicate_value(kind, item.get("value", 0), where),
            )
        except ValueError as exc:
            if isinstance(exc, GraphSemanticError):
                raise
            raise GraphSemanticError(str(exc), where) from exc
    defaults: dict[str, str] = {}
    for i, edge in enumerate(doc.get("default_edges", [])):
        if not (isinstance(edge, list) and len(edge) == 2):
            raise GraphSemanticError("default edge must be [from, to]", f"default_edges[{i}]")
        if edge[0] in defaults:
            raise GraphSemanticError(f"block {edge[0]!r} has two default edges", f"default_edges[{i}]")
        defaults[edge[0]] = edge[1]
    return SimProgram(
        graphs=graphs,
        predicates=predicates,
        crash_blocks=frozenset(doc.get("crash_blocks", [])),
        default_edges=defaults,
        max_steps=int(doc.get("max_steps", DEFAULT_MAX_STEPS)),
        max_input=int(doc.get("max_input", DEFAULT_MAX_INPUT)),
    )


def load_program(source: bytes | str | IO[Any] | Path) -> SimProgram:
    return program_from_doc(load_json(source))


# -- solving -----------------------------------------------------------------


def _invert(p: Predicate, seed: bytes) -> bytes | None:
    buf = bytearray(seed)
    if p.kind == "length_ge":
        n = int(p.value)  # type: ignore[arg-type]
        if len(buf) < n:
            buf.extend(b"\x00" * (n - len(buf)))
        return bytes(buf)
    if p.kind == "always":
        return None
    if len(buf) < p.extent:
        buf.extend(b"\x00" * (p.extent - len(buf)))
    if p.kind == "byte_eq":
        buf[p.offset] = int(p.value)  # type: ignore[arg-type]
    elif p.kind == "byte_lt":
        if p.value == 0:
            return None
        if buf[p.offset] >= p.value:  # type: ignore[operator]
            buf[p.offset] = int(p.value) - 1  # type: ignore[arg-type]
    elif p.kind == "magic_bytes":
        buf[p.offset:p.offset + len(p.value)] = p.value  # type: ignore[arg-type]
    return bytes(buf)


def solve_branch(program: SimProgram, seed: bytes, edge: Edge) -> bytes | None:
    """Edit ``seed`` so that its execution crosses ``edge``.

    Only the bytes the edge's predicate looks at are touched (plus zero
    padding).  Returns None when the predicate cannot be inverted or the
    edited input still does not take the edge.
    """
    p = program.predicates.get(edge)
    if p is None:
        return None
    candidate = _invert(p, seed)
    if candidate is None or len(candidate) > program.max_input:
        return None
    raw, _, _, _ = run_raw(program, candidate)
    if edge not in zip(raw, raw[1:]):
        return None
    return candidate


def frontier_edges(program: SimProgram, raw: Sequence[str], covered: CoverageMap | None = None) -> list[Edge]:
    """Untaken, solvable edges leaving blocks of a raw trace, deepest first."""
    g = program.graphs
    taken = set(zip(raw, raw[1:]))
    seen: set[Edge] = set()
    out: list[Edge] = []
    for block in reversed(raw):
        dests = list(g.successors(block)) + [g.cfgs[c].entry_block for c in g.calls.get(block, [])]
        for dest in dests:
            e = (block, dest)
            if e in taken or e in seen:
                continue
            seen.add(e)
            p = program.predicates.get(e)
            if p is None or p.kind == "always":
                continue
            if covered is not None and e in covered.seen_edges:
                continue
            out.append(e)
    return out


class ConcolicWorker:
    """Turns stored seeds into inputs that cross their unexplored branches.

    Each seed is processed once.  Directed seeds are preferred; coverage
    seeds are used only when no unprocessed directed seed remains.
    """

    def __init__(self, program: SimProgram, max_solutions: int = 4):
        self.program = program
        self.max_solutions = max_solutions
        self.processed: set[int] = set()
        self.steps = 0

    def pick(self, dq: Sequence[Any], cq: Sequence[Any]) -> Any | None:
        for queue in (dq, cq):
            for seed in queue:
                if seed.id not in self.processed:
                    return seed
        return None

    def step(self, dq: Sequence[Any], cq: Sequence[Any], coverage: CoverageMap | None = None) -> tuple[Any | None, list[bytes]]:
        """Process one seed; returns it together with the solved inputs."""
        seed = self.pick(dq, cq)
        if seed is None:
            return None, []
        self.processed.add(seed.id)
        self.steps += 1
        out: list[bytes] = []
        for edge in frontier_edges(self.program, seed.raw, coverage):
            solved = solve_branch(self.program, seed.data, edge)
            if solved is not None and solved != seed.data and solved not in out:
                out.append(solved)
                if len(out) >= self.max_solutions:
                    break
        return seed, out


def concolic_worker_step(
    queues: tuple[Sequence[Any], Sequence[Any]],
    program: SimProgram,
    coverage: CoverageMap | None = None,
    processed: set[int] | None = None,
    max_solutions: int = 4,
) -> list[bytes]:
    """Functional form of ConcolicWorker.step over (DQ, CQ) snapshots."""
    worker = ConcolicWorker(program, max_solutions)
    if processed is not None:
        worker.processed = processed
    _, candidates = worker.step(queues[0], queues[1], coverage)
    return candidates
