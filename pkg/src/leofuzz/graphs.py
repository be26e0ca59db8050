"""Program graphs, dominator trees and target-sequence generation.

A graph file describes a call graph plus one control-flow graph per
function.  From it we compute, for every target location, the ordered list
of blocks that every entry-to-target path must pass through.
"""

from __future__ import annotations

import json
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any

Location = tuple[str, int]


class GraphError(ValueError):
    """Raised for malformed or inconsistent graph files."""

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class GraphSyntaxError(GraphError):
    pass


class GraphSemanticError(GraphError):
    pass


class TargetError(ValueError):
    """A target location could not be mapped to a single reachable block."""

    def __init__(self, message: str, candidates: Sequence[str] = ()):
        self.candidates = list(candidates)
        super().__init__(message)


@dataclass
class FunctionCFG:
    name: str
    entry_block: str
    blocks: list[str]
    succs: dict[str, list[str]]


@dataclass
class ProgramGraphs:
    entry_function: str
    cg: dict[str, list[str]]
    cfgs: dict[str, FunctionCFG]
    block_locations: dict[str, list[Location]]
    block_function: dict[str, str]
    calls: dict[str, list[str]] = field(default_factory=dict)

    @property
    def entry_block(self) -> str:
        return self.cfgs[self.entry_function].entry_block

    def successors(self, block: str) -> list[str]:
        return self.cfgs[self.block_function[block]].succs[block]

    def all_blocks(self) -> list[str]:
        return [b for cfg in self.cfgs.values() for b in cfg.blocks]

    def intra_edges(self) -> list[tuple[str, str]]:
        return [(b, s) for cfg in self.cfgs.values() for b in cfg.blocks for s in cfg.succs[b]]

    def call_edges(self) -> list[tuple[str, str]]:
        return [
            (site, self.cfgs[callee].entry_block)
            for site, callees in self.calls.items()
            for callee in callees
        ]

    def exit_blocks(self, function: str) -> list[str]:
        cfg = self.cfgs[function]
        return [b for b in cfg.blocks if not cfg.succs[b]]

    def icfg(self, returns: bool = False) -> dict[str, list[str]]:
        """Interprocedural successor map: CFG edges plus call edges.

        With ``returns`` set, edges from each callee exit block back to the
        call site's successors are added too.  A call site without
        successors returns further up, so those edges are propagated to the
        caller's own return targets.
        """
        succ: dict[str, list[str]] = {b: list(self.successors(b)) for b in self.all_blocks()}
        for a, b in self.call_edges():
            if b not in succ[a]:
                succ[a].append(b)
        if not returns:
            return succ

        # continuation[f] = blocks control may reach right after f returns
        continuation: dict[str, set[str]] = {f: set() for f in self.cfgs}
        changed = True
        while changed:
            changed = False
            for site, callees in self.calls.items():
                after = set(self.successors(site))
                if not after:
                    after = continuation[self.block_function[site]]
                for callee in callees:
                    before = len(continuation[callee])
                    continuation[callee] |= after
                    changed |= len(continuation[callee]) != before
        for f, targets in continuation.items():
            for ex in self.exit_blocks(f):
                for t in sorted(targets):
                    if t not in succ[ex]:
                        succ[ex].append(t)
        return succ


@dataclass(frozen=True)
class Target:
    location: Location
    resolved_block: str
    resolved_function: str

    @property
    def label(self) -> str:
        return f"{self.location[0]}:{self.location[1]}"


@dataclass
class TargetSequence:
    target: Target
    blocks: list[str]
    priority: int = 0
    g_max_cov: float = 0.0

    def __len__(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class DominatorTree:
    root: Hashable
    idom: dict[Any, Any]

    def dominators(self, node: Hashable) -> list[Any]:
        """Dominators of ``node`` ordered from the root down to ``node``."""
        if node not in self.idom:
            raise KeyError(node)
        chain = [node]
        while node != self.root:
            node = self.idom[node]
            chain.append(node)
        chain.reverse()
        return chain

    def dominates(self, d: Hashable, n: Hashable) -> bool:
        return d in self.dominators(n)


# -- parsing -----------------------------------------------------------------


def _expect(cond: bool, message: str, where: str) -> None:
    if not cond:
        raise GraphSemanticError(message, where)


def _parse_location(item: Any, where: str) -> Location:
    _expect(
        isinstance(item, (list, tuple))
        and len(item) == 2
        and isinstance(item[0], str)
        and isinstance(item[1], int),
        "location must be [file, line]",
        where,
    )
    return (item[0], item[1])


def load_json(source: bytes | str | IO[Any] | Path) -> dict[str, Any]:
    if isinstance(source, Path):
        source = source.read_bytes()
    elif hasattr(source, "read"):
        source = source.read()  # type: ignore[union-attr]
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise GraphSyntaxError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise GraphSyntaxError("top level must be a JSON object", "line 1 column 1")
    return doc


def graphs_from_doc(doc: Mapping[str, Any]) -> ProgramGraphs:
    entry = doc.get("entry_function")
    _expect(isinstance(entry, str) and bool(entry), "missing entry_function", "entry_function")
    functions = doc.get("functions")
    _expect(isinstance(functions, list) and bool(functions), "missing functions array", "functions")

    cfgs: dict[str, FunctionCFG] = {}
    block_function: dict[str, str] = {}
    block_locations: dict[str, list[Location]] = {}
    raw_calls: list[tuple[str, str, list[Any]]] = []

    for fi, fn in enumerate(functions):
        where = f"functions[{fi}]"
        _expect(isinstance(fn, dict), "function must be an object", where)
        name = fn.get("name")
        _expect(isinstance(name, str) and bool(name), "function needs a name", where)
        _expect(name not in cfgs, f"duplicate function {name!r}", where)
        blocks = fn.get("blocks")
        _expect(isinstance(blocks, list) and bool(blocks), "function needs blocks", f"{where}.blocks")

        ids: list[str] = []
        for bi, blk in enumerate(blocks):
            bwhere = f"{where}.blocks[{bi}]"
            _expect(isinstance(blk, dict), "block must be an object", bwhere)
            bid = blk.get("id")
            _expect(isinstance(bid, str) and bool(bid), "block needs a non-empty id", bwhere)
            _expect(bid not in block_function, f"duplicate block id {bid!r}", bwhere)
            block_function[bid] = name
            lines = blk.get("lines", [])
            _expect(isinstance(lines, list), "lines must be an array", f"{bwhere}.lines")
            block_locations[bid] = [
                _parse_location(loc, f"{bwhere}.lines[{li}]") for li, loc in enumerate(lines)
            ]
            ids.append(bid)

        entry_block = fn.get("entry_block", ids[0])
        _expect(entry_block in ids, f"entry block {entry_block!r} not in function", f"{where}.entry_block")

        succs: dict[str, list[str]] = {b: [] for b in ids}
        for ei, edge in enumerate(fn.get("edges", [])):
            ewhere = f"{where}.edges[{ei}]"
            _expect(isinstance(edge, (list, tuple)) and len(edge) == 2, "edge must be [from, to]", ewhere)
            a, b = edge
            _expect(a in succs, f"edge source {a!r} is not a block of {name}", ewhere)
            _expect(b in succs, f"edge target {b!r} is not a block of {name}", ewhere)
            if b not in succs[a]:
                succs[a].append(b)

        for ci, call in enumerate(fn.get("calls", [])):
            cwhere = f"{where}.calls[{ci}]"
            _expect(isinstance(call, dict), "call must be an object", cwhere)
            site = call.get("block")
            _expect(site in succs, f"call site {site!r} is not a block of {name}", cwhere)
            callees = call.get("callees")
            _expect(isinstance(callees, list) and bool(callees), "call needs callees", cwhere)
            raw_calls.append((site, cwhere, callees))

        cfgs[name] = FunctionCFG(name=name, entry_block=entry_block, blocks=ids, succs=succs)

    _expect(entry in cfgs, f"entry function {entry!r} is not defined", "entry_function")

    cg: dict[str, list[str]] = {f: [] for f in cfgs}
    calls: dict[str, list[str]] = {}
    for site, cwhere, callees in raw_calls:
        for callee in callees:
            _expect(callee in cfgs, f"call to unknown function {callee!r}", cwhere)
            caller = block_function[site]
            if callee not in cg[caller]:
                cg[caller].append(callee)
            calls.setdefault(site, [])
            if callee not in calls[site]:
                calls[site].append(callee)

    return ProgramGraphs(
        entry_function=entry,
        cg=cg,
        cfgs=cfgs,
        block_locations=block_locations,
        block_function=block_function,
        calls=calls,
    )


def parse_graphs(source: bytes | str | IO[Any] | Path) -> ProgramGraphs:
    """Parse and validate a graph file.

    Raises GraphSyntaxError for malformed JSON and GraphSemanticError for
    structural problems (missing entry, unknown callee, duplicate block id).
    """
    return graphs_from_doc(load_json(source))


def parse_targets(text: str) -> list[Location]:
    """Parse a newline-delimited ``file:line`` list; ``#`` starts a comment."""
    out: list[Location] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        path, sep, num = line.rpartition(":")
        if not sep or not path or not num.strip().isdigit():
            raise TargetError(f"line {lineno}: expected file:line, got {raw.strip()!r}")
        out.append((path.strip(), int(num)))
    return out


# -- dominators --------------------------------------------------------------


def _reverse_postorder(succ: Mapping[Any, Iterable[Any]], root: Hashable) -> list[Any]:
    seen = {root}
    order: list[Any] = []
    stack = [(root, iter(succ.get(root, ())))]
    while stack:
        node, it = stack[-1]
        for nxt in it:
            if nxt not in seen:
                seen.add(nxt)
                stack.append((nxt, iter(succ.get(nxt, ()))))
                break
        else:
            stack.pop()
            order.append(node)
    order.reverse()
    return order


def compute_dominators(graph: Mapping[Any, Iterable[Any]], root: Hashable) -> DominatorTree:
    """Immediate dominators via the iterative Cooper-Harvey-Kennedy scheme.

    ``graph`` maps each node to its successors.  Nodes unreachable from
    ``root`` get no entry; ``idom[root] == root``.
    """
    if root not in graph:
        raise KeyError(f"root {root!r} not in graph")
    rpo = _reverse_postorder(graph, root)
    index = {n: i for i, n in enumerate(rpo)}
    preds: dict[Any, list[Any]] = {n: [] for n in rpo}
    for n in rpo:
        for s in graph.get(n, ()):
            if s in index:
                preds[s].append(n)

    idom: dict[Any, Any] = {root: root}

    def intersect(a: Any, b: Any) -> Any:
        while a != b:
            while index[a] > index[b]:
                a = idom[a]
            while index[b] > index[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for n in rpo[1:]:
            new = None
            for p in preds[n]:
                if p in idom:
                    new = p if new is None else intersect(p, new)
            if new is not None and idom.get(n) != new:
                idom[n] = new
                changed = True
    return DominatorTree(root=root, idom=idom)


# -- targets and sequences ---------------------------------------------------


def resolve_target(graphs: ProgramGraphs, location: Location) -> Target:
    matches = [b for b, locs in graphs.block_locations.items() if tuple(location) in locs]
    label = f"{location[0]}:{location[1]}"
    if not matches:
        raise TargetError(f"{label}: no matching block")
    if len(matches) > 1:
        raise TargetError(f"{label}: ambiguous, claimed by {', '.join(matches)}", matches)
    block = matches[0]
    return Target(location=(location[0], location[1]), resolved_block=block,
                  resolved_function=graphs.block_function[block])


def generate_target_sequence(graphs: ProgramGraphs, target: Target) -> TargetSequence:
    """Necessary blocks from the program entry to ``target``.

    The call-graph dominators of the target's function (as their entry
    blocks) come first, followed by the target block's dominators inside its
    own function.  Duplicates keep their first position.
    """
    fn = target.resolved_function
    if target.resolved_block not in graphs.block_function or graphs.block_function[target.resolved_block] != fn:
        raise TargetError(f"{target.label}: block {target.resolved_block!r} not in function {fn!r}")
    dom_cg = compute_dominators(graphs.cg, graphs.entry_function)
    if fn not in dom_cg.idom:
        raise TargetError(f"{target.label}: function {fn!r} unreachable from {graphs.entry_function!r}")
    cfg = graphs.cfgs[fn]
    dom_cfg = compute_dominators(cfg.succs, cfg.entry_block)
    if target.resolved_block not in dom_cfg.idom:
        raise TargetError(f"{target.label}: block {target.resolved_block!r} unreachable in {fn!r}")

    prefix = [graphs.cfgs[f].entry_block for f in dom_cg.dominators(fn)]
    suffix = dom_cfg.dominators(target.resolved_block)
    blocks: list[str] = []
    for b in prefix + suffix:
        if b not in blocks:
            blocks.append(b)
    return TargetSequence(target=target, blocks=blocks)


def build_sequences(graphs: ProgramGraphs, locations: Iterable[Location], epsilon: float = 0.5) -> list[TargetSequence]:
    """Resolve every location, generate its sequence and fill in priorities."""
    from .coverage import assign_priorities

    seqs = [generate_target_sequence(graphs, resolve_target(graphs, loc)) for loc in locations]
    assign_priorities(seqs, epsilon)
    return seqs


# -- sequence files ----------------------------------------------------------


def sequence_to_dict(ts: TargetSequence) -> dict[str, Any]:
    return {
        "target": ts.target.label,
        "block": ts.target.resolved_block,
        "function": ts.target.resolved_function,
        "blocks": list(ts.blocks),
        "priority": ts.priority,
    }


def sequence_from_dict(item: Mapping[str, Any], where: str = "sequence") -> TargetSequence:
    try:
        label = item["target"]
        path, _, num = str(label).rpartition(":")
        target = Target(location=(path, int(num)), resolved_block=str(item["block"]),
                        resolved_function=str(item["function"]))
        blocks = [str(b) for b in item["blocks"]]
        priority = int(item.get("priority", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphSyntaxError(f"bad sequence record: {exc}", where) from exc
    return TargetSequence(target=target, blocks=blocks, priority=priority)


def dump_sequences(sequences: Iterable[TargetSequence]) -> str:
    return "".join(json.dumps(sequence_to_dict(s), sort_keys=True) + "\n" for s in sequences)


def load_sequences(text: str) -> list[TargetSequence]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            item = json.loads(line)
        except json.JSONDecodeError as exc:
            raise GraphSyntaxError(f"invalid JSON: {exc.msg}", f"line {lineno}") from exc
        if not isinstance(item, dict):
            raise GraphSyntaxError("expected an object", f"line {lineno}")
        out.append(sequence_from_dict(item, f"line {lineno}"))
    return out
