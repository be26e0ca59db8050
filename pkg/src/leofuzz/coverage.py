"""Trace/sequence similarity and coverage bookkeeping."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .graphs import TargetSequence

Edge = tuple[str, str]


class Outcome(enum.Enum):
    DIRECTED = "directed"
    COVERAGE_ONLY = "coverage"
    NEITHER = "neither"


@dataclass(frozen=True)
class ExecutionTrace:
    """Instrumented-block trace plus the full-trace edge set."""

    blocks: tuple[str, ...]
    edge_set: frozenset[Edge]


@dataclass
class CoverageMap:
    seen_edges: set[Edge] = field(default_factory=set)

    def is_new(self, edges: Iterable[Edge]) -> bool:
        return not self.seen_edges.issuperset(edges)

    def update(self, edges: Iterable[Edge]) -> int:
        before = len(self.seen_edges)
        self.seen_edges.update(edges)
        return len(self.seen_edges) - before


@dataclass(frozen=True)
class SeedCoverage:
    per_sequence: tuple[float, ...]
    ots_index: int

    @property
    def best(self) -> float:
        return self.per_sequence[self.ots_index] if self.per_sequence else 0.0


def lcs_length(a: Sequence[object], b: Sequence[object]) -> int:
    """Length of the longest common subsequence (two-row DP)."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            if x == y:
                cur.append(prev[j] + 1)
            else:
                left = cur[j]
                up = prev[j + 1]
                cur.append(left if left > up else up)
        prev = cur
    return prev[-1]


def seq_cov(trace: ExecutionTrace | Sequence[str], ts: TargetSequence | Sequence[str]) -> float:
    blocks = trace.blocks if isinstance(trace, ExecutionTrace) else trace
    target = ts.blocks if isinstance(ts, TargetSequence) else ts
    return lcs_length(blocks, target) / len(target)


def sequence_priority(sequences: Sequence[TargetSequence | Sequence[str]], i: int, epsilon: float = 0.5) -> int:
    """Number of other sequences whose normalised LCS with sequence i is >= epsilon."""

    def blocks(s: TargetSequence | Sequence[str]) -> Sequence[str]:
        return s.blocks if isinstance(s, TargetSequence) else s

    mine = blocks(sequences[i])
    count = 0
    for j, other in enumerate(sequences):
        if j == i:
            continue
        theirs = blocks(other)
        if lcs_length(mine, theirs) / max(len(mine), len(theirs)) >= epsilon:
            count += 1
    return count


def assign_priorities(sequences: Sequence[TargetSequence], epsilon: float = 0.5) -> None:
    prios = [sequence_priority(sequences, i, epsilon) for i in range(len(sequences))]
    for seq, p in zip(sequences, prios):
        seq.priority = p


def update_gmaxcov(ts: TargetSequence, new_cov: float) -> TargetSequence:
    if new_cov > ts.g_max_cov:
        ts.g_max_cov = new_cov
    return ts


def outstanding_index(per_sequence: Sequence[float]) -> int:
    """First index attaining the maximum coverage."""
    best = 0
    for i, c in enumerate(per_sequence):
        if c > per_sequence[best]:
            best = i
    return best


def seed_coverage(blocks: Sequence[str], sequences: Sequence[TargetSequence]) -> SeedCoverage:
    covs = tuple(seq_cov(blocks, s) for s in sequences)
    return SeedCoverage(per_sequence=covs, ots_index=outstanding_index(covs))


def classify_input(
    trace: ExecutionTrace,
    sequences: Sequence[TargetSequence],
    cov: CoverageMap,
    seed_cov: SeedCoverage | None = None,
) -> tuple[Outcome, SeedCoverage]:
    """Decide where an execution belongs without mutating any state.

    Directed wins over coverage-only when both apply.  ``seed_cov`` may be
    passed in when the caller already has the per-sequence coverages cached.
    """
    if seed_cov is None:
        seed_cov = seed_coverage(trace.blocks, sequences)
    for c, s in zip(seed_cov.per_sequence, sequences):
        if c > s.g_max_cov:
            return Outcome.DIRECTED, seed_cov
    if cov.is_new(trace.edge_set):
        return Outcome.COVERAGE_ONLY, seed_cov
    return Outcome.NEITHER, seed_cov
