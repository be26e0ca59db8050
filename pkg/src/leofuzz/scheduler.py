"""Seed energy: comprehensive factor, annealing temperature, capability.

Also hosts the two comparison schedules: an AFLGo-style harmonic distance
signal and a single sequence-coverage signal.  All three feed the same
capability/energy mapping so that only the ranking signal differs.
"""

from __future__ import annotations

import math
import random
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .coverage import SeedCoverage
from .graphs import TargetSequence

T_K = 0.05


@dataclass(frozen=True)
class SchedulerConfig:
    beta: float = 0.8
    epsilon: float = 0.5
    t_x: float = 30.0
    alpha: float = 0.95
    t_k: float = T_K
    base_energy: int = 16

    def __post_init__(self) -> None:
        for name in ("beta", "epsilon", "t_k"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.8 <= self.alpha <= 0.99:
            raise ValueError(f"alpha must lie in [0.8, 0.99], got {self.alpha}")
        if self.t_x <= 0:
            raise ValueError("t_x must be positive")
        if self.base_energy < 1:
            raise ValueError("base_energy must be >= 1")


@dataclass(frozen=True)
class EnergyDecision:
    cf: float
    temperature: float
    cap: float
    menergy: int


def comprehensive_factor(
    seq_cov: float,
    priority: int,
    g_max_cov: float,
    all_gmax: Iterable[float],
    n: int,
    beta: float,
) -> float:
    """Blend of sequence coverage, priority and (once enough sequences are
    well covered) the difficulty of the outstanding sequence."""
    covered = sum(1 for g in all_gmax if g >= beta)
    if 2 * covered < n:
        return 0.5 * (seq_cov + priority / n)
    return (seq_cov + priority / n + (1.0 - g_max_cov)) / 3.0


def temperature(t: float, t_x: float) -> float:
    """Exponential cooling from 1 at t=0 to T_K=0.05 at t=t_x."""
    return 20.0 ** (-t / t_x)


def temperature_cycle(t: float, t_x: float, alpha: float) -> float:
    """Cooling cycle k reached at time t; alpha**k equals temperature(t, t_x)."""
    return (t / t_x) * math.log(T_K) / math.log(alpha)


def capability(cf: float, temp: float) -> float:
    return cf * (1.0 - temp) + 0.5 * temp


def menergy(base: int, cap: float) -> int:
    return max(1, math.floor(base * 2.0 ** ((cap - 0.2) * 10.0) + 0.5))


def decide(cf: float, elapsed: float, config: SchedulerConfig) -> EnergyDecision:
    temp = temperature(elapsed, config.t_x)
    cap = capability(cf, temp)
    return EnergyDecision(cf=cf, temperature=temp, cap=cap, menergy=menergy(config.base_energy, cap))


def mes_factor(seed_cov: SeedCoverage, sequences: Sequence[TargetSequence], beta: float) -> float:
    i = seed_cov.ots_index
    ots = sequences[i]
    return comprehensive_factor(
        seed_cov.per_sequence[i],
        ots.priority,
        ots.g_max_cov,
        (s.g_max_cov for s in sequences),
        len(sequences),
        beta,
    )


def assign_energy(
    seed_cov: SeedCoverage,
    sequences: Sequence[TargetSequence],
    elapsed: float,
    config: SchedulerConfig,
) -> EnergyDecision:
    if not sequences:
        raise ValueError("assign_energy needs at least one target sequence")
    return decide(mes_factor(seed_cov, sequences, config.beta), elapsed, config)


def accept_schedule(cap: float, best_cap: float, temp: float, t_k: float, rng: random.Random) -> bool:
    """Annealing acceptance for a selected seed.

    Seeds at the best capability are always fuzzed.  Worse seeds are still
    accepted with probability ``temp`` while the system is hot, and never
    once it has cooled to ``t_k``.
    """
    if cap >= best_cap - 1e-12:
        return True
    if temp <= t_k:
        return False
    return rng.random() < temp


# -- AFLGo-style harmonic distance ---------------------------------------------


class NoDistance(ValueError):
    pass


def shortest_distances(succ: Mapping[str, Iterable[str]], target: str) -> dict[str, int]:
    """Hop distance from every node that can reach ``target``."""
    preds: dict[str, list[str]] = {}
    for a, bs in succ.items():
        for b in bs:
            preds.setdefault(b, []).append(a)
    dist = {target: 0}
    queue = deque([target])
    while queue:
        n = queue.popleft()
        for p in preds.get(n, ()):
            if p not in dist:
                dist[p] = dist[n] + 1
                queue.append(p)
    return dist


def harmonic_node_distances(succ: Mapping[str, Iterable[str]], targets: Sequence[str]) -> dict[str, float]:
    """Per-node harmonic mean of shortest distances to the reachable targets.

    Targets themselves get 0; nodes reaching no target are left out.
    """
    per_target = [shortest_distances(succ, t) for t in targets]
    out: dict[str, float] = {}
    for node in succ:
        ds = [d[node] for d in per_target if node in d]
        if not ds:
            continue
        if 0 in ds:
            out[node] = 0.0
        else:
            out[node] = len(ds) / sum(1.0 / d for d in ds)
    return out


def harmonic_seed_distance(trace: Sequence[str], node_distances: Mapping[str, float]) -> float:
    """Mean node distance along a trace (lower is closer to the targets).

    Target nodes (distance 0) are left out of the mean; a trace made only
    of target nodes has distance 0.
    """
    defined = [node_distances[b] for b in trace if b in node_distances]
    if not defined:
        raise NoDistance("trace has no node with a defined distance")
    positive = [d for d in defined if d > 0]
    if not positive:
        return 0.0
    return sum(positive) / len(positive)


def distance_factor(distance: float | None, lo: float, hi: float) -> float:
    """1 - normalised distance, so that closer seeds score higher."""
    if distance is None:
        return 0.0
    if hi <= lo:
        return 1.0
    return 1.0 - (distance - lo) / (hi - lo)
