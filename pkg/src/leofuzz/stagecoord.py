"""Exploration/exploitation stage coordination.

The fuzzer explores (fuzzes coverage seeds) until coverage seeds make up
more than ``rate`` of all produced seeds, then exploits (fuzzes directed
seeds) until it has gone ``th`` consecutive executions without a new
directed seed.  Each exploitation stage ends by retuning ``rate`` from how
productive the stage was.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .coverage import Outcome

EXPLORATION = 0
EXPLOITATION = 1


@dataclass
class StageState:
    sof: int = EXPLORATION
    dsc: int = 10  # bootstrap: keeps the first exploration stage from ending at once
    csc: int = 0
    ndc: int = 0
    cdsc: int = 0
    epoch: int = 0
    lndc: int = 0
    slndc: int = 0
    rate: float = 0.8
    stage_started_at: float = 0.0
    gamma: float = 0.1
    delta: float = 0.5
    th_min: float = 100.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate must lie in [0, 1], got {self.rate}")

    def coverage_ratio(self) -> float:
        total = self.csc + self.dsc
        return self.csc / total if total else 0.0

    def threshold(self) -> float:
        return max(self.th_min, 0.5 * (self.slndc + self.lndc) * math.sqrt(self.epoch))


def update_rate(state: StageState, now: float) -> float:
    """New rate from the productivity of the exploitation stage ending at ``now``.

    Stage length is taken in whole seconds, at least one.
    """
    t = max(1, math.floor(now - state.stage_started_at))
    drive = math.tanh(state.cdsc / math.sqrt(t) * math.sqrt(state.epoch))
    rate = state.rate - state.gamma * (drive - state.delta)
    return min(1.0, max(0.0, rate))


def stage_coord(state: StageState, now: float) -> StageState:
    """Advance the stage machine once; mutates and returns ``state``."""
    if state.sof == EXPLORATION:
        if state.coverage_ratio() > state.rate:
            state.sof = EXPLOITATION
            state.ndc = 0
            state.cdsc = 0
            state.epoch += 1
            state.stage_started_at = now
    elif state.ndc >= state.threshold():
        state.slndc = state.lndc
        state.lndc = state.ndc
        state.rate = update_rate(state, now)
        state.sof = EXPLORATION
        state.stage_started_at = now
    return state


def record_execution_outcome(state: StageState, outcome: Outcome) -> StageState:
    if outcome is Outcome.DIRECTED:
        state.dsc += 1
        state.cdsc += 1
        state.ndc = 0
    elif outcome is Outcome.COVERAGE_ONLY:
        state.csc += 1
        state.ndc += 1
    else:
        state.ndc += 1
    return state
