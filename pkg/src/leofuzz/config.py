"""Campaign configuration and the key=value config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .scheduler import SchedulerConfig
from .stagecoord import StageState

STRATEGIES = ("mes", "aflgo_distance", "seqcov_single")
STRATEGY_ALIASES = {"aflgo": "aflgo_distance", "seqcov": "seqcov_single"}


class ConfigError(ValueError):
    pass


@dataclass
class CampaignConfig:
    strategy: str = "mes"
    # energy
    beta: float = 0.8
    epsilon: float = 0.5
    alpha: float = 0.95
    t_k: float = 0.05
    base_energy: int = 16
    tx_frac: float = 0.5
    tx_seconds: float | None = None
    # stage coordination
    rate_init: float = 0.8
    gamma: float = 0.1
    delta: float = 0.5
    th_min: float = 100.0
    dsc_init: int = 10
    # budgets and clock
    budget: float = 60.0
    exec_budget: int | None = None
    deterministic: bool = False
    exec_seconds: float = 1e-3
    stop_on_all_targets: bool = True
    # concolic worker
    concolic: bool = True
    concolic_every: int = 4
    concolic_max_solutions: int = 4
    # mutation
    max_input_len: int = 1024
    # logging
    milestone_every: int = 10000
    record_selections: bool = False
    rng_seed: int = 0

    def __post_init__(self) -> None:
        self.strategy = STRATEGY_ALIASES.get(self.strategy, self.strategy)
        self.validate()

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}")
        for name in ("beta", "epsilon", "t_k", "tx_frac", "rate_init", "delta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if not 0.8 <= self.alpha <= 0.99:
            raise ConfigError(f"alpha must lie in [0.8, 0.99], got {self.alpha}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.base_energy < 1:
            raise ConfigError("base_energy must be >= 1")
        if self.budget < 0:
            raise ConfigError("budget must be >= 0")
        if self.exec_budget is not None and self.exec_budget < 0:
            raise ConfigError("exec_budget must be >= 0")
        if self.tx_seconds is not None and self.tx_seconds <= 0:
            raise ConfigError("tx_seconds must be positive")
        if self.exec_seconds <= 0:
            raise ConfigError("exec_seconds must be positive")
        if self.concolic_every < 1 or self.concolic_max_solutions < 1:
            raise ConfigError("concolic_every and concolic_max_solutions must be >= 1")
        if self.max_input_len < 1:
            raise ConfigError("max_input_len must be >= 1")

    @property
    def effective_budget(self) -> float:
        """Time budget in campaign-clock seconds.

        In deterministic mode the clock advances by ``exec_seconds`` per
        execution, so an execution budget bounds the clock as well.
        """
        if self.deterministic and self.exec_budget is not None:
            return min(self.budget, self.exec_budget * self.exec_seconds)
        return self.budget

    @property
    def t_x(self) -> float:
        if self.tx_seconds is not None:
            return self.tx_seconds
        return max(self.tx_frac * self.effective_budget, 1e-9)

    def scheduler(self) -> SchedulerConfig:
        return SchedulerConfig(
            beta=self.beta,
            epsilon=self.epsilon,
            t_x=self.t_x,
            alpha=self.alpha,
            t_k=self.t_k,
            base_energy=self.base_energy,
        )

    def stage_state(self) -> StageState:
        return StageState(
            dsc=self.dsc_init,
            rate=self.rate_init,
            gamma=self.gamma,
            delta=self.delta,
            th_min=self.th_min,
        )

    def replace(self, **changes: Any) -> CampaignConfig:
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(CampaignConfig)}


def _coerce(name: str, raw: str) -> Any:
    default = getattr(CampaignConfig(), name)
    text = raw.strip()
    if name in ("exec_budget", "tx_seconds") and text.lower() in ("", "none"):
        return None
    if name == "exec_budget":
        return int(float(text))
    if name == "tx_seconds":
        return float(text)
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        if name == "budget":
            return parse_duration(text)
        return float(text)
    return text


def parse_duration(text: str) -> float:
    """``90``, ``90s``, ``5m`` or ``1h`` to seconds."""
    text = text.strip().lower()
    scale = {"s": 1.0, "m": 60.0, "h": 3600.0}
    try:
        if text and text[-1] in scale:
            return float(text[:-1]) * scale[text[-1]]
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad duration {text!r}") from exc


def parse_config_text(text: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value")
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return out


def load_config(path: str | Path | None = None, **overrides: Any) -> CampaignConfig:
    values: dict[str, Any] = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return CampaignConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
