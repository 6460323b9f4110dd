"""Environment interface descriptors."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class DiscreteActions:
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("discrete action space needs at least one action")


@dataclass(frozen=True)
class BoxActions:
    dim: int
    low: float
    high: float

    def __post_init__(self) -> None:
        if self.dim < 1 or not self.low < self.high:
            raise ConfigError("continuous action space needs dim >= 1 and low < high")


@dataclass(frozen=True)
class EnvSpec:
    observation_dim: int
    actions: DiscreteActions | BoxActions
    max_steps: int
    reward_range: tuple[float, float]

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if self.reward_range[0] > self.reward_range[1]:
            raise ConfigError("reward range minimum exceeds maximum")
