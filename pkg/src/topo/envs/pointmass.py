"""Sparse point-mass locomotion task.

A 2-D double integrator: the action is a bounded acceleration, velocity is
damped each step, and forward velocity is only rewarded once the mass has
advanced past a threshold distance along x.  Every step also costs a small
energy penalty proportional to the squared action, so doing nothing is a
local optimum until the threshold is crossed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..trajectory import Trajectory
from .spec import BoxActions, EnvSpec


@dataclass(frozen=True)
class PointMassConfig:
    threshold: float = 1.0
    max_steps: int = 200
    step_size: float = 0.05
    damping: float = 0.99
    energy_cost: float = 0.001
    arena_halfwidth: float = 20.0
    reset_noise: float = 0.01

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if self.step_size <= 0 or not 0 <= self.damping <= 1:
            raise ConfigError("step_size must be positive and damping in [0, 1]")
        if self.arena_halfwidth <= self.threshold:
            raise ConfigError("arena must extend beyond the reward threshold")


class SparsePointMass:
    """Observation is [pos_x, pos_y, vel_x, vel_y]; actions lie in [-1, 1]^2."""

    def __init__(self, cfg: PointMassConfig = PointMassConfig(), seed: int | None = None):
        self.cfg = cfg
        # terminal speed under full throttle bounds the per-step reward
        v_max = cfg.step_size / (1.0 - cfg.damping) if cfg.damping < 1 else np.inf
        self.spec = EnvSpec(
            observation_dim=4,
            actions=BoxActions(dim=2, low=-1.0, high=1.0),
            max_steps=cfg.max_steps,
            reward_range=(-2.0 * cfg.energy_cost, v_max),
        )
        self.obs_scale = (10.0, 10.0, 5.0, 5.0)
        self._rng = np.random.default_rng(seed)
        self.reset()

    def _observation(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel])

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        noise = self.cfg.reset_noise
        self.pos = self._rng.uniform(-noise, noise, size=2)
        self.vel = np.zeros(2)
        self.steps = 0
        return self._observation()

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, bool]:
        a = np.clip(np.asarray(action, dtype=float).ravel()[:2], -1.0, 1.0)
        self.vel = self.cfg.damping * self.vel + self.cfg.step_size * a
        self.pos = self.pos + self.cfg.step_size * self.vel
        self.pos = np.clip(self.pos, -self.cfg.arena_halfwidth, self.cfg.arena_halfwidth)

        forward = self.vel[0] if self.pos[0] >= self.cfg.threshold else 0.0
        reward = float(forward - self.cfg.energy_cost * np.sum(a * a))
        self.steps += 1
        done = self.steps >= self.cfg.max_steps
        return self._observation(), reward, done

    def episode_success(self, traj: Trajectory) -> bool:
        return any(t.next_state[0] >= self.cfg.threshold for t in traj.transitions)
