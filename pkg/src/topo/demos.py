"""Offline demonstration buffer with return-based replacement, file I/O,
and scripted experts that generate demonstrations."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .envs.gridworld import GridMap, KeyDoorTreasure, distance_field
from .envs.pointmass import PointMassConfig, SparsePointMass
from .errors import DemoFormatError, GenerationError
from .trajectory import Trajectory, Transition, load_trajectories, save_trajectories


@dataclass
class DemoBuffer:
    """Fixed-size set of demonstration trajectories, replaceable by return."""

    demos: list[Trajectory]
    capacity: int
    replacement_enabled: bool = True

    def __post_init__(self) -> None:
        if not self.demos:
            raise DemoFormatError("demonstration buffer must start non-empty")
        if self.capacity < len(self.demos):
            raise DemoFormatError("demo buffer capacity below its initial size")
        ids = [d.id for d in self.demos]
        if len(set(ids)) != len(ids):
            raise DemoFormatError(f"duplicate demonstration ids: {sorted(ids)}")

    def __len__(self) -> int:
        return len(self.demos)

    def min_return(self) -> float:
        return min(d.episode_return for d in self.demos)

    def snapshot(self) -> "DemoBuffer":
        """Read-only copy for distance computations within one update cycle."""
        return DemoBuffer(
            demos=list(self.demos),
            capacity=self.capacity,
            replacement_enabled=False,
        )

    def maybe_replace(self, candidate: Trajectory) -> bool:
        """Swap out the worst demo when the candidate strictly beats it.

        Ties never replace.  The inserted trajectory is copied under a fresh
        id so buffer ids stay distinct from rollout episode ids.  No-op when
        replacement is disabled.
        """
        if not self.replacement_enabled:
            return False
        worst = min(self.demos, key=lambda d: (d.episode_return, d.id))
        if not candidate.episode_return > worst.episode_return:
            return False
        new_id = max(d.id for d in self.demos) + 1
        clone = Trajectory(
            id=new_id,
            transitions=list(candidate.transitions),
            episode_return=candidate.episode_return,
        )
        self.demos.remove(worst)
        self.demos.append(clone)
        return True


_load_cache: dict[str, tuple[float, int, list[Trajectory]]] = {}


def load_demos(path: str) -> DemoBuffer:
    """Load a demo file (trajectory line format).  Parsed files are cached."""
    key = os.path.abspath(path)
    try:
        stat = os.stat(key)
    except OSError as exc:
        raise DemoFormatError(f"cannot read demo file {path!r}: {exc}") from None
    cached = _load_cache.get(key)
    if cached is not None and cached[0] == stat.st_mtime and cached[1] == stat.st_size:
        parsed = cached[2]
    else:
        parsed = load_trajectories(path)
        _load_cache[key] = (stat.st_mtime, stat.st_size, parsed)
    if not parsed:
        raise DemoFormatError(f"demo file {path!r} contains no trajectories")
    return DemoBuffer(demos=list(parsed), capacity=len(parsed))


def save_demos(buf: DemoBuffer, path: str) -> None:
    save_trajectories(buf.demos, path)


def _greedy_grid_action(env: KeyDoorTreasure, dist: np.ndarray) -> int:
    """Pick the move that most reduces the BFS distance; stay-put moves rank last."""
    best_action = 0
    best_value = None
    for action, (dx, dy) in enumerate(
        ((0, 1), (0, -1), (1, 0), (-1, 0))
    ):
        nx, ny = env.pos[0] + dx, env.pos[1] + dy
        blocked = (
            not (0 <= nx < env.gmap.width and 0 <= ny < env.gmap.height)
            or bool(env.gmap.walls[ny, nx])
            or ((nx, ny) == env.gmap.door and not env.door_open and not env.has_key)
        )
        if blocked:
            nx, ny = env.pos
        value = dist[ny, nx]
        if value < 0:
            continue
        if best_value is None or value < best_value:
            best_value = value
            best_action = action
    return best_action


def scripted_expert_gridworld(
    gmap: GridMap,
    max_steps: int = 400,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
    traj_id: int = 0,
) -> Trajectory:
    """Demonstration from BFS shortest paths: start to key, then key to treasure.

    With ``noise`` > 0 each step is replaced by a uniformly random action with
    that probability; the expert re-plans greedily from wherever it lands.
    """
    env = KeyDoorTreasure(gmap, max_steps=max_steps)
    to_key = distance_field(gmap, gmap.key, door_passable=False)
    to_treasure = distance_field(gmap, gmap.treasure, door_passable=True)
    if to_key[gmap.start[1], gmap.start[0]] < 0 or to_treasure[gmap.key[1], gmap.key[0]] < 0:
        raise GenerationError("map does not admit a start -> key -> treasure route")
    if noise > 0 and rng is None:
        rng = np.random.default_rng(0)

    traj = Trajectory(id=traj_id)
    obs = env.reset()
    for _ in range(max_steps):
        dist = to_treasure if env.has_key else to_key
        action = _greedy_grid_action(env, dist)
        if noise > 0 and rng.random() < noise:
            action = int(rng.integers(0, 4))
        next_obs, reward, done = env.step(action)
        traj.append(Transition(obs, action, reward, next_obs, done))
        obs = next_obs
        if done:
            break
    return traj


def scripted_expert_pointmass(
    cfg: PointMassConfig,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
    traj_id: int = 0,
    seed: int = 0,
) -> Trajectory:
    """Demonstration from a PD controller driving the mass past the threshold."""
    env = SparsePointMass(cfg, seed=seed)
    target = np.array([cfg.threshold + 2.0, 0.0])
    kp, kd = 1.0, 1.0
    if noise > 0 and rng is None:
        rng = np.random.default_rng(0)

    traj = Trajectory(id=traj_id)
    obs = env.reset()
    for _ in range(cfg.max_steps):
        pos, vel = obs[:2], obs[2:]
        action = np.clip(kp * (target - pos) - kd * vel, -1.0, 1.0)
        if noise > 0 and rng.random() < noise:
            action = rng.uniform(-1.0, 1.0, size=2)
        next_obs, reward, done = env.step(action)
        traj.append(Transition(obs, action, reward, next_obs, done))
        obs = next_obs
        if done:
            break
    if traj.transitions[-1].next_state[0] < cfg.threshold:
        raise GenerationError(
            "point-mass controller failed to cross the reward threshold "
            f"within {cfg.max_steps} steps"
        )
    return traj


def generate_demos(
    env_name: str, count: int, noise: float = 0.0, seed: int = 0
) -> list[Trajectory]:
    """Scripted demonstrations for a named environment, ids 0..count-1."""
    from .envs import make_env  # local import to avoid a cycle

    if count < 1:
        raise DemoFormatError("demo count must be at least 1")
    rng = np.random.default_rng(seed)
    demos = []
    for i in range(count):
        env = make_env(env_name, seed=seed + i)
        if isinstance(env, KeyDoorTreasure):
            demos.append(
                scripted_expert_gridworld(
                    env.gmap, env.max_steps, noise=noise, rng=rng, traj_id=i
                )
            )
        else:
            demos.append(
                scripted_expert_pointmass(
                    env.cfg, noise=noise, rng=rng, traj_id=i, seed=seed + i
                )
            )
    return demos
