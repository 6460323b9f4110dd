"""Key-door-treasure gridworld with a single sparse terminal reward.

Map files are one row of characters per line: ``#`` wall, ``.`` floor,
``S`` start, ``K`` key, ``D`` door, ``T`` treasure.  The agent starts in the
bottom-left room, must pick up the key, open the door with it, and reach the
treasure in the upper-right room.  Only the treasure pays out (reward 200);
the episode ends there or at the step cap.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..errors import ConfigError, UsageError
from ..trajectory import Trajectory
from .spec import DiscreteActions, EnvSpec

TREASURE_REWARD = 200.0

# action index -> (dx, dy); rows grow downward, so south is +y
ACTION_DELTAS = ((0, 1), (0, -1), (1, 0), (-1, 0))
ACTION_NAMES = ("south", "north", "east", "west")


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    walls: np.ndarray  # bool, shape (height, width), indexed [y, x]
    start: tuple[int, int]
    key: tuple[int, int]
    door: tuple[int, int]
    treasure: tuple[int, int]


def parse_map(text: str) -> GridMap:
    """Parse and validate a map. Raises ConfigError on structural problems."""
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ConfigError("map file is empty")
    width = len(rows[0])
    height = len(rows)
    if any(len(r) != width for r in rows):
        raise ConfigError("map rows have unequal lengths")

    walls = np.zeros((height, width), dtype=bool)
    markers: dict[str, tuple[int, int]] = {}
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "#":
                walls[y, x] = True
            elif ch in "SKDT":
                if ch in markers:
                    raise ConfigError(f"duplicate {ch!r} marker in map")
                markers[ch] = (x, y)
            elif ch != ".":
                raise ConfigError(f"unknown map character {ch!r} at ({x}, {y})")
    missing = set("SKDT") - set(markers)
    if missing:
        raise ConfigError(f"map is missing markers: {sorted(missing)}")

    border = (
        walls[0, :].all() and walls[-1, :].all()
        and walls[:, 0].all() and walls[:, -1].all()
    )
    if not border:
        raise ConfigError("map border must be solid wall")

    gmap = GridMap(
        width=width,
        height=height,
        walls=walls,
        start=markers["S"],
        key=markers["K"],
        door=markers["D"],
        treasure=markers["T"],
    )
    _validate(gmap)
    return gmap


def _validate(gmap: GridMap) -> None:
    sx, sy = gmap.start
    tx, ty = gmap.treasure
    if not (sx < gmap.width / 2 and sy > gmap.height / 2):
        raise ConfigError("start must lie in the bottom-left quadrant")
    if not (tx > gmap.width / 2 and ty < gmap.height / 2):
        raise ConfigError("treasure must lie in the upper-right quadrant")
    no_door = distance_field(gmap, gmap.start, door_passable=False)
    if no_door[gmap.key[1], gmap.key[0]] < 0:
        raise ConfigError("key is not reachable from the start without the door")
    if no_door[ty, tx] >= 0:
        raise ConfigError("treasure is reachable without passing the door")
    with_door = distance_field(gmap, gmap.start, door_passable=True)
    if with_door[ty, tx] < 0:
        raise ConfigError("treasure is not reachable even through the door")


def distance_field(
    gmap: GridMap, target: tuple[int, int], door_passable: bool
) -> np.ndarray:
    """Breadth-first shortest step counts to ``target``; -1 where unreachable."""
    dist = np.full((gmap.height, gmap.width), -1, dtype=int)
    tx, ty = target
    if gmap.walls[ty, tx]:
        return dist
    if not door_passable and (tx, ty) == gmap.door:
        return dist
    dist[ty, tx] = 0
    queue = deque([(tx, ty)])
    while queue:
        x, y = queue.popleft()
        for dx, dy in ACTION_DELTAS:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < gmap.width and 0 <= ny < gmap.height):
                continue
            if gmap.walls[ny, nx] or dist[ny, nx] >= 0:
                continue
            if not door_passable and (nx, ny) == gmap.door:
                continue
            dist[ny, nx] = dist[y, x] + 1
            queue.append((nx, ny))
    return dist


def load_map(name: str) -> GridMap:
    """Load a bundled map by name (``kdt``, ``kdt_small``) or a file path."""
    bundled = resources.files("topo.envs").joinpath(f"maps/{name}.txt")
    if bundled.is_file():
        return parse_map(bundled.read_text(encoding="ascii"))
    try:
        with open(name, "r", encoding="ascii") as fh:
            return parse_map(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot load map {name!r}: {exc}") from None


class KeyDoorTreasure:
    """Deterministic four-action gridworld; observation is [x, y, has_key, door_open]."""

    def __init__(self, gmap: GridMap, max_steps: int = 400):
        if max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        self.gmap = gmap
        self.max_steps = max_steps
        self.spec = EnvSpec(
            observation_dim=4,
            actions=DiscreteActions(len(ACTION_DELTAS)),
            max_steps=max_steps,
            reward_range=(0.0, TREASURE_REWARD),
        )
        # coordinates feed both the kernel features (raw) and the policy net
        # (divided by this scale)
        self.obs_scale = (
            float(gmap.width - 1),
            float(gmap.height - 1),
            1.0,
            1.0,
        )
        self.reset()

    def _observation(self) -> np.ndarray:
        return np.array(
            [
                float(self.pos[0]),
                float(self.pos[1]),
                1.0 if self.has_key else 0.0,
                1.0 if self.door_open else 0.0,
            ]
        )

    def reset(self, seed: int | None = None) -> np.ndarray:
        # the start is fixed; the seed argument exists for interface parity
        del seed
        self.pos = self.gmap.start
        self.has_key = False
        self.door_open = False
        self.steps = 0
        return self._observation()

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if not isinstance(action, (int, np.integer)) or not 0 <= action < 4:
            raise UsageError(f"gridworld action must be in 0..3, got {action!r}")
        dx, dy = ACTION_DELTAS[action]
        nx, ny = self.pos[0] + dx, self.pos[1] + dy
        blocked = (
            not (0 <= nx < self.gmap.width and 0 <= ny < self.gmap.height)
            or bool(self.gmap.walls[ny, nx])
        )
        if not blocked and (nx, ny) == self.gmap.door and not self.door_open:
            if self.has_key:
                self.door_open = True
            else:
                blocked = True
        if not blocked:
            self.pos = (nx, ny)
        if self.pos == self.gmap.key:
            self.has_key = True

        self.steps += 1
        reward = 0.0
        done = False
        if self.pos == self.gmap.treasure:
            reward = TREASURE_REWARD
            done = True
        if self.steps >= self.max_steps:
            done = True
        return self._observation(), reward, done

    @staticmethod
    def episode_success(traj: Trajectory) -> bool:
        return any(t.reward > 0 for t in traj.transitions)
