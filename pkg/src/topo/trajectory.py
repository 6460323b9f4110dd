"""Trajectory data model, on-policy rollout buffer, and the line-based file format.

One trajectory per line: ``<id> <return>`` followed by four tokens per step,
``<state> <action> <reward> <done>``.  Vector-valued tokens are comma-joined
numbers with no whitespace; discrete actions are bare integers; ``done`` is
``0`` or ``1``.  The same format is used for demonstration files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

import numpy as np

from .errors import DemoFormatError, UsageError

Action = Union[int, np.ndarray]

RETURN_TOLERANCE = 1e-9


@dataclass
class Transition:
    """One environment step plus the behavior policy's log-density of the action."""

    state: np.ndarray
    action: Action
    reward: float
    next_state: np.ndarray
    done: bool = False
    log_prob: float = 0.0


@dataclass
class Trajectory:
    """An ordered episode of transitions with its running undiscounted return."""

    id: int
    transitions: list[Transition] = field(default_factory=list)
    episode_return: float = 0.0

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def finished(self) -> bool:
        return bool(self.transitions) and self.transitions[-1].done

    def append(self, t: Transition) -> None:
        """Append one step and accumulate its reward into the episode return."""
        if self.finished:
            raise UsageError(
                f"trajectory {self.id} already holds a done transition; "
                "cannot append further steps"
            )
        self.transitions.append(t)
        self.episode_return += float(t.reward)

    def state_action_pairs(self) -> list[tuple[np.ndarray, Action]]:
        """All (state, action) pairs in step order."""
        return [(t.state, t.action) for t in self.transitions]

    def rewards(self) -> np.ndarray:
        return np.array([t.reward for t in self.transitions], dtype=float)

    def states(self) -> np.ndarray:
        return np.stack([t.state for t in self.transitions]).astype(float)


@dataclass
class RolloutBuffer:
    """Insertion-ordered episode store for one update cycle."""

    capacity: int
    trajectories: list[Trajectory] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise UsageError("rollout buffer capacity must be positive")

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    @property
    def full(self) -> bool:
        return len(self.trajectories) >= self.capacity

    def insert(self, traj: Trajectory) -> None:
        if self.full:
            raise UsageError(
                f"rollout buffer is at capacity ({self.capacity}); "
                "run a policy update and clear it before inserting more episodes"
            )
        if any(t.id == traj.id for t in self.trajectories):
            raise UsageError(f"duplicate trajectory id {traj.id} in rollout buffer")
        self.trajectories.append(traj)

    def clear(self) -> None:
        self.trajectories.clear()

    def total_steps(self) -> int:
        return sum(len(t) for t in self.trajectories)


def _format_vector(values: Iterable[float]) -> str:
    return ",".join(repr(float(v)) for v in values)


def _format_action(action: Action) -> str:
    if isinstance(action, (int, np.integer)):
        return repr(int(action))
    return _format_vector(np.asarray(action, dtype=float).ravel())


def _parse_vector(token: str) -> np.ndarray:
    return np.array([float(v) for v in token.split(",")], dtype=float)


def _parse_action(token: str) -> Action:
    if "," not in token and "." not in token and "e" not in token and "E" not in token:
        return int(token)
    return _parse_vector(token)


def format_trajectory(traj: Trajectory) -> str:
    """Render one trajectory as a single line of the file format."""
    parts = [repr(int(traj.id)), repr(float(traj.episode_return))]
    for t in traj.transitions:
        parts.append(_format_vector(np.asarray(t.state, dtype=float).ravel()))
        parts.append(_format_action(t.action))
        parts.append(repr(float(t.reward)))
        parts.append("1" if t.done else "0")
    return " ".join(parts)


def parse_trajectory(line: str, lineno: int = 0) -> Trajectory:
    """Parse one line of the file format back into a trajectory.

    The wire format carries (state, action, reward, done) per step;
    next states are rebuilt from the following step's state (the final
    next state repeats the final state) and log-probs reset to zero.
    """

    def fail(msg: str) -> DemoFormatError:
        return DemoFormatError(f"line {lineno}: {msg}")

    tokens = line.split()
    if len(tokens) < 6:
        raise fail("expected id, return, and at least one transition")
    if (len(tokens) - 2) % 4 != 0:
        raise fail("transition fields are not groups of state/action/reward/done")
    try:
        traj_id = int(tokens[0])
        episode_return = float(tokens[1])
    except ValueError as exc:
        raise fail(f"bad id/return header: {exc}") from None

    steps = []
    for k in range(2, len(tokens), 4):
        s_tok, a_tok, r_tok, d_tok = tokens[k : k + 4]
        try:
            state = _parse_vector(s_tok)
            action = _parse_action(a_tok)
            reward = float(r_tok)
        except ValueError as exc:
            raise fail(f"bad transition field: {exc}") from None
        if d_tok not in ("0", "1"):
            raise fail(f"done flag must be 0 or 1, got {d_tok!r}")
        steps.append((state, action, reward, d_tok == "1"))

    for state, _, _, _ in steps:
        if state.shape != steps[0][0].shape:
            raise fail("inconsistent state dimensions within trajectory")
    for i, (_, _, _, done) in enumerate(steps):
        if done and i != len(steps) - 1:
            raise fail("done flag set before the final transition")

    total = sum(r for _, _, r, _ in steps)
    if abs(total - episode_return) > RETURN_TOLERANCE:
        raise fail(
            f"stored return {episode_return!r} does not match reward sum {total!r}"
        )

    traj = Trajectory(id=traj_id)
    for i, (state, action, reward, done) in enumerate(steps):
        next_state = steps[i + 1][0] if i + 1 < len(steps) else state
        traj.append(Transition(state, action, reward, next_state, done))
    # keep the stored header value so save(load(path)) is byte-identical
    traj.episode_return = episode_return
    return traj


def save_trajectories(trajectories: Iterable[Trajectory], path: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for traj in trajectories:
            fh.write(format_trajectory(traj))
            fh.write("\n")


def load_trajectories(path: str) -> list[Trajectory]:
    out = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            out.append(parse_trajectory(line, lineno))
    return out
