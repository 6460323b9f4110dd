import numpy as np
import pytest

from topo.trajectory import Trajectory, Transition

# start bottom-left, key to its east, door the sole passage to the treasure room
TEST_MAP_5X5 = """\
#####
#..T#
##D##
#S.K#
#####
"""


def make_traj(rewards, traj_id=0, state_dim=2, actions=None, done_last=True, rng=None):
    """Build a trajectory with the given rewards and synthetic states."""
    rng = rng or np.random.default_rng(0)
    traj = Trajectory(id=traj_id)
    n = len(rewards)
    states = [rng.normal(size=state_dim) for _ in range(n + 1)]
    for i, r in enumerate(rewards):
        action = actions[i] if actions is not None else int(rng.integers(0, 4))
        done = done_last and i == n - 1
        traj.append(
            Transition(
                state=states[i],
                action=action,
                reward=float(r),
                next_state=states[i + 1],
                done=done,
                log_prob=float(rng.normal()),
            )
        )
    return traj


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
