import numpy as np
import pytest
from hypothesis import given, strategies as st

from topo.errors import DemoFormatError, UsageError
from topo.trajectory import (
    RolloutBuffer,
    Trajectory,
    Transition,
    format_trajectory,
    load_trajectories,
    parse_trajectory,
    save_trajectories,
)

from conftest import make_traj


def _step(reward, done=False, action=1):
    return Transition(
        state=np.array([0.0, 0.0]),
        action=action,
        reward=reward,
        next_state=np.array([1.0, 0.0]),
        done=done,
    )


class TestAppend:
    def test_single_sparse_payout(self):
        traj = Trajectory(id=0)
        traj.append(_step(200.0, done=True))
        assert traj.episode_return == 200.0

    def test_zero_reward(self):
        traj = Trajectory(id=0)
        traj.append(_step(0.0))
        assert traj.episode_return == 0.0

    def test_accumulates(self):
        traj = make_traj([2.0, 3.0], done_last=False)
        traj.append(_step(-1.5))
        assert traj.episode_return == pytest.approx(3.5, abs=1e-12)

    def test_append_after_done_raises(self):
        traj = Trajectory(id=0)
        traj.append(_step(1.0, done=True))
        with pytest.raises(UsageError):
            traj.append(_step(0.0))


class TestRolloutBuffer:
    def test_insert_and_order(self):
        buf = RolloutBuffer(capacity=2)
        t1, t2 = make_traj([1.0], traj_id=1), make_traj([2.0], traj_id=2)
        buf.insert(t1)
        assert list(buf) == [t1]
        buf.insert(t2)
        assert list(buf) == [t1, t2]

    def test_capacity_exceeded(self):
        buf = RolloutBuffer(capacity=1)
        buf.insert(make_traj([0.0], traj_id=1))
        with pytest.raises(UsageError, match="capacity"):
            buf.insert(make_traj([0.0], traj_id=2))

    def test_duplicate_id_rejected(self):
        buf = RolloutBuffer(capacity=3)
        buf.insert(make_traj([0.0], traj_id=7))
        with pytest.raises(UsageError, match="duplicate"):
            buf.insert(make_traj([1.0], traj_id=7))

    def test_iteration_order_is_reproducible(self):
        ids = [5, 3, 9, 1]
        orders = []
        for _ in range(2):
            buf = RolloutBuffer(capacity=4)
            for i in ids:
                buf.insert(make_traj([float(i)], traj_id=i))
            orders.append([t.id for t in buf])
        assert orders[0] == orders[1] == ids


class TestStateActionPairs:
    def test_lengths(self):
        assert len(make_traj([0.0] * 3).state_action_pairs()) == 3
        assert len(make_traj([1.0]).state_action_pairs()) == 1

    def test_order_matches_transitions(self):
        # enumeration oracle: build 5 steps by hand, expect exactly that sequence
        traj = Trajectory(id=0)
        expected = []
        for i in range(5):
            s = np.array([float(i), float(-i)])
            traj.append(Transition(s, i % 4, 0.0, s + 1.0, done=(i == 4)))
            expected.append((i, i % 4))
        pairs = traj.state_action_pairs()
        for (state, action), (i, exp_action) in zip(pairs, expected):
            assert state[0] == float(i)
            assert action == exp_action


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30))
def test_return_equals_reward_sum(rewards):
    traj = make_traj(rewards)
    assert abs(traj.episode_return - sum(rewards)) <= 1e-9
    assert len(traj.state_action_pairs()) == len(rewards)


class TestSerialization:
    def _round_trip(self, trajs, tmp_path):
        path = tmp_path / "trajs.txt"
        save_trajectories(trajs, path)
        loaded = load_trajectories(path)
        assert len(loaded) == len(trajs)
        for a, b in zip(trajs, loaded):
            assert a.id == b.id
            assert a.episode_return == b.episode_return
            assert len(a) == len(b)
            for ta, tb in zip(a.transitions, b.transitions):
                np.testing.assert_array_equal(np.asarray(ta.state, float), tb.state)
                assert ta.reward == tb.reward
                assert ta.done == tb.done
                if isinstance(ta.action, (int, np.integer)):
                    assert ta.action == tb.action
                else:
                    np.testing.assert_array_equal(np.asarray(ta.action, float), tb.action)
        return path, loaded

    def test_round_trip_discrete(self, tmp_path, rng):
        trajs = [make_traj(rng.normal(size=4), traj_id=i, rng=rng) for i in range(3)]
        self._round_trip(trajs, tmp_path)

    def test_round_trip_continuous_actions(self, tmp_path, rng):
        trajs = []
        for i in range(2):
            actions = [rng.uniform(-1, 1, size=2) for _ in range(3)]
            trajs.append(make_traj([0.5, -0.25, 1.0], traj_id=i, actions=actions, rng=rng))
        self._round_trip(trajs, tmp_path)

    def test_save_load_save_is_byte_identical(self, tmp_path, rng):
        trajs = [make_traj(rng.normal(size=5), traj_id=i, rng=rng) for i in range(3)]
        path, loaded = self._round_trip(trajs, tmp_path)
        again = tmp_path / "again.txt"
        save_trajectories(loaded, again)
        assert path.read_bytes() == again.read_bytes()

    def test_next_states_rebuilt_from_chain(self):
        traj = make_traj([1.0, 2.0, 3.0])
        parsed = parse_trajectory(format_trajectory(traj), lineno=1)
        for i in range(len(parsed) - 1):
            np.testing.assert_array_equal(
                parsed.transitions[i].next_state, parsed.transitions[i + 1].state
            )

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        good = format_trajectory(make_traj([1.0]))
        path.write_text(good + "\n0 1.0 not-a-state 0 1.0 0\n")
        with pytest.raises(DemoFormatError, match="line 2"):
            load_trajectories(path)

    def test_parse_rejects_mid_episode_done(self):
        line = "0 2.0 0.0,0.0 1 1.0 1 1.0,0.0 1 1.0 0"
        with pytest.raises(DemoFormatError, match="done flag"):
            parse_trajectory(line, lineno=3)

    def test_parse_rejects_return_mismatch(self):
        line = "0 5.0 0.0,0.0 1 1.0 1"
        with pytest.raises(DemoFormatError, match="does not match"):
            parse_trajectory(line, lineno=1)
