"""End-to-end acceptance suite.

Every test here pins one release criterion at its stated tolerance and prints
a PASS line when it holds.  Run with ``pytest tests/test_acceptance.py -v``
(add ``-s`` to see the per-criterion lines).  The gridworld trend criteria
share one session-scoped experiment fixture (3 seeds each for the guided run
and the sigma = 0 baseline) built from the bundled kdt-small config.
"""

import math
import os
import time
from importlib import resources

import numpy as np
import pytest

from topo.agent import TopoConfig, surrogate_loss_and_grad
from topo.demos import DemoBuffer, generate_demos, save_demos
from topo.harness import (
    build_experiment_config,
    parse_config_file,
    read_csv,
    run_experiment,
)
from topo.mmd import FeatureSet, KernelConfig, gaussian_kernel, mmd2
from topo.nets import Architecture, PolicyValueNet, sample_action

FIXED_KERNEL = KernelConfig(bandwidth=1.0, bandwidth_mode="fixed")


def announce(name: str):
    print(f"\nACCEPTANCE PASS: {name}")


# ---------------------------------------------------------------------------
# shared gridworld experiment (used by the trend, hinge, replacement, and
# determinism criteria)
# ---------------------------------------------------------------------------


def _bundled_config() -> dict:
    path = resources.files("topo").joinpath("configs/kdt-small.cfg")
    return parse_config_file(str(path))


@pytest.fixture(scope="session")
def kdt_small_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("kdt_small_experiment")
    demo_path = str(root / "demos.txt")
    demos = generate_demos("kdt-small", 5, noise=0.0, seed=0)
    save_demos(DemoBuffer(demos=demos, capacity=5), demo_path)

    t0 = time.monotonic()
    guided = run_experiment(
        build_experiment_config(
            _bundled_config(), {"demos": demo_path, "out": str(root / "guided")}
        )
    )
    baseline = run_experiment(
        build_experiment_config(
            _bundled_config(),
            {"demos": demo_path, "out": str(root / "baseline"), "baseline": "true"},
        )
    )
    elapsed = time.monotonic() - t0
    return {
        "root": root,
        "demo_path": demo_path,
        "guided": guided,
        "baseline": baseline,
        "elapsed": elapsed,
        "delta": float(_bundled_config()["delta"]),
    }


# ---------------------------------------------------------------------------
# kernel estimator criteria
# ---------------------------------------------------------------------------


def _mmd2_bruteforce(a: np.ndarray, b: np.ndarray, bandwidth: float) -> float:
    def block(xs, ys):
        total = 0.0
        for x in xs:
            for y in ys:
                d2 = 0.0
                for u, v in zip(x, y):
                    d2 += (u - v) ** 2
                total += math.exp(-d2 / (2.0 * bandwidth * bandwidth))
        return total / (len(xs) * len(ys))

    return block(a, a) - 2.0 * block(a, b) + block(b, b)


def test_mmd_estimator_matches_bruteforce_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.monotonic()
    worst = 0.0
    for _ in range(200):
        n, m = rng.integers(1, 65, size=2)
        dim = int(rng.integers(1, 9))
        a = rng.normal(scale=rng.uniform(0.5, 2.0), size=(n, dim))
        b = rng.normal(loc=rng.uniform(-1, 1), size=(m, dim))
        bw = float(rng.uniform(0.3, 3.0))
        cfg = KernelConfig(bandwidth=bw, bandwidth_mode="fixed")
        got = mmd2(FeatureSet(a, 0), FeatureSet(b, 1), cfg)
        want = _mmd2_bruteforce(a, b, bw)
        worst = max(worst, abs(got - max(want, 0.0)))
    elapsed = time.monotonic() - t0
    assert worst <= 1e-10, f"worst deviation {worst}"
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    announce(f"mmd2 matches brute force on 200 pairs (worst {worst:.2e}, {elapsed:.1f}s)")


def test_mmd_closed_forms():
    rng = np.random.default_rng(7)
    for _ in range(50):
        u = rng.normal(size=3)
        v = rng.normal(size=3)
        got = mmd2(FeatureSet(u[None, :], 0), FeatureSet(v[None, :], 1), FIXED_KERNEL)
        want = 2.0 * (1.0 - gaussian_kernel(u, v, 1.0))
        assert abs(got - want) <= 1e-12
    for _ in range(50):
        pts = rng.normal(size=(int(rng.integers(1, 40)), 4))
        same = mmd2(FeatureSet(pts, 0), FeatureSet(pts.copy(), 1), FIXED_KERNEL)
        assert same <= 1e-10
    announce("singleton and identical-set closed forms hold at 1e-12 / 1e-10")


# ---------------------------------------------------------------------------
# gradient criteria
# ---------------------------------------------------------------------------


def _random_batch(net, rng, n=40):
    from topo.agent import AdvantageBatch

    theta_old = net.init(rng) + 0.1 * rng.normal(size=net.num_params)
    obs = rng.normal(size=(n, net.arch.obs_dim))
    actions, old_lp = [], []
    for i in range(n):
        action, lp = sample_action(net.distribution(theta_old, obs[i]), rng)
        actions.append(action)
        old_lp.append(lp)
    acts = (
        np.array(actions, dtype=int)
        if net.arch.action_kind == "discrete"
        else np.stack(actions)
    )
    return AdvantageBatch(
        obs=obs,
        actions=acts,
        old_log_probs=np.array(old_lp),
        adv_ext=rng.normal(size=n),
        adv_int=np.abs(rng.normal(size=n)),
        ret_ext=rng.normal(size=n),
        ret_int=np.abs(rng.normal(size=n)),
    )


def test_loss_gradient_matches_central_differences():
    nets = [
        PolicyValueNet(
            Architecture(obs_dim=3, action_kind="discrete", action_dim=3, hidden=(8,))
        ),
        PolicyValueNet(
            Architecture(obs_dim=3, action_kind="continuous", action_dim=2, hidden=(8,))
        ),
    ]
    assert all(net.num_params <= 500 for net in nets)
    step = 1e-5
    t0 = time.monotonic()
    worst = 0.0
    for batch_index in range(20):
        net = nets[batch_index % 2]
        rng = np.random.default_rng(100 + batch_index)
        theta = net.init(rng)
        batch = _random_batch(net, rng)
        cfg = TopoConfig(sigma=0.3, minibatch=batch.size)
        idx = np.arange(batch.size)
        _, grad = surrogate_loss_and_grad(theta, net, batch, idx, cfg)
        fd = np.zeros_like(theta)
        for i in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[i] += step
            down[i] -= step
            fd[i] = (
                surrogate_loss_and_grad(up, net, batch, idx, cfg)[0]
                - surrogate_loss_and_grad(down, net, batch, idx, cfg)[0]
            ) / (2 * step)
        rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-6)
        worst = max(worst, float(rel.max()))
    elapsed = time.monotonic() - t0
    assert worst < 1e-4, f"worst relative error {worst}"
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    announce(
        f"loss gradient matches finite differences on 20 batches "
        f"(worst rel err {worst:.2e}, {elapsed:.1f}s)"
    )


def test_score_function_gradient_matches_exact_enumeration():
    """Policy-gradient identity for the hinged-distance return on a tiny MDP.

    The expectation of the discounted intrinsic return is computed two ways:
    exactly (enumerating all trajectories of a 4-state deterministic MDP under
    a tabular softmax policy, differentiated by central differences) and by
    the score-function estimator over sampled trajectories.
    """
    n_states, n_actions, horizon, gamma = 4, 2, 4, 0.9
    transitions = np.array([[1, 2], [3, 0], [0, 3], [2, 1]])
    distance = np.array([[0.9, 0.1], [0.05, 1.3], [0.6, 0.02], [0.3, 0.8]])
    delta = 0.15
    reward = np.maximum(distance - delta, 0.0)  # hinge zeroes three entries
    rng = np.random.default_rng(42)
    theta = 0.5 * rng.normal(size=(n_states, n_actions))

    def policy(th):
        z = th - th.max(axis=1, keepdims=True)
        p = np.exp(z)
        return p / p.sum(axis=1, keepdims=True)

    def exact_objective(th):
        p = policy(th)
        total = 0.0
        for seq in range(n_actions**horizon):
            actions = [(seq >> t) & 1 for t in range(horizon)]
            s, prob, payoff = 0, 1.0, 0.0
            for t, a in enumerate(actions):
                prob *= p[s, a]
                payoff += gamma**t * reward[s, a]
                s = transitions[s, a]
            total += prob * payoff
        return total

    step = 1e-5
    fd = np.zeros_like(theta)
    for i in range(n_states):
        for j in range(n_actions):
            up, down = theta.copy(), theta.copy()
            up[i, j] += step
            down[i, j] -= step
            fd[i, j] = (exact_objective(up) - exact_objective(down)) / (2 * step)

    t0 = time.monotonic()
    samples = 100_000
    probs = policy(theta)
    states = np.zeros(samples, dtype=int)
    actions_t = np.zeros((horizon, samples), dtype=int)
    states_t = np.zeros((horizon, samples), dtype=int)
    rewards_t = np.zeros((horizon, samples))
    for t in range(horizon):
        draws = rng.random(samples)
        acts = (draws > probs[states, 0]).astype(int)  # two actions
        states_t[t] = states
        actions_t[t] = acts
        rewards_t[t] = reward[states, acts]
        states = transitions[states, acts]

    discounts = gamma ** np.arange(horizon)
    disc_rewards = rewards_t * discounts[:, None]
    tails = np.cumsum(disc_rewards[::-1], axis=0)[::-1]  # sum_{l>=t} gamma^l r_l
    estimate = np.zeros_like(theta)
    for t in range(horizon):
        # grad log pi(a|s) = onehot(a) - pi(.|s); q_t carries gamma^t already
        q = tails[t]
        np.add.at(estimate, (states_t[t], actions_t[t]), q)
        for a in range(n_actions):
            np.add.at(estimate[:, a], states_t[t], -probs[states_t[t], a] * q)
    estimate /= samples
    elapsed = time.monotonic() - t0

    rel = np.linalg.norm(estimate - fd) / np.linalg.norm(fd)
    assert rel < 0.02, f"relative error {rel:.4f}"
    assert elapsed < 120.0
    announce(
        f"score-function gradient matches exact enumeration "
        f"(rel err {rel:.3%} at 1e5 samples, {elapsed:.1f}s)"
    )


# ---------------------------------------------------------------------------
# training-run criteria (shared fixture)
# ---------------------------------------------------------------------------


def test_guided_runs_beat_baseline_on_final_window(kdt_small_runs):
    guided = kdt_small_runs["guided"].aggregate["mean_success"][-50:].mean()
    baseline = kdt_small_runs["baseline"].aggregate["mean_success"][-50:].mean()
    elapsed = kdt_small_runs["elapsed"]
    assert guided >= 0.9, f"guided final-window success {guided:.3f} < 0.9"
    assert baseline <= 0.1, f"baseline final-window success {baseline:.3f} > 0.1"
    assert elapsed < 600.0, f"experiment took {elapsed:.0f}s"
    announce(
        f"final-window success: guided {guided:.2f} vs baseline {baseline:.2f} "
        f"({elapsed:.0f}s for 6 runs)"
    )


def test_distance_shrinks_over_training(kdt_small_runs):
    for seed_log in kdt_small_runs["guided"].per_seed_logs:
        mmd = np.array([r.mean_mmd for r in seed_log.records])
        chunk = max(1, mmd.shape[0] // 10)
        first, last = mmd[:chunk].mean(), mmd[-chunk:].mean()
        assert last < first, f"distance did not shrink: {first:.4f} -> {last:.4f}"
    announce("mean MMD^2 over the final tenth is below the first tenth in every guided run")


def test_intrinsic_reward_zero_inside_boundary(kdt_small_runs):
    delta = kdt_small_runs["delta"]
    checked = 0
    inside = 0
    for summary in (kdt_small_runs["guided"], kdt_small_runs["baseline"]):
        for seed_log in summary.per_seed_logs:
            for record in seed_log.records:
                checked += 1
                if record.mean_mmd <= delta:
                    inside += 1
                    assert record.intrinsic_sum == 0.0, (
                        f"episode {record.episode}: distance {record.mean_mmd} <= "
                        f"{delta} but intrinsic sum {record.intrinsic_sum}"
                    )
    assert inside > 0, "no logged episode ever fell inside the distance boundary"
    announce(
        f"hinge inactive whenever distance <= delta "
        f"({inside}/{checked} episodes inside the boundary)"
    )


def test_demo_buffer_minimum_return_never_decreases(kdt_small_runs):
    for summary in (kdt_small_runs["guided"], kdt_small_runs["baseline"]):
        for seed_log in summary.per_seed_logs:
            mins = [r.demo_min_return for r in seed_log.records]
            assert all(b >= a for a, b in zip(mins, mins[1:]))
    announce("demo buffer minimum return is non-decreasing in every run")


def test_sigma_zero_equals_baseline_code_path(kdt_small_runs, tmp_path):
    demo_path = kdt_small_runs["demo_path"]
    logs = []
    for label, overrides in (
        ("flag", {"baseline": "true"}),
        ("sigma", {"sigma": "0.0"}),
    ):
        cfg = build_experiment_config(
            _bundled_config(),
            {
                "demos": demo_path,
                "out": str(tmp_path / label),
                "episodes": "100",
                "seeds": "0",
                **overrides,
            },
        )
        run_experiment(cfg)
        with open(os.path.join(cfg.out, "seed_0", "log.csv"), "rb") as fh:
            logs.append(fh.read())
    assert logs[0] == logs[1], "baseline flag and sigma = 0 logs differ"
    announce("sigma = 0 and the baseline code path emit bit-identical 100-episode logs")


def test_identical_seed_runs_are_byte_identical(kdt_small_runs, tmp_path):
    demo_path = kdt_small_runs["demo_path"]
    payloads = []
    for label in ("first", "second"):
        cfg = build_experiment_config(
            _bundled_config(),
            {"demos": demo_path, "out": str(tmp_path / label), "seeds": "0"},
        )
        run_experiment(cfg)
        with open(os.path.join(cfg.out, "seed_0", "log.csv"), "rb") as fh:
            payloads.append(fh.read())
    assert payloads[0] == payloads[1]
    # a seed's log is also independent of which other seeds ran alongside it
    with open(
        os.path.join(kdt_small_runs["guided"].out, "seed_0", "log.csv"), "rb"
    ) as fh:
        assert fh.read() == payloads[0]
    announce("re-running an identical config and seed reproduces the CSV byte for byte")
