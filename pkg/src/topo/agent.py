"""Advantage estimation and the policy update.

The update is PPO's clipped surrogate applied to a combined advantage
``A_ext - sigma * A_int``, where the intrinsic stream comes from hinged
trajectory distances to the demonstration buffer.  The score-function
gradient of the distance penalty equals the policy gradient with the
intrinsic return as critic, so folding the penalty into the advantage at
the surrogate level implements the constrained objective while staying
compatible with ratio clipping.  With sigma = 0 the update is vanilla PPO.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .demos import DemoBuffer
from .envs.spec import BoxActions, DiscreteActions
from .errors import ConfigError, TrainingAbort
from .mmd import (
    DistanceReport,
    KernelConfig,
    per_pair_distance,
    resolve_bandwidth,
    trajectory_features,
)
from .nets import Architecture, PolicyValueNet, log_softmax, sample_action
from .trajectory import RolloutBuffer, Trajectory, Transition

LOG_RATIO_CLAMP = 40.0

CSV_HEADER = "episode,return,success,mean_mmd,intrinsic_sum,sigma,bandwidth"


@dataclass(frozen=True)
class TopoConfig:
    """All training hyperparameters; sigma = 0 recovers vanilla PPO."""

    delta: float = 0.1
    sigma: float = 0.1
    update_every: int = 10  # episodes collected per policy update
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 4
    minibatch: int = 64
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    grad_clip: float = 0.5
    hidden: tuple[int, ...] = (64, 64)
    kernel: KernelConfig = field(default_factory=KernelConfig)

    def __post_init__(self) -> None:
        if self.delta < 0 or self.sigma < 0:
            raise ConfigError("delta and sigma must be non-negative")
        if self.update_every < 1 or self.epochs < 1 or self.minibatch < 1:
            raise ConfigError("update_every, epochs, and minibatch must be positive")
        if not 0 <= self.gamma <= 1 or not 0 <= self.gae_lambda <= 1:
            raise ConfigError("gamma and gae_lambda must lie in [0, 1]")
        if self.clip_eps <= 0 or self.learning_rate <= 0:
            raise ConfigError("clip_eps and learning_rate must be positive")


@dataclass
class AdvantageBatch:
    """Flattened per-step tensors for one update cycle."""

    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    adv_ext: np.ndarray  # normalized to zero mean / unit variance
    adv_int: np.ndarray  # raw; its scale carries sigma's meaning
    ret_ext: np.ndarray
    ret_int: np.ndarray
    mean_mmd: float = 0.0
    bandwidth: float = 0.0

    @property
    def size(self) -> int:
        return self.obs.shape[0]


def intrinsic_rewards(report: DistanceReport, delta: float) -> np.ndarray:
    """Hinged per-step penalty: max(distance - delta, 0)."""
    d = np.asarray(report.per_pair_distance, dtype=float)
    return np.maximum(d - delta, 0.0)


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
        gamma: float, lam: float) -> np.ndarray:
    """Generalized advantage estimates for one episode."""
    T = rewards.shape[0]
    adv = np.zeros(T)
    running = 0.0
    for t in range(T - 1, -1, -1):
        nonterminal = 0.0 if dones[t] else 1.0
        next_value = values[t + 1] if t + 1 < T else 0.0
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
    return adv


def compute_advantages(
    trajectories: list[Trajectory],
    values_ext: list[np.ndarray],
    values_int: list[np.ndarray],
    rewards_int: list[np.ndarray],
    gamma: float,
    lam: float,
) -> AdvantageBatch:
    """Two independent GAE streams over a cycle's episodes.

    Extrinsic advantages are normalized across the whole cycle; intrinsic
    advantages are left raw.  Return targets are advantage plus value,
    computed before normalization.
    """
    adv_e, adv_i, ret_e, ret_i = [], [], [], []
    obs, actions, old_lp = [], [], []
    for traj, v_e, v_i, r_i in zip(trajectories, values_ext, values_int, rewards_int):
        r_e = traj.rewards()
        dones = np.array([t.done for t in traj.transitions])
        a_e = gae(r_e, v_e, dones, gamma, lam)
        a_i = gae(r_i, v_i, dones, gamma, lam)
        adv_e.append(a_e)
        adv_i.append(a_i)
        ret_e.append(a_e + v_e)
        ret_i.append(a_i + v_i)
        obs.append(traj.states())
        actions.extend(t.action for t in traj.transitions)
        old_lp.extend(t.log_prob for t in traj.transitions)

    adv_ext = np.concatenate(adv_e)
    adv_ext = (adv_ext - adv_ext.mean()) / (adv_ext.std() + 1e-8)
    first = trajectories[0].transitions[0].action
    if isinstance(first, (int, np.integer)):
        action_arr = np.array(actions, dtype=int)
    else:
        action_arr = np.stack([np.asarray(a, dtype=float) for a in actions])
    return AdvantageBatch(
        obs=np.vstack(obs),
        actions=action_arr,
        old_log_probs=np.array(old_lp),
        adv_ext=adv_ext,
        adv_int=np.concatenate(adv_i),
        ret_ext=np.concatenate(ret_e),
        ret_int=np.concatenate(ret_i),
    )


def surrogate_loss_and_grad(
    theta: np.ndarray,
    net: PolicyValueNet,
    batch: AdvantageBatch,
    idx: np.ndarray,
    cfg: TopoConfig,
) -> tuple[float, np.ndarray]:
    """Objective to ascend and its exact gradient on one minibatch.

    Objective: clipped surrogate on the combined advantage, plus an entropy
    bonus, minus both critics' squared errors.
    """
    obs = batch.obs[idx]
    old_lp = batch.old_log_probs[idx]
    if cfg.sigma == 0.0:
        adv = batch.adv_ext[idx]  # vanilla PPO path
    else:
        adv = batch.adv_ext[idx] - cfg.sigma * batch.adv_int[idx]
    B = obs.shape[0]

    grad = np.zeros(net.num_params)
    gpW, gpb, g_log_std, geW, geb, giW, gib = net.unpack(grad)
    pW, pb, log_std_param, eW, eb, iW, ib = net.unpack(theta)
    X = net.normalize_obs(obs)

    out, p_caches = net.mlp_forward(pW, pb, X)
    if net.arch.action_kind == "discrete":
        acts = batch.actions[idx]
        lsm = log_softmax(out)
        probs = np.exp(lsm)
        lp = lsm[np.arange(B), acts]
        entropy = -(probs * lsm).sum(axis=1)
    else:
        acts = batch.actions[idx]
        ls = np.clip(log_std_param, -5.0, 2.0)
        std = np.exp(ls)
        z = (acts - out) / std
        lp = -0.5 * (z * z).sum(axis=1) - ls.sum() - 0.5 * math.log(2 * math.pi) * acts.shape[1]
        entropy = np.full(B, float(np.sum(ls + 0.5 * (1.0 + math.log(2 * math.pi)))))

    log_ratio = lp - old_lp
    ratio_mask = np.abs(log_ratio) < LOG_RATIO_CLAMP
    ratio = np.exp(np.clip(log_ratio, -LOG_RATIO_CLAMP, LOG_RATIO_CLAMP))
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    s1 = ratio * adv
    s2 = clipped * adv
    surrogate = np.minimum(s1, s2)

    v_ext, e_caches = net.mlp_forward(eW, eb, X)
    v_int, i_caches = net.mlp_forward(iW, ib, X)
    err_e = v_ext[:, 0] - batch.ret_ext[idx]
    err_i = v_int[:, 0] - batch.ret_int[idx]

    objective = (
        float(surrogate.mean())
        + cfg.entropy_coef * float(entropy.mean())
        - cfg.value_coef * (float(np.mean(err_e**2)) + float(np.mean(err_i**2)))
    )

    # d objective / d log-prob, through min(s1, s2) and exp
    inside = (ratio > 1.0 - cfg.clip_eps) & (ratio < 1.0 + cfg.clip_eps)
    d_ratio = np.where(s1 <= s2, adv, adv * inside)
    d_lp = (d_ratio * ratio * ratio_mask) / B

    if net.arch.action_kind == "discrete":
        G = -probs * d_lp[:, None]
        G[np.arange(B), acts] += d_lp
        G += (cfg.entropy_coef / B) * (-probs * (lsm + entropy[:, None]))
    else:
        G = d_lp[:, None] * (z / std)  # d lp / d mean = z / std
        std_mask = (log_std_param > -5.0) & (log_std_param < 2.0)
        g_log_std += std_mask * (
            (d_lp[:, None] * (z * z - 1.0)).sum(axis=0) + cfg.entropy_coef
        )
    net.mlp_backward(pW, p_caches, G, gpW, gpb)

    net.mlp_backward(
        eW, e_caches, (-cfg.value_coef * 2.0 / B) * err_e[:, None], geW, geb
    )
    net.mlp_backward(
        iW, i_caches, (-cfg.value_coef * 2.0 / B) * err_i[:, None], giW, gib
    )
    return objective, grad


@dataclass
class OptimizerState:
    """Momentum buffer for plain gradient ascent."""

    velocity: np.ndarray

    @staticmethod
    def zeros(n: int) -> "OptimizerState":
        return OptimizerState(velocity=np.zeros(n))


def topo_update(
    theta: np.ndarray,
    batch: AdvantageBatch,
    cfg: TopoConfig,
    net: PolicyValueNet,
    opt: OptimizerState,
    rng: np.random.Generator,
) -> np.ndarray:
    """Epochs of minibatch ascent on the combined objective.

    Gradients are norm-clipped per parameter block (policy, extrinsic critic,
    intrinsic critic) so the intrinsic stream cannot perturb the PPO path
    when sigma = 0.
    """
    theta = theta.copy()
    n = batch.size
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = perm[start : start + cfg.minibatch]
            objective, grad = surrogate_loss_and_grad(theta, net, batch, idx, cfg)
            if not math.isfinite(objective) or not np.all(np.isfinite(grad)):
                raise TrainingAbort(
                    "non-finite loss during update "
                    f"(sigma={cfg.sigma}, mean_mmd={batch.mean_mmd}, "
                    f"bandwidth={batch.bandwidth})"
                )
            for block in (net.policy_block, net.v_ext_block, net.v_int_block):
                g = grad[block]
                norm = float(np.linalg.norm(g))
                if norm > cfg.grad_clip:
                    g *= cfg.grad_clip / norm
            opt.velocity = cfg.momentum * opt.velocity + grad
            theta += cfg.learning_rate * opt.velocity
    return theta


# -- training loop ---------------------------------------------------------


@dataclass
class EpisodeRecord:
    episode: int
    episode_return: float
    success: bool
    mean_mmd: float
    intrinsic_sum: float
    sigma: float
    bandwidth: float
    demo_min_return: float


@dataclass
class TrainingLog:
    records: list[EpisodeRecord] = field(default_factory=list)

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in self.records:
                fh.write(
                    f"{r.episode},{repr(float(r.episode_return))},"
                    f"{1 if r.success else 0},{repr(float(r.mean_mmd))},"
                    f"{repr(float(r.intrinsic_sum))},{repr(float(r.sigma))},"
                    f"{repr(float(r.bandwidth))}\n"
                )


@dataclass
class TrainResult:
    log: TrainingLog
    theta: np.ndarray
    arch: Architecture


def architecture_for(env, hidden: tuple[int, ...]) -> Architecture:
    actions = env.spec.actions
    if isinstance(actions, DiscreteActions):
        kind, dim = "discrete", actions.n
    elif isinstance(actions, BoxActions):
        kind, dim = "continuous", actions.dim
    else:
        raise ConfigError(f"unsupported action space {actions!r}")
    return Architecture(
        obs_dim=env.spec.observation_dim,
        action_kind=kind,
        action_dim=dim,
        hidden=hidden,
        obs_scale=tuple(env.obs_scale),
    )


def collect_episode(env, net: PolicyValueNet, theta: np.ndarray,
                    rng: np.random.Generator, episode_id: int) -> Trajectory:
    obs = env.reset()
    traj = Trajectory(id=episode_id)
    for _ in range(env.spec.max_steps):
        dist = net.distribution(theta, obs)
        action, log_prob = sample_action(dist, rng)
        next_obs, reward, done = env.step(action)
        traj.append(Transition(obs, action, reward, next_obs, done, log_prob))
        obs = next_obs
        if done:
            break
    return traj


def train(
    env,
    demos: DemoBuffer,
    cfg: TopoConfig,
    episodes: int,
    seed: int,
    csv_path: str | None = None,
) -> TrainResult:
    """Run the full training loop for one seed.

    Episodes accumulate in an on-policy buffer; every ``cfg.update_every``
    episodes the cycle is closed: the kernel bandwidth is frozen over demo
    and rollout features, per-episode distances to the cycle-start demo
    snapshot become intrinsic penalties, and the policy takes one update.
    After every episode the live demo buffer may replace its worst member
    with the new trajectory.  The log is flushed to CSV even on abort.
    """
    ss = np.random.SeedSequence(seed)
    init_rng, action_rng, update_rng = (
        np.random.default_rng(s) for s in ss.spawn(3)
    )
    arch = architecture_for(env, cfg.hidden)
    net = PolicyValueNet(arch)
    theta = net.init(init_rng)
    opt = OptimizerState.zeros(net.num_params)
    buffer = RolloutBuffer(capacity=cfg.update_every)
    log = TrainingLog()
    snapshot = demos.snapshot()
    pending: list[tuple[Trajectory, bool, float]] = []

    try:
        for episode in range(episodes):
            traj = collect_episode(env, net, theta, action_rng, episode)
            buffer.insert(traj)
            success = env.episode_success(traj)
            demos.maybe_replace(traj)
            pending.append((traj, success, demos.min_return()))

            if buffer.full or episode == episodes - 1:
                feature_sets = [
                    trajectory_features(d, cfg.kernel) for d in snapshot.demos
                ] + [trajectory_features(t, cfg.kernel) for t in buffer]
                kcfg = resolve_bandwidth(cfg.kernel, feature_sets)

                reports = [per_pair_distance(t, snapshot, kcfg) for t in buffer]
                rewards_int = [intrinsic_rewards(rep, cfg.delta) for rep in reports]
                values_ext, values_int = [], []
                for t in buffer:
                    v_e, v_i = net.values(theta, t.states())
                    values_ext.append(v_e)
                    values_int.append(v_i)
                batch = compute_advantages(
                    list(buffer), values_ext, values_int, rewards_int,
                    cfg.gamma, cfg.gae_lambda,
                )
                batch.mean_mmd = float(np.mean([rep.mean() for rep in reports]))
                batch.bandwidth = kcfg.bandwidth

                for (p_traj, p_success, p_demo_min), rep, r_int in zip(
                    pending, reports, rewards_int
                ):
                    log.records.append(
                        EpisodeRecord(
                            episode=p_traj.id,
                            episode_return=p_traj.episode_return,
                            success=p_success,
                            mean_mmd=rep.mean(),
                            intrinsic_sum=float(r_int.sum()),
                            sigma=cfg.sigma,
                            bandwidth=kcfg.bandwidth,
                            demo_min_return=p_demo_min,
                        )
                    )

                theta = topo_update(theta, batch, cfg, net, opt, update_rng)
                buffer.clear()
                pending.clear()
                snapshot = demos.snapshot()
    finally:
        if csv_path is not None:
            log.write_csv(csv_path)
    return TrainResult(log=log, theta=theta, arch=arch)
