"""Tanh MLP policy and twin value heads over a single flat parameter vector.

Forward passes cache activations; backprop is written out by hand so the
whole package stays dependency-light.  The parameter vector is laid out as
[policy MLP | log-std (continuous only) | extrinsic value MLP | intrinsic
value MLP], and each of those three blocks is treated independently by the
optimizer's gradient clipping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UsageError

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Architecture:
    obs_dim: int
    action_kind: str  # "discrete" | "continuous"
    action_dim: int
    hidden: tuple[int, ...] = (64, 64)
    obs_scale: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.action_kind not in ("discrete", "continuous"):
            raise ConfigError(f"unknown action kind {self.action_kind!r}")
        if self.obs_dim < 1 or self.action_dim < 1 or not self.hidden:
            raise ConfigError("architecture dimensions must be positive")
        if self.obs_scale is not None and len(self.obs_scale) != self.obs_dim:
            raise ConfigError("obs_scale length must match obs_dim")

    def to_json(self) -> str:
        return json.dumps(
            {
                "obs_dim": self.obs_dim,
                "action_kind": self.action_kind,
                "action_dim": self.action_dim,
                "hidden": list(self.hidden),
                "obs_scale": list(self.obs_scale) if self.obs_scale else None,
            }
        )

    @staticmethod
    def from_json(text: str) -> "Architecture":
        d = json.loads(text)
        return Architecture(
            obs_dim=d["obs_dim"],
            action_kind=d["action_kind"],
            action_dim=d["action_dim"],
            hidden=tuple(d["hidden"]),
            obs_scale=tuple(d["obs_scale"]) if d["obs_scale"] else None,
        )


@dataclass
class DistParams:
    """Action distribution parameters for one observation."""

    kind: str
    logits: np.ndarray | None = None
    mean: np.ndarray | None = None
    log_std: np.ndarray | None = None


def _mlp_sizes(in_dim: int, hidden: tuple[int, ...], out_dim: int) -> list[tuple[int, int]]:
    dims = [in_dim, *hidden, out_dim]
    return [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]


def _mlp_param_count(shapes: list[tuple[int, int]]) -> int:
    return sum(m * n + n for m, n in shapes)


def _orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    m, n = shape
    a = rng.standard_normal((max(m, n), min(m, n)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if m < n:
        q = q.T
    return gain * q[:m, :n]


class PolicyValueNet:
    """Views into a flat parameter vector plus forward/backward passes."""

    def __init__(self, arch: Architecture):
        self.arch = arch
        self._policy_shapes = _mlp_sizes(arch.obs_dim, arch.hidden, arch.action_dim)
        self._value_shapes = _mlp_sizes(arch.obs_dim, arch.hidden, 1)
        p = _mlp_param_count(self._policy_shapes)
        s = arch.action_dim if arch.action_kind == "continuous" else 0
        v = _mlp_param_count(self._value_shapes)
        self.policy_block = slice(0, p + s)
        self.v_ext_block = slice(p + s, p + s + v)
        self.v_int_block = slice(p + s + v, p + s + 2 * v)
        self._log_std_slice = slice(p, p + s)
        self.num_params = p + s + 2 * v
        self._scale = (
            np.asarray(arch.obs_scale, dtype=float)
            if arch.obs_scale is not None
            else np.ones(arch.obs_dim)
        )

    # -- parameter layout -------------------------------------------------

    def _unpack_mlp(self, theta: np.ndarray, offset: int, shapes) -> tuple[list, list, int]:
        Ws, bs = [], []
        for m, n in shapes:
            Ws.append(theta[offset : offset + m * n].reshape(m, n))
            offset += m * n
            bs.append(theta[offset : offset + n])
            offset += n
        return Ws, bs, offset

    def unpack(self, theta: np.ndarray):
        if theta.shape != (self.num_params,):
            raise UsageError(
                f"parameter vector has shape {theta.shape}, expected ({self.num_params},)"
            )
        pW, pb, off = self._unpack_mlp(theta, 0, self._policy_shapes)
        log_std = theta[self._log_std_slice]
        off = self._log_std_slice.stop
        eW, eb, off = self._unpack_mlp(theta, off, self._value_shapes)
        iW, ib, off = self._unpack_mlp(theta, off, self._value_shapes)
        return pW, pb, log_std, eW, eb, iW, ib

    def init(self, rng: np.random.Generator) -> np.ndarray:
        """Orthogonal weights (gain sqrt(2) hidden, 0.01 policy head, 1.0 value heads)."""
        theta = np.zeros(self.num_params)
        pW, _, log_std, eW, _, iW, _ = self.unpack(theta)
        for Ws, head_gain in ((pW, 0.01), (eW, 1.0), (iW, 1.0)):
            for i, W in enumerate(Ws):
                gain = head_gain if i == len(Ws) - 1 else np.sqrt(2.0)
                W[:] = _orthogonal(rng, W.shape, gain)
        log_std[:] = -0.5
        return theta

    # -- forward / backward ------------------------------------------------

    def normalize_obs(self, obs: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(obs, dtype=float))
        if X.shape[1] != self.arch.obs_dim:
            raise UsageError(
                f"observation dim {X.shape[1]} does not match {self.arch.obs_dim}"
            )
        return X / self._scale

    @staticmethod
    def mlp_forward(Ws, bs, X):
        caches = []
        H = X
        for i in range(len(Ws)):
            Z = H @ Ws[i] + bs[i]
            if i < len(Ws) - 1:
                A = np.tanh(Z)
                caches.append((H, A))
                H = A
            else:
                caches.append((H, None))
                H = Z
        return H, caches

    @staticmethod
    def mlp_backward(Ws, caches, G, dWs, dbs):
        # G is dL/d(pre-activation output); grads accumulate into the views
        for i in range(len(Ws) - 1, -1, -1):
            H_in, _ = caches[i]
            dWs[i] += H_in.T @ G
            dbs[i] += G.sum(axis=0)
            if i > 0:
                A_prev = caches[i - 1][1]
                G = (G @ Ws[i].T) * (1.0 - A_prev * A_prev)

    def policy_forward(self, theta: np.ndarray, obs: np.ndarray):
        pW, pb, log_std, *_ = self.unpack(theta)
        X = self.normalize_obs(obs)
        out, caches = self.mlp_forward(pW, pb, X)
        if self.arch.action_kind == "discrete":
            return out, caches
        return (out, np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)), caches

    def value_forward(self, theta: np.ndarray, obs: np.ndarray, head: str):
        _, _, _, eW, eb, iW, ib = self.unpack(theta)
        Ws, bs = (eW, eb) if head == "ext" else (iW, ib)
        X = self.normalize_obs(obs)
        out, caches = self.mlp_forward(Ws, bs, X)
        return out[:, 0], caches

    def values(self, theta: np.ndarray, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v_ext, _ = self.value_forward(theta, obs, "ext")
        v_int, _ = self.value_forward(theta, obs, "int")
        return v_ext, v_int

    def distribution(self, theta: np.ndarray, obs: np.ndarray) -> DistParams:
        """Action distribution for a single observation."""
        out, _ = self.policy_forward(theta, obs)
        if self.arch.action_kind == "discrete":
            return DistParams(kind="discrete", logits=out[0])
        mean, log_std = out
        return DistParams(kind="continuous", mean=mean[0], log_std=log_std)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def sample_action(dist: DistParams, rng: np.random.Generator):
    """Draw an action and return it with its exact log-density.

    Continuous actions are reported before any clipping the environment
    applies, so stored log-probs stay consistent with the drawn value.
    """
    if dist.kind == "discrete":
        log_probs = log_softmax(dist.logits)
        probs = np.exp(log_probs)
        cdf = np.cumsum(probs)
        idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        idx = min(idx, probs.size - 1)
        return idx, float(log_probs[idx])
    std = np.exp(dist.log_std)
    action = dist.mean + std * rng.standard_normal(dist.mean.shape)
    z = (action - dist.mean) / std
    log_prob = float(
        -0.5 * np.sum(z * z) - np.sum(dist.log_std) - 0.5 * LOG_2PI * action.size
    )
    return action, log_prob
