"""Kernel two-sample distances between trajectories.

A trajectory is treated as an empirical sample of its state-action visitation
distribution.  The squared maximum mean discrepancy between two sample sets
``a`` and ``b`` is estimated with the biased V-statistic

    MMD^2 = mean k(x, x') - 2 mean k(x, y) + mean k(y, y')

over all pairs including the diagonal, which keeps the estimate nonnegative
for a positive-definite kernel.  Kernel sums are accumulated with exact
(Shewchuk) summation so the estimate is deterministic and symmetric at the
bit level regardless of argument order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, UsageError
from .trajectory import Action, Trajectory

FEATURE_MAPS = ("state_action", "state_only", "coordinate_projection")
KERNELS = ("gaussian", "laplace")
BANDWIDTH_MODES = ("fixed", "median_heuristic")


@dataclass(frozen=True)
class KernelConfig:
    """Kernel choice, bandwidth policy, and the feature projection applied first.

    ``feature_scale``, when set, divides projected features per dimension
    (used to normalize continuous-state features by the demo spread).
    """

    bandwidth: float = 1.0
    bandwidth_mode: str = "median_heuristic"
    feature_map: str = "state_action"
    coordinates: tuple[int, ...] = ()
    kernel: str = "gaussian"
    feature_scale: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.bandwidth_mode not in BANDWIDTH_MODES:
            raise ConfigError(f"unknown bandwidth mode {self.bandwidth_mode!r}")
        if self.feature_map not in FEATURE_MAPS:
            raise ConfigError(f"unknown feature map {self.feature_map!r}")
        if self.kernel not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.bandwidth_mode == "fixed" and not self.bandwidth > 0:
            raise ConfigError("fixed bandwidth must be positive")
        if self.feature_map == "coordinate_projection" and not self.coordinates:
            raise ConfigError("coordinate_projection requires at least one index")


@dataclass
class FeatureSet:
    """Projected feature points of one trajectory, shape (steps, feature_dim)."""

    points: np.ndarray
    source_id: int


@dataclass
class DistanceReport:
    """Per-step distance of a trajectory to a demo buffer, plus the arg-min demo."""

    per_pair_distance: list[float]
    min_demo_id: int

    def mean(self) -> float:
        return float(np.mean(self.per_pair_distance))


def _encode_action(action: Action) -> np.ndarray:
    if isinstance(action, (int, np.integer)):
        return np.array([float(action)])
    return np.asarray(action, dtype=float).ravel()


def project(pair: tuple[np.ndarray, Action], cfg: KernelConfig) -> np.ndarray:
    """Map one (state, action) pair to the feature space the kernel sees."""
    state, action = pair
    state = np.asarray(state, dtype=float).ravel()
    if cfg.feature_map == "state_action":
        feat = np.concatenate([state, _encode_action(action)])
    elif cfg.feature_map == "state_only":
        feat = state
    else:
        for idx in cfg.coordinates:
            if not 0 <= idx < state.size:
                raise ConfigError(
                    f"projection index {idx} out of range for state of dim {state.size}"
                )
        feat = state[list(cfg.coordinates)]
    if cfg.feature_scale is not None:
        scale = np.asarray(cfg.feature_scale, dtype=float)
        if scale.size != feat.size:
            raise ConfigError(
                f"feature_scale has dim {scale.size}, features have dim {feat.size}"
            )
        feat = feat / scale
    return feat


def trajectory_features(traj: Trajectory, cfg: KernelConfig) -> FeatureSet:
    """Project every state-action pair of a trajectory."""
    if len(traj) == 0:
        raise UsageError("cannot build features for an empty trajectory")
    points = np.stack([project(pair, cfg) for pair in traj.state_action_pairs()])
    return FeatureSet(points=points, source_id=traj.id)


def gaussian_kernel(u: np.ndarray, v: np.ndarray, bandwidth: float) -> float:
    """exp(-||u - v||^2 / (2 bandwidth^2)); 1 at zero distance."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise UsageError(f"kernel inputs have dims {u.size} and {v.size}")
    if not bandwidth > 0:
        raise UsageError("bandwidth must be positive")
    d2 = float(np.sum((u - v) ** 2))
    return float(math.exp(-d2 / (2.0 * bandwidth * bandwidth)))


def laplace_kernel(u: np.ndarray, v: np.ndarray, bandwidth: float) -> float:
    """exp(-||u - v||_1 / bandwidth)."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise UsageError(f"kernel inputs have dims {u.size} and {v.size}")
    if not bandwidth > 0:
        raise UsageError("bandwidth must be positive")
    return float(math.exp(-float(np.sum(np.abs(u - v))) / bandwidth))


def _kernel_matrix(a: np.ndarray, b: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    if cfg.kernel == "gaussian":
        d2 = np.sum(diff * diff, axis=-1)
        return np.exp(-d2 / (2.0 * cfg.bandwidth * cfg.bandwidth))
    d1 = np.sum(np.abs(diff), axis=-1)
    return np.exp(-d1 / cfg.bandwidth)


def _exact_mean(matrix: np.ndarray) -> float:
    return math.fsum(matrix.ravel().tolist()) / matrix.size


def mmd2(a: FeatureSet, b: FeatureSet, cfg: KernelConfig) -> float:
    """Biased squared-MMD estimate between two feature sets (V-statistic).

    Nonnegative up to roundoff; tiny negative results are clamped to zero.
    Symmetric in (a, b) at the bit level.
    """
    if a.points.size == 0 or b.points.size == 0:
        raise UsageError("mmd2 requires non-empty feature sets")
    if a.points.shape[1] != b.points.shape[1]:
        raise UsageError(
            f"feature dims differ: {a.points.shape[1]} vs {b.points.shape[1]}"
        )
    if not cfg.bandwidth > 0:
        raise UsageError("bandwidth must be positive (resolve it before calling mmd2)")
    self_a = _exact_mean(_kernel_matrix(a.points, a.points, cfg))
    self_b = _exact_mean(_kernel_matrix(b.points, b.points, cfg))
    cross = _exact_mean(_kernel_matrix(a.points, b.points, cfg))
    value = math.fsum((self_a, self_b, -2.0 * cross))
    return max(value, 0.0)


def median_heuristic(sets: Sequence[FeatureSet]) -> float:
    """Bandwidth from the lower median of pairwise squared feature distances.

    Returns sqrt(median / 2) so the median-distance pair scores exp(-1).
    Falls back to 1.0 (with a warning) when every point coincides.
    """
    points = np.vstack([s.points for s in sets])
    n = points.shape[0]
    if n < 2:
        raise UsageError("median heuristic needs at least two feature points")
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(n, k=1)
    ordered = np.sort(d2[iu], kind="stable")
    med = float(ordered[(ordered.size - 1) // 2])
    if med <= 0.0:
        warnings.warn(
            "median pairwise feature distance is zero (points coincide); "
            "falling back to bandwidth 1.0",
            RuntimeWarning,
            stacklevel=2,
        )
        return 1.0
    return math.sqrt(med / 2.0)


def resolve_bandwidth(cfg: KernelConfig, sets: Sequence[FeatureSet]) -> KernelConfig:
    """Freeze the operative bandwidth for one update cycle."""
    if cfg.bandwidth_mode == "fixed":
        return cfg
    return replace(cfg, bandwidth=median_heuristic(sets))


def traj_to_demos_distance(
    traj: Trajectory, demos, cfg: KernelConfig
) -> tuple[float, int]:
    """Smallest squared MMD from a trajectory to any demonstration.

    ``demos`` may be a DemoBuffer or any iterable of trajectories.
    Ties are broken toward the lowest demonstration id.
    """
    demo_list = sorted(getattr(demos, "demos", demos), key=lambda d: d.id)
    if not demo_list:
        raise ConfigError("demonstration buffer is empty")
    own = trajectory_features(traj, cfg)
    best_value = math.inf
    best_id = -1
    for demo in demo_list:
        value = mmd2(own, trajectory_features(demo, cfg), cfg)
        if value < best_value:
            best_value = value
            best_id = demo.id
    return best_value, best_id


def per_pair_distance(traj: Trajectory, demos, cfg: KernelConfig) -> DistanceReport:
    """Distance of each step of a trajectory to the demo buffer.

    Every step belongs to exactly one episode, so each receives that
    episode's trajectory-level distance.
    """
    if len(traj) == 0:
        raise UsageError("cannot compute distances for an empty trajectory")
    value, demo_id = traj_to_demos_distance(traj, demos, cfg)
    return DistanceReport(per_pair_distance=[value] * len(traj), min_demo_id=demo_id)
