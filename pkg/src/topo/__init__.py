"""Trajectory-oriented policy optimization.

PPO augmented with an intrinsic penalty on the kernel two-sample (MMD)
distance between each rollout episode and a buffer of offline demonstration
trajectories, so the policy's state-action visitation is pulled toward the
demonstrations in sparse-reward tasks.
"""

from .agent import (
    AdvantageBatch,
    TopoConfig,
    TrainResult,
    TrainingLog,
    compute_advantages,
    intrinsic_rewards,
    topo_update,
    train,
)
from .demos import (
    DemoBuffer,
    generate_demos,
    load_demos,
    save_demos,
    scripted_expert_gridworld,
    scripted_expert_pointmass,
)
from .envs import make_env
from .mmd import (
    DistanceReport,
    FeatureSet,
    KernelConfig,
    gaussian_kernel,
    laplace_kernel,
    median_heuristic,
    mmd2,
    per_pair_distance,
    project,
    traj_to_demos_distance,
    trajectory_features,
)
from .nets import Architecture, PolicyValueNet, sample_action
from .trajectory import (
    RolloutBuffer,
    Trajectory,
    Transition,
    load_trajectories,
    save_trajectories,
)

__version__ = "0.1.0"

__all__ = [
    "AdvantageBatch",
    "Architecture",
    "DemoBuffer",
    "DistanceReport",
    "FeatureSet",
    "KernelConfig",
    "PolicyValueNet",
    "RolloutBuffer",
    "TopoConfig",
    "TrainResult",
    "TrainingLog",
    "Trajectory",
    "Transition",
    "compute_advantages",
    "gaussian_kernel",
    "generate_demos",
    "intrinsic_rewards",
    "laplace_kernel",
    "load_demos",
    "load_trajectories",
    "make_env",
    "median_heuristic",
    "mmd2",
    "per_pair_distance",
    "project",
    "sample_action",
    "save_demos",
    "save_trajectories",
    "scripted_expert_gridworld",
    "scripted_expert_pointmass",
    "topo_update",
    "traj_to_demos_distance",
    "train",
    "trajectory_features",
]
