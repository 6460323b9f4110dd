"""Experiment orchestration: config files, seeded runs, aggregation, comparison.

Configuration is a plain ``key = value`` text file; command-line overrides
take precedence over the file, which takes precedence over defaults.  Each
experiment writes one ``seed_<n>/log.csv`` per seed, ``aggregate.csv`` across
seeds, and renders the matching figures alongside.
"""

from __future__ import annotations

import glob
import hashlib
import os
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .agent import TopoConfig, TrainingLog, train
from .demos import DemoBuffer, load_demos
from .envs import make_env
from .envs.pointmass import SparsePointMass
from .errors import ConfigError, TrainingAbort
from .figures import render_comparison, render_learning_curves
from .mmd import KernelConfig, trajectory_features
from .nets import Architecture, PolicyValueNet, sample_action

AGGREGATE_HEADER = "episode,mean_return,std_return,mean_success,mean_mmd"

_INT_KEYS = {"episodes", "update_every", "epochs", "minibatch", "max_steps"}
_FLOAT_KEYS = {
    "sigma", "delta", "gamma", "gae_lambda", "clip_eps", "learning_rate",
    "momentum", "entropy_coef", "value_coef", "grad_clip", "threshold",
    "bandwidth",
}
_BOOL_KEYS = {"baseline", "replace_demos"}
_STR_KEYS = {"env", "demos", "out", "kernel", "bandwidth_mode", "feature_map"}
_INT_TUPLE_KEYS = {"seeds", "hidden", "coordinates"}
_FLOAT_TUPLE_KEYS = {"feature_scale"}
_ALL_KEYS = (
    _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS | _INT_TUPLE_KEYS
    | _FLOAT_TUPLE_KEYS
)

_TOPO_KEYS = {
    "sigma", "delta", "update_every", "gamma", "gae_lambda", "clip_eps",
    "learning_rate", "momentum", "epochs", "minibatch", "entropy_coef",
    "value_coef", "grad_clip", "hidden",
}
_KERNEL_KEYS = {
    "kernel", "bandwidth", "bandwidth_mode", "feature_map", "coordinates",
    "feature_scale",
}


@dataclass
class ExperimentConfig:
    env: str = "kdt-small"
    episodes: int = 500
    seeds: tuple[int, ...] = (0,)
    demos: str = ""
    out: str = "runs/out"
    baseline: bool = False
    replace_demos: bool = True
    max_steps: int | None = None
    threshold: float | None = None
    topo: TopoConfig = field(default_factory=TopoConfig)

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.episodes < 1:
            raise ConfigError("episodes must be positive")


def parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value
    return values


def _coerce(key: str, value: str):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _BOOL_KEYS:
            low = value.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if key in _INT_TUPLE_KEYS:
            return tuple(int(v) for v in value.split(",") if v.strip() != "")
        if key in _FLOAT_TUPLE_KEYS:
            parsed = tuple(float(v) for v in value.split(",") if v.strip() != "")
            return parsed or None  # empty value unsets the scale
        return value
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None


def build_experiment_config(
    file_values: dict[str, str] | None = None,
    overrides: dict[str, str] | None = None,
) -> ExperimentConfig:
    """Resolve settings with precedence: overrides > file > defaults."""
    merged: dict[str, str] = {}
    merged.update(file_values or {})
    merged.update(overrides or {})
    for key in merged:
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown config key {key!r}")

    typed = {key: _coerce(key, val) for key, val in merged.items()}
    kernel_kwargs = {k: typed.pop(k) for k in list(typed) if k in _KERNEL_KEYS}
    topo_kwargs = {k: typed.pop(k) for k in list(typed) if k in _TOPO_KEYS}
    kernel = KernelConfig(**kernel_kwargs)
    topo = TopoConfig(kernel=kernel, **topo_kwargs)
    return ExperimentConfig(topo=topo, **typed)


def render_config(cfg: ExperimentConfig) -> str:
    """Canonical text form of a resolved config (parses back to itself)."""
    values = {
        "env": cfg.env,
        "episodes": cfg.episodes,
        "seeds": ",".join(str(s) for s in cfg.seeds),
        "demos": cfg.demos,
        "out": cfg.out,
        "baseline": str(cfg.baseline).lower(),
        "replace_demos": str(cfg.replace_demos).lower(),
        "sigma": repr(cfg.topo.sigma),
        "delta": repr(cfg.topo.delta),
        "update_every": cfg.topo.update_every,
        "gamma": repr(cfg.topo.gamma),
        "gae_lambda": repr(cfg.topo.gae_lambda),
        "clip_eps": repr(cfg.topo.clip_eps),
        "learning_rate": repr(cfg.topo.learning_rate),
        "momentum": repr(cfg.topo.momentum),
        "epochs": cfg.topo.epochs,
        "minibatch": cfg.topo.minibatch,
        "entropy_coef": repr(cfg.topo.entropy_coef),
        "value_coef": repr(cfg.topo.value_coef),
        "grad_clip": repr(cfg.topo.grad_clip),
        "hidden": ",".join(str(h) for h in cfg.topo.hidden),
        "kernel": cfg.topo.kernel.kernel,
        "bandwidth": repr(cfg.topo.kernel.bandwidth),
        "bandwidth_mode": cfg.topo.kernel.bandwidth_mode,
        "feature_map": cfg.topo.kernel.feature_map,
    }
    if cfg.topo.kernel.coordinates:
        values["coordinates"] = ",".join(str(c) for c in cfg.topo.kernel.coordinates)
    if cfg.topo.kernel.feature_scale is not None:
        values["feature_scale"] = ",".join(
            repr(float(v)) for v in cfg.topo.kernel.feature_scale
        )
    if cfg.max_steps is not None:
        values["max_steps"] = cfg.max_steps
    if cfg.threshold is not None:
        values["threshold"] = repr(cfg.threshold)
    return "\n".join(f"{k} = {values[k]}" for k in sorted(values)) + "\n"


@dataclass
class RunSummary:
    out: str
    per_seed_logs: list[TrainingLog]
    aggregate: dict[str, np.ndarray]
    final_mean_mmd: float


def demo_feature_scale(demos: DemoBuffer, kernel: KernelConfig) -> tuple[float, ...]:
    """Per-dimension std of the demo feature points, frozen at load time."""
    base = replace(kernel, feature_scale=None)
    points = np.vstack([trajectory_features(d, base).points for d in demos.demos])
    std = points.std(axis=0)
    std[std < 1e-8] = 1.0
    return tuple(float(s) for s in std)


def _effective_topo(cfg: ExperimentConfig, demos: DemoBuffer, env) -> TopoConfig:
    topo = cfg.topo
    if cfg.baseline:
        topo = replace(topo, sigma=0.0)
    if isinstance(env, SparsePointMass) and topo.kernel.feature_scale is None:
        scale = demo_feature_scale(demos, topo.kernel)
        topo = replace(topo, kernel=replace(topo.kernel, feature_scale=scale))
    return topo


def aggregate_logs(logs: list[TrainingLog]) -> dict[str, np.ndarray]:
    lengths = {len(log.records) for log in logs}
    if len(lengths) != 1:
        raise ConfigError(f"per-seed logs have differing lengths: {sorted(lengths)}")
    returns = np.array([[r.episode_return for r in log.records] for log in logs])
    success = np.array([[1.0 if r.success else 0.0 for r in log.records] for log in logs])
    mmd = np.array([[r.mean_mmd for r in log.records] for log in logs])
    return {
        "episode": np.arange(returns.shape[1]),
        "mean_return": returns.mean(axis=0),
        "std_return": returns.std(axis=0),
        "mean_success": success.mean(axis=0),
        "mean_mmd": mmd.mean(axis=0),
    }


def write_aggregate_csv(agg: dict[str, np.ndarray], path: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(AGGREGATE_HEADER + "\n")
        for i in range(agg["episode"].shape[0]):
            fh.write(
                f"{int(agg['episode'][i])},{repr(float(agg['mean_return'][i]))},"
                f"{repr(float(agg['std_return'][i]))},"
                f"{repr(float(agg['mean_success'][i]))},"
                f"{repr(float(agg['mean_mmd'][i]))}\n"
            )


def read_csv(path: str) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows:
        raise ConfigError(f"{path} has no data rows")
    data = np.array(rows, dtype=float)
    return {name: data[:, i] for i, name in enumerate(header)}


def run_experiment(cfg: ExperimentConfig) -> RunSummary:
    """One train() per seed, per-seed CSVs, aggregate CSV, and figures."""
    if not cfg.demos:
        raise ConfigError("no demo file configured; generate one with gen-demos")
    if not os.path.exists(cfg.demos):
        raise ConfigError(
            f"demo file {cfg.demos!r} does not exist; generate it with gen-demos"
        )
    os.makedirs(cfg.out, exist_ok=True)
    resolved = render_config(cfg)
    with open(os.path.join(cfg.out, "config.txt"), "w", encoding="ascii", newline="\n") as fh:
        fh.write(resolved)

    probe_env = make_env(cfg.env, seed=0, max_steps=cfg.max_steps, threshold=cfg.threshold)
    topo_cfg = _effective_topo(cfg, load_demos(cfg.demos), probe_env)

    logs = []
    for seed in cfg.seeds:
        seed_dir = os.path.join(cfg.out, f"seed_{seed}")
        os.makedirs(seed_dir, exist_ok=True)
        env = make_env(cfg.env, seed=seed, max_steps=cfg.max_steps, threshold=cfg.threshold)
        demo_buf = load_demos(cfg.demos)
        demo_buf.replacement_enabled = cfg.replace_demos
        try:
            result = train(
                env, demo_buf, topo_cfg, cfg.episodes, seed,
                csv_path=os.path.join(seed_dir, "log.csv"),
            )
        except TrainingAbort as exc:
            # the aborted seed's partial CSV is already flushed by train()
            raise TrainingAbort(
                f"seed {seed} aborted after {len(logs)} completed seed(s); "
                f"summary under {cfg.out!r} is partial: {exc}"
            ) from exc
        save_checkpoint(
            os.path.join(seed_dir, "checkpoint.npz"),
            result.theta, result.arch, resolved,
        )
        logs.append(result.log)

    agg = aggregate_logs(logs)
    write_aggregate_csv(agg, os.path.join(cfg.out, "aggregate.csv"))
    render_learning_curves(
        agg, os.path.join(cfg.out, "aggregate.png"), title=f"{cfg.env} ({len(cfg.seeds)} seeds)"
    )
    return RunSummary(
        out=cfg.out,
        per_seed_logs=logs,
        aggregate=agg,
        final_mean_mmd=float(agg["mean_mmd"][-1]),
    )


# -- comparison -------------------------------------------------------------


@dataclass
class ComparisonReport:
    final_window_success: tuple[float, float]
    first_success_median: tuple[float, float]
    mmd_trend: tuple[float, float]
    window: int

    def to_text(self) -> str:
        lines = [f"window = {self.window}"]
        for name, pair in (
            ("final_window_success", self.final_window_success),
            ("first_success_median", self.first_success_median),
            ("mmd_trend", self.mmd_trend),
        ):
            lines.append(f"{name}_topo = {repr(float(pair[0]))}")
            lines.append(f"{name}_baseline = {repr(float(pair[1]))}")
            lines.append(f"{name}_delta = {repr(float(pair[0] - pair[1]))}")
        return "\n".join(lines) + "\n"


def first_success_episode(log: dict[str, np.ndarray]) -> int:
    """Episode index of the first success; the episode count if none."""
    hits = np.nonzero(log["success"] >= 1.0)[0]
    if hits.size == 0:
        return int(log["success"].shape[0])
    return int(log["episode"][hits[0]])


def mmd_trend(agg: dict[str, np.ndarray]) -> float:
    """Mean distance over the last tenth of episodes minus the first tenth."""
    n = agg["mean_mmd"].shape[0]
    chunk = max(1, n // 10)
    return float(agg["mean_mmd"][-chunk:].mean() - agg["mean_mmd"][:chunk].mean())


def compare_runs(
    topo_dir: str,
    baseline_dir: str,
    out_dir: str | None = None,
    window: int = 50,
) -> ComparisonReport:
    """Compare two experiment directories over an identical episode grid."""
    topo_agg = read_csv(os.path.join(topo_dir, "aggregate.csv"))
    base_agg = read_csv(os.path.join(baseline_dir, "aggregate.csv"))
    if not np.array_equal(topo_agg["episode"], base_agg["episode"]):
        raise ConfigError("episode grids differ between the two runs")

    n = topo_agg["episode"].shape[0]
    w = min(window, n)
    final_success = (
        float(topo_agg["mean_success"][-w:].mean()),
        float(base_agg["mean_success"][-w:].mean()),
    )

    medians = []
    for d in (topo_dir, baseline_dir):
        seed_csvs = sorted(glob.glob(os.path.join(d, "seed_*", "log.csv")))
        if not seed_csvs:
            raise ConfigError(f"no per-seed logs found under {d!r}")
        medians.append(
            float(statistics.median(first_success_episode(read_csv(p)) for p in seed_csvs))
        )

    report = ComparisonReport(
        final_window_success=final_success,
        first_success_median=(medians[0], medians[1]),
        mmd_trend=(mmd_trend(topo_agg), mmd_trend(base_agg)),
        window=w,
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "comparison.txt"), "w", encoding="ascii", newline="\n") as fh:
            fh.write(report.to_text())
        render_comparison(topo_agg, base_agg, os.path.join(out_dir, "comparison.png"))
    return report


# -- checkpoints and evaluation ---------------------------------------------


def save_checkpoint(path: str, theta: np.ndarray, arch: Architecture, config_text: str) -> None:
    np.savez(
        path,
        theta=theta,
        arch=arch.to_json(),
        config=config_text,
        config_sha=hashlib.sha256(config_text.encode("ascii")).hexdigest(),
    )


def load_checkpoint(path: str) -> tuple[np.ndarray, Architecture, str]:
    try:
        data = np.load(path, allow_pickle=False)
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint {path!r}: {exc}") from None
    return (
        np.asarray(data["theta"], dtype=float),
        Architecture.from_json(str(data["arch"])),
        str(data["config"]),
    )


def evaluate(checkpoint_path: str, episodes: int, seed: int = 0) -> dict[str, float]:
    """Roll out a saved policy and report mean return and success rate."""
    theta, arch, config_text = load_checkpoint(checkpoint_path)
    values = {}
    for line in config_text.splitlines():
        if "=" in line:
            key, val = (p.strip() for p in line.split("=", 1))
            values[key] = val
    env = make_env(
        values.get("env", "kdt-small"),
        seed=seed,
        max_steps=int(values["max_steps"]) if "max_steps" in values else None,
        threshold=float(values["threshold"]) if "threshold" in values else None,
    )
    net = PolicyValueNet(arch)
    rng = np.random.default_rng(seed)
    returns, successes = [], []
    for episode in range(episodes):
        obs = env.reset()
        total = 0.0
        crossed = False
        for _ in range(env.spec.max_steps):
            action, _ = sample_action(net.distribution(theta, obs), rng)
            obs, reward, done = env.step(action)
            total += reward
            if isinstance(env, SparsePointMass) and obs[0] >= env.cfg.threshold:
                crossed = True
            if done:
                break
        returns.append(total)
        successes.append(crossed if isinstance(env, SparsePointMass) else total > 0)
    return {
        "episodes": float(episodes),
        "mean_return": float(np.mean(returns)),
        "success_rate": float(np.mean(successes)),
    }
