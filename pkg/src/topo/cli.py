"""Command-line interface.

Subcommands:
    train      run a seeded experiment from a config file
    gen-demos  write scripted demonstrations to a file
    compare    compare an experiment directory against a baseline directory
    eval       roll out a saved checkpoint

Exit codes: 0 success, 1 configuration error, 2 runtime abort.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources

from .demos import DemoBuffer, generate_demos, save_demos
from .errors import ConfigError, GenerationError, TrainingAbort
from .harness import (
    build_experiment_config,
    compare_runs,
    evaluate,
    parse_config_file,
    run_experiment,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # route argparse failures to exit code 1
        raise ConfigError(message)


def _resolve_config_path(name: str) -> str:
    import os

    if os.path.exists(name):
        return name
    bundled = resources.files("topo").joinpath(f"configs/{name}.cfg")
    if bundled.is_file():
        return str(bundled)
    raise ConfigError(f"config {name!r} is neither a file nor a bundled config name")


def _build_parser() -> _Parser:
    parser = _Parser(prog="topo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a seeded training experiment")
    p_train.add_argument("--config", required=True,
                         help="config file path or bundled name (kdt, kdt-small, pointmass, pointmass-far)")
    p_train.add_argument("--seed", type=int, action="append", default=None,
                         help="seed to run; repeat for several (overrides the config)")
    p_train.add_argument("--baseline", action="store_true",
                         help="disable the intrinsic reward (sigma = 0)")
    p_train.add_argument("--out", default=None, help="output directory")
    p_train.add_argument("--env", default=None,
                         help="environment name (kdt, kdt-small, pointmass, pointmass-far)")
    p_train.add_argument("--episodes", type=int, default=None)
    p_train.add_argument("--demos", default=None, help="demo file path")
    p_train.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="override any config key")

    p_gen = sub.add_parser("gen-demos", help="generate scripted demonstrations")
    p_gen.add_argument("--env", required=True)
    p_gen.add_argument("--count", type=int, default=5)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--demo-noise", type=float, default=0.0,
                       help="per-step probability of a uniformly random expert action")
    p_gen.add_argument("--seed", type=int, default=0)

    p_cmp = sub.add_parser("compare", help="compare two experiment directories")
    p_cmp.add_argument("--topo", required=True, help="experiment directory")
    p_cmp.add_argument("--baseline", required=True, help="baseline directory")
    p_cmp.add_argument("--out", default=None, help="directory for the report and figure")
    p_cmp.add_argument("--window", type=int, default=50)

    p_eval = sub.add_parser("eval", help="roll out a saved checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_train(args) -> int:
    file_values = parse_config_file(_resolve_config_path(args.config))
    overrides: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seed:
        overrides["seeds"] = ",".join(str(s) for s in args.seed)
    if args.out is not None:
        overrides["out"] = args.out
    if args.env is not None:
        overrides["env"] = args.env
    if args.episodes is not None:
        overrides["episodes"] = str(args.episodes)
    if args.demos is not None:
        overrides["demos"] = args.demos
    if args.baseline:
        overrides["baseline"] = "true"
    cfg = build_experiment_config(file_values, overrides)
    summary = run_experiment(cfg)
    final = summary.aggregate["mean_success"][-min(50, len(summary.aggregate['episode'])):].mean()
    print(f"done: {len(cfg.seeds)} seed(s), {cfg.episodes} episodes each -> {cfg.out}")
    print(f"final-window success rate: {final:.3f}; final mean MMD^2: {summary.final_mean_mmd:.4f}")
    return 0


def _cmd_gen_demos(args) -> int:
    demos = generate_demos(args.env, args.count, noise=args.demo_noise, seed=args.seed)
    save_demos(DemoBuffer(demos=demos, capacity=len(demos)), args.out)
    returns = ", ".join(f"{d.episode_return:.1f}" for d in demos)
    print(f"wrote {len(demos)} demos to {args.out} (returns: {returns})")
    return 0


def _cmd_compare(args) -> int:
    report = compare_runs(args.topo, args.baseline, out_dir=args.out, window=args.window)
    sys.stdout.write(report.to_text())
    return 0


def _cmd_eval(args) -> int:
    stats = evaluate(args.checkpoint, args.episodes, seed=args.seed)
    print(
        f"episodes: {int(stats['episodes'])}  mean return: {stats['mean_return']:.3f}  "
        f"success rate: {stats['success_rate']:.3f}"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "gen-demos":
            return _cmd_gen_demos(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_eval(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (TrainingAbort, GenerationError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
