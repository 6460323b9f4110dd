"""Desk-scale sparse-reward environments behind one reset/step interface."""

from __future__ import annotations

from ..errors import ConfigError
from .gridworld import GridMap, KeyDoorTreasure, distance_field, load_map, parse_map
from .pointmass import PointMassConfig, SparsePointMass
from .spec import BoxActions, DiscreteActions, EnvSpec

ENV_NAMES = ("kdt", "kdt-small", "pointmass", "pointmass-far")


def make_env(
    name: str,
    seed: int | None = None,
    max_steps: int | None = None,
    threshold: float | None = None,
):
    """Build an environment by CLI name, optionally overriding its episode cap."""
    if name == "kdt":
        return KeyDoorTreasure(load_map("kdt"), max_steps=max_steps or 400)
    if name == "kdt-small":
        return KeyDoorTreasure(load_map("kdt_small"), max_steps=max_steps or 150)
    if name in ("pointmass", "pointmass-far"):
        cfg = PointMassConfig(
            threshold=threshold if threshold is not None
            else (10.0 if name == "pointmass-far" else 1.0),
            max_steps=max_steps or 200,
        )
        return SparsePointMass(cfg, seed=seed)
    raise ConfigError(f"unknown environment {name!r}; choose one of {ENV_NAMES}")


__all__ = [
    "BoxActions",
    "DiscreteActions",
    "EnvSpec",
    "ENV_NAMES",
    "GridMap",
    "KeyDoorTreasure",
    "PointMassConfig",
    "SparsePointMass",
    "distance_field",
    "load_map",
    "make_env",
    "parse_map",
]
