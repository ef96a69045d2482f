"""Run configuration: packaged variant defaults, then a config file, then explicit overrides."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .common import ConfigurationError, load_json_document
from .envs import EnvConfig, EnvVariant
from .ppo import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig
    train: TrainConfig


def _target_pose_entry(data: dict[str, Any]) -> dict[str, Any] | None:
    position = data.pop("target_position", None)
    orientation = data.pop("target_orientation", None)
    if position is None and orientation is None:
        return None
    pose = dict(data.get("target_pose") or {})
    if position is not None:
        pose["position"] = position
    if orientation is not None:
        pose["orientation"] = orientation
    nominal = EnvConfig().target_pose
    pose.setdefault("position", nominal.position.tolist())
    pose.setdefault("orientation", nominal.orientation.tolist())
    return pose


def load_run_config(
    path: str | Path | None = None,
    *,
    variant: EnvVariant | str | None = None,
    env_overrides: dict[str, Any] | None = None,
    train_overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """Resolve environment and training configs; ``None`` overrides are ignored."""
    data = dict(load_json_document(path)) if path is not None else {}
    data.pop("format_version", None)
    train_data = data.pop("train", None) or {}
    if not isinstance(train_data, dict):
        raise ConfigurationError(f"{path}: `train` must be an object")

    selected = variant or data.pop("variant", None) or EnvVariant.MARA
    data.pop("variant", None)
    pose = _target_pose_entry(data)
    if pose is not None:
        data["target_pose"] = pose

    env_values = {**data, **{k: v for k, v in (env_overrides or {}).items() if v is not None}}
    if isinstance(data.get("reward_params"), dict) and isinstance(env_values.get("reward_params"), dict):
        env_values["reward_params"] = {**data["reward_params"], **env_values["reward_params"]}
    env_config = EnvConfig.from_dict({"variant": EnvVariant.parse(selected).value, **env_values})

    train_values = {**train_data, **{k: v for k, v in (train_overrides or {}).items() if v is not None}}
    train_config = TrainConfig.for_variant(env_config.variant.value, **train_values)
    return RunConfig(env=env_config, train=train_config)
