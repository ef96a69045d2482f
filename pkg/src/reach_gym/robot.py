"""Robot model description files: parsing, validation and the shipped models."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any

from .assets import resolve_robot_source
from .collision import Capsule, CollisionScene
from .common import ConfigurationError, load_json_document
from .kinematics import IDENTITY_QUATERNION, JointSpec, Pose, RobotModel, forward_kinematics


@dataclass(frozen=True)
class RobotDescription:
    model: RobotModel
    scene: CollisionScene
    source: Path | None = None

    def home_pose(self) -> Pose:
        return forward_kinematics(self.model, [0.0] * self.model.n_joints)[-1]


def _require(data: dict[str, Any], key: str, where: str) -> Any:
    if key not in data:
        raise ConfigurationError(f"{where}: missing `{key}`")
    return data[key]


def _parse_joint(raw: dict[str, Any], index: int, where: str) -> JointSpec:
    label = f"{where}: joint {index}"
    limits = _require(raw, "limits", label)
    if not isinstance(limits, (list, tuple)) or len(limits) != 2:
        raise ConfigurationError(f"{label}: `limits` must be [lo, hi]")
    return JointSpec(
        name=str(raw.get("name", f"joint{index + 1}")),
        axis=_require(raw, "axis", label),
        offset=raw.get("offset", (0.0, 0.0, 0.0)),
        rotation=raw.get("rotation", IDENTITY_QUATERNION),
        limit_lo=float(limits[0]),
        limit_hi=float(limits[1]),
        velocity_limit=float(raw.get("velocity_limit", 1.57)),
    )


def parse_robot_description(data: dict[str, Any], source: Path | None = None) -> RobotDescription:
    where = str(source) if source else "robot model"
    raw_joints = _require(data, "joints", where)
    if not isinstance(raw_joints, list) or not raw_joints:
        raise ConfigurationError(f"{where}: `joints` must be a non-empty list")

    try:
        joints = tuple(_parse_joint(raw, index, where) for index, raw in enumerate(raw_joints))
        tool = data.get("tool", {})
        model = RobotModel(
            name=str(data.get("name", source.stem if source else "robot")),
            joints=joints,
            base_pose=Pose.from_dict(data.get("base_pose", {})),
            tool_offset=tool.get("offset", (0.0, 0.0, 0.0)),
            tool_rotation=tool.get("rotation", IDENTITY_QUATERNION),
        )

        collision = data.get("collision", {})
        capsules = tuple(
            Capsule(
                link_index=int(_require(raw, "link", f"{where}: capsule {index}")),
                endpoint_a=raw.get("a", (0.0, 0.0, 0.0)),
                endpoint_b=raw.get("b", (0.0, 0.0, 0.0)),
                radius=float(_require(raw, "radius", f"{where}: capsule {index}")),
            )
            for index, raw in enumerate(collision.get("capsules", []))
        )
        ignore_pairs = collision.get("ignore_pairs")
        scene = CollisionScene(
            capsules=capsules,
            n_frames=model.n_frames,
            table_height=float(collision.get("table_height", 0.0)),
            ignore_pairs=(
                frozenset(tuple(pair) for pair in ignore_pairs) if ignore_pairs is not None else None
            ),
            mounted_links=frozenset(int(link) for link in collision.get("mounted_links", [0])),
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"{where}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{where}: malformed robot description ({exc})") from exc

    return RobotDescription(model=model, scene=scene, source=source)


@lru_cache(maxsize=16)
def _load_cached(path: Path, mtime: float) -> RobotDescription:
    return parse_robot_description(load_json_document(path), source=path)


def load_robot_description(robot: str | Path | None = None) -> RobotDescription:
    """Load a builtin robot by name (`mara-like`, `planar-2dof`) or a model file by path."""
    try:
        path = resolve_robot_source(robot).resolve()
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    return _load_cached(path, path.stat().st_mtime)
