"""Forward kinematics and quaternion math for serial revolute chains.

Quaternions are scalar-first ``(w, x, y, z)`` and compose with the Hamilton
product everywhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import math
from typing import Sequence

import numpy as np

from .common import ConfigurationError, ContractViolation


AXIS_TOLERANCE = 1e-12
POSE_TOLERANCE = 1e-9
ANGLE_INPUT_TOLERANCE = 1e-6
IDENTITY_QUATERNION = (1.0, 0.0, 0.0, 0.0)


def _frozen(values, size: int, label: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64).reshape(-1)
    if array.shape != (size,):
        raise ContractViolation(f"{label} must have {size} entries, got {array.shape[0]}")
    array.flags.writeable = False
    return array


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]], dtype=np.float64)


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    norm = float(np.linalg.norm(q))
    if not np.isfinite(norm) or norm < 1e-12:
        raise ContractViolation("Cannot normalize a zero or non-finite quaternion")
    return q / norm


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    half = 0.5 * angle
    s = math.sin(half)
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    u = q[1:]
    t = 2.0 * np.cross(u, v)
    return v + q[0] * t + np.cross(u, t)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_to_euler_xyz(q) -> tuple[float, float, float]:
    """Fixed-axis XYZ angles (roll about x, then pitch about y, then yaw about z)."""
    w, x, y, z = quat_normalize(q)
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    pitch = math.asin(max(-1.0, min(1.0, 2.0 * (w * y - z * x))))
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return roll, pitch, yaw


def relative_orientation_xyz(q_robot, q_target) -> tuple[float, float, float]:
    """Signed per-axis rotation from the target frame to the end-effector frame."""
    relative = quat_multiply(quat_conjugate(quat_normalize(q_target)), quat_normalize(q_robot))
    return quat_to_euler_xyz(relative)


def quaternion_angle(qa, qb) -> float:
    """Geodesic angle between two orientations, ``2 acos |<qa, qb>|`` in ``[0, pi]``."""
    a = quat_normalize(qa)
    b = quat_normalize(qb)
    dot = abs(float(np.dot(a, b)))
    return 2.0 * math.acos(min(1.0, max(0.0, dot)))


def rms_distance(p_robot, p_target) -> float:
    """Root-mean-square per-axis difference; the Euclidean distance over sqrt(3)."""
    delta = np.asarray(p_robot, dtype=np.float64) - np.asarray(p_target, dtype=np.float64)
    return math.sqrt(float(np.dot(delta, delta)) / 3.0)


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array(IDENTITY_QUATERNION))

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position, 3, "position"))
        orientation = _frozen(self.orientation, 4, "orientation")
        if abs(float(np.linalg.norm(orientation)) - 1.0) >= POSE_TOLERANCE:
            raise ContractViolation(f"Pose orientation is not unit-norm: {orientation.tolist()}")
        object.__setattr__(self, "orientation", orientation)

    def to_dict(self) -> dict[str, list[float]]:
        return {"position": self.position.tolist(), "orientation": self.orientation.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Pose":
        return cls(
            position=data.get("position", (0.0, 0.0, 0.0)),
            orientation=quat_normalize(data.get("orientation", IDENTITY_QUATERNION)),
        )


@dataclass(frozen=True)
class JointSpec:
    name: str
    axis: np.ndarray
    offset: np.ndarray
    rotation: np.ndarray
    limit_lo: float
    limit_hi: float
    velocity_limit: float

    def __post_init__(self):
        axis = _frozen(self.axis, 3, f"joint {self.name} axis")
        if abs(float(np.linalg.norm(axis)) - 1.0) >= AXIS_TOLERANCE:
            raise ConfigurationError(f"Joint {self.name}: axis {axis.tolist()} is not unit-norm")
        rotation = _frozen(self.rotation, 4, f"joint {self.name} rotation")
        if abs(float(np.linalg.norm(rotation)) - 1.0) >= POSE_TOLERANCE:
            raise ConfigurationError(f"Joint {self.name}: rotation is not a unit quaternion")
        if not self.limit_lo < self.limit_hi:
            raise ConfigurationError(
                f"Joint {self.name}: limit_lo {self.limit_lo} must be below limit_hi {self.limit_hi}"
            )
        if self.velocity_limit <= 0:
            raise ConfigurationError(f"Joint {self.name}: velocity_limit must be positive")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "offset", _frozen(self.offset, 3, f"joint {self.name} offset"))


@dataclass(frozen=True)
class RobotModel:
    name: str
    joints: tuple[JointSpec, ...]
    base_pose: Pose = field(default_factory=lambda: Pose((0.0, 0.0, 0.0)))
    tool_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tool_rotation: np.ndarray = field(default_factory=lambda: np.array(IDENTITY_QUATERNION))

    def __post_init__(self):
        if not self.joints:
            raise ConfigurationError(f"Robot {self.name} has no joints")
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "tool_offset", _frozen(self.tool_offset, 3, "tool offset"))
        object.__setattr__(
            self, "tool_rotation", _frozen(quat_normalize(self.tool_rotation), 4, "tool rotation")
        )

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def n_frames(self) -> int:
        """Base frame, one frame per joint, then the end-effector."""
        return self.n_joints + 2

    @cached_property
    def lower_limits(self) -> np.ndarray:
        return np.array([joint.limit_lo for joint in self.joints])

    @cached_property
    def upper_limits(self) -> np.ndarray:
        return np.array([joint.limit_hi for joint in self.joints])

    @cached_property
    def velocity_limits(self) -> np.ndarray:
        return np.array([joint.velocity_limit for joint in self.joints])


@dataclass(frozen=True)
class JointState:
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        positions = np.array(self.positions, dtype=np.float64).reshape(-1)
        velocities = np.array(self.velocities, dtype=np.float64).reshape(-1)
        if positions.shape != velocities.shape:
            raise ContractViolation(
                f"JointState has {positions.size} positions but {velocities.size} velocities"
            )
        positions.flags.writeable = False
        velocities.flags.writeable = False
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "velocities", velocities)

    @classmethod
    def at_rest(cls, positions: Sequence[float]) -> "JointState":
        return cls(positions, np.zeros(len(positions)))

    def clamped(self, model: RobotModel) -> "JointState":
        return JointState(
            np.clip(self.positions, model.lower_limits, model.upper_limits),
            np.clip(self.velocities, -model.velocity_limits, model.velocity_limits),
        )


def forward_kinematics(model: RobotModel, q: JointState | Sequence[float]) -> list[Pose]:
    """Compose base pose, fixed joint offsets and joint rotations left to right.

    Returns ``model.n_frames`` poses: the base, each joint frame after its rotation,
    and the end-effector (tool offset applied to the last joint frame).
    """
    angles = q.positions if isinstance(q, JointState) else np.asarray(q, dtype=np.float64)
    if angles.shape != (model.n_joints,):
        raise ContractViolation(
            f"Robot {model.name} expects {model.n_joints} joint angles, got {angles.size}"
        )

    position = model.base_pose.position.copy()
    rotation = model.base_pose.orientation.copy()
    poses = [model.base_pose]
    for joint, angle in zip(model.joints, angles):
        position = position + quat_rotate(rotation, joint.offset)
        rotation = quat_multiply(rotation, joint.rotation)
        rotation = quat_multiply(rotation, quat_from_axis_angle(joint.axis, float(angle)))
        rotation = rotation / np.linalg.norm(rotation)
        poses.append(Pose(position, rotation))

    ee_position = position + quat_rotate(rotation, model.tool_offset)
    ee_rotation = quat_multiply(rotation, model.tool_rotation)
    poses.append(Pose(ee_position, ee_rotation / np.linalg.norm(ee_rotation)))
    return poses
