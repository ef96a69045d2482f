"""Capsule self-collision and arm/table contact checks."""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Iterable, Sequence

import numpy as np

from .common import ConfigurationError, ContractViolation
from .kinematics import Pose, quat_rotate


TABLE = "table"


@dataclass(frozen=True)
class Capsule:
    link_index: int
    endpoint_a: np.ndarray
    endpoint_b: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError(f"Capsule on link {self.link_index}: radius must be positive")
        for name in ("endpoint_a", "endpoint_b"):
            value = np.array(getattr(self, name), dtype=np.float64).reshape(3)
            value.flags.writeable = False
            object.__setattr__(self, name, value)

    def grown(self, margin: float) -> "Capsule":
        return Capsule(self.link_index, self.endpoint_a, self.endpoint_b, self.radius + margin)


def adjacent_pairs(capsules: Sequence[Capsule]) -> frozenset[tuple[int, int]]:
    """Capsule pairs on the same or neighbouring links; they touch at joints by construction."""
    pairs = set()
    for i, first in enumerate(capsules):
        for j in range(i + 1, len(capsules)):
            if abs(first.link_index - capsules[j].link_index) <= 1:
                pairs.add((i, j))
    return _symmetric(pairs)


def _symmetric(pairs: Iterable[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    result = set()
    for i, j in pairs:
        result.add((int(i), int(j)))
        result.add((int(j), int(i)))
    return frozenset(result)


@dataclass(frozen=True)
class CollisionScene:
    capsules: tuple[Capsule, ...]
    n_frames: int
    table_height: float = 0.0
    ignore_pairs: frozenset[tuple[int, int]] | None = None
    mounted_links: frozenset[int] = field(default_factory=lambda: frozenset({0}))

    def __post_init__(self):
        capsules = tuple(self.capsules)
        object.__setattr__(self, "capsules", capsules)
        for index, capsule in enumerate(capsules):
            if not 0 <= capsule.link_index < self.n_frames:
                raise ConfigurationError(
                    f"Capsule {index} references link {capsule.link_index}, "
                    f"but the chain has {self.n_frames} frames"
                )
        if self.ignore_pairs is None:
            ignore = adjacent_pairs(capsules)
        else:
            ignore = _symmetric(self.ignore_pairs)
        for i, j in ignore:
            if not (0 <= i < len(capsules) and 0 <= j < len(capsules)):
                raise ConfigurationError(f"Ignore pair ({i}, {j}) references a missing capsule")
        object.__setattr__(self, "ignore_pairs", ignore)
        object.__setattr__(self, "mounted_links", frozenset(self.mounted_links))

    def with_margin(self, margin: float) -> "CollisionScene":
        return CollisionScene(
            capsules=tuple(capsule.grown(margin) for capsule in self.capsules),
            n_frames=self.n_frames,
            table_height=self.table_height,
            ignore_pairs=self.ignore_pairs,
            mounted_links=self.mounted_links,
        )


@dataclass(frozen=True)
class ContactReport:
    colliding: bool
    min_separation: float
    pair: tuple[str, str] | None = None

    def __post_init__(self):
        if self.colliding != (self.min_separation < 0):
            raise ContractViolation("ContactReport.colliding must equal min_separation < 0")


def _project_to_segment(point: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-24:
        return a
    t = float(np.dot(point - a, ab)) / denom
    return a + min(1.0, max(0.0, t)) * ab


def segment_segment_distance(a0, a1, b0, b1) -> float:
    """Exact minimum distance between the closed segments ``[a0, a1]`` and ``[b0, b1]``.

    The minimum of the squared distance over the unit square of segment parameters
    is either the interior stationary point or lies on one of the four edges, where
    it reduces to projecting an endpoint onto the other segment.
    """
    a0 = np.asarray(a0, dtype=np.float64)
    a1 = np.asarray(a1, dtype=np.float64)
    b0 = np.asarray(b0, dtype=np.float64)
    b1 = np.asarray(b1, dtype=np.float64)
    u = a1 - a0
    v = b1 - b0
    w0 = a0 - b0
    a = float(np.dot(u, u))
    b = float(np.dot(u, v))
    c = float(np.dot(v, v))
    d = float(np.dot(u, w0))
    e = float(np.dot(v, w0))
    denom = a * c - b * b

    candidates = [
        (_project_to_segment(b0, a0, a1), b0),
        (_project_to_segment(b1, a0, a1), b1),
        (a0, _project_to_segment(a0, b0, b1)),
        (a1, _project_to_segment(a1, b0, b1)),
    ]
    if denom > 1e-12 * max(a * c, 1e-300):
        s = (b * e - c * d) / denom
        t = (a * e - b * d) / denom
        if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
            candidates.append((a0 + s * u, b0 + t * v))

    best = min(float(np.dot(p - q, p - q)) for p, q in candidates)
    return math.sqrt(best)


def capsule_world_segments(scene: CollisionScene, link_poses: Sequence[Pose]) -> list[tuple[np.ndarray, np.ndarray]]:
    if len(link_poses) != scene.n_frames:
        raise ContractViolation(
            f"Collision scene expects {scene.n_frames} link poses, got {len(link_poses)}"
        )
    segments = []
    for capsule in scene.capsules:
        pose = link_poses[capsule.link_index]
        segments.append(
            (
                pose.position + quat_rotate(pose.orientation, capsule.endpoint_a),
                pose.position + quat_rotate(pose.orientation, capsule.endpoint_b),
            )
        )
    return segments


def check_state(scene: CollisionScene, link_poses: Sequence[Pose]) -> ContactReport:
    segments = capsule_world_segments(scene, link_poses)
    min_separation = math.inf
    worst: tuple[str, str] | None = None

    for i, (a0, a1) in enumerate(segments):
        radius_i = scene.capsules[i].radius
        for j in range(i + 1, len(segments)):
            if (i, j) in scene.ignore_pairs:
                continue
            b0, b1 = segments[j]
            separation = segment_segment_distance(a0, a1, b0, b1) - radius_i - scene.capsules[j].radius
            if separation < min_separation:
                min_separation = separation
                worst = (f"capsule-{i}", f"capsule-{j}")

        if scene.capsules[i].link_index in scene.mounted_links:
            continue
        clearance = min(float(a0[2]), float(a1[2])) - scene.table_height - radius_i
        if clearance < min_separation:
            min_separation = clearance
            worst = (f"capsule-{i}", TABLE)

    return ContactReport(colliding=min_separation < 0, min_separation=min_separation, pair=worst)
