import math

import numpy as np
import pytest

from reach_gym import Capsule, CollisionScene, ContractViolation, check_state, forward_kinematics
from reach_gym import load_robot_description, segment_segment_distance
from reach_gym.collision import ContactReport, capsule_world_segments
from reach_gym.common import ConfigurationError
from reach_gym.kinematics import Pose


def grid_segment_distance(a0, a1, b0, b1, samples=1000):
    s = np.linspace(0.0, 1.0, samples)
    points_a = a0 + s[:, None] * (a1 - a0)
    points_b = b0 + s[:, None] * (b1 - b0)
    best = math.inf
    for start in range(0, samples, 100):
        chunk = points_a[start : start + 100]
        diff = chunk[:, None, :] - points_b[None, :, :]
        best = min(best, float(np.sqrt(np.min(np.sum(diff * diff, axis=-1)))))
    return best


def point_segment_distances(points, a, b):
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-24:
        t = np.zeros(len(points))
    else:
        t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.linalg.norm(points - closest, axis=1)


def sample_capsule_surface(a, b, radius, count, rng):
    """Area-weighted uniform samples on the capsule surface."""
    axis = b - a
    length = float(np.linalg.norm(axis))
    direction = axis / length if length > 0 else np.array([0.0, 0.0, 1.0])
    helper = np.array([1.0, 0.0, 0.0]) if abs(direction[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(direction, helper)
    u /= np.linalg.norm(u)
    v = np.cross(direction, u)

    side_area = 2 * math.pi * radius * length
    sphere_area = 4 * math.pi * radius * radius
    n_side = int(round(count * side_area / (side_area + sphere_area)))
    theta = rng.uniform(0, 2 * math.pi, n_side)
    along = rng.uniform(0, 1, n_side)
    side = (
        a
        + along[:, None] * axis
        + radius * (np.cos(theta)[:, None] * u + np.sin(theta)[:, None] * v)
    )
    normals = rng.normal(size=(count - n_side, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    heads = np.where((normals @ direction)[:, None] >= 0, b, a) + radius * normals
    return np.vstack([side, heads])


def oracle_colliding(scene: CollisionScene, poses, rng, count=3000):
    segments = capsule_world_segments(scene, poses)
    for i, (a, b) in enumerate(segments):
        capsule = scene.capsules[i]
        points = sample_capsule_surface(a, b, capsule.radius, count, rng)
        if capsule.link_index not in scene.mounted_links and np.any(points[:, 2] < scene.table_height):
            return True
        for j, (c, d) in enumerate(segments):
            if j == i or (i, j) in scene.ignore_pairs:
                continue
            if np.any(point_segment_distances(points, c, d) < scene.capsules[j].radius):
                return True
    return False


def test_parallel_segments_one_apart():
    assert segment_segment_distance((0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)) == pytest.approx(1.0, abs=1e-12)


def test_crossing_segments_touch():
    assert segment_segment_distance((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0)) == pytest.approx(0.0, abs=1e-12)


def test_degenerate_segments_are_points():
    assert segment_segment_distance((0, 0, 0), (0, 0, 0), (3, 4, 0), (3, 4, 0)) == pytest.approx(5.0)
    assert segment_segment_distance((0, 0, 1), (0, 0, 1), (-1, 0, 0), (1, 0, 0)) == pytest.approx(1.0)


def test_segment_distance_matches_grid_oracle():
    rng = np.random.default_rng(21)
    for _ in range(20):
        a0, b0 = rng.uniform(-0.2, 0.2, size=(2, 3))
        a1 = a0 + rng.uniform(-0.06, 0.06, size=3)
        b1 = b0 + rng.uniform(-0.06, 0.06, size=3)
        exact = segment_segment_distance(a0, a1, b0, b1)
        oracle = grid_segment_distance(a0, a1, b0, b1)
        assert exact >= 0
        assert exact <= oracle + 1e-12
        assert oracle - exact < 1e-4


def test_home_pose_is_collision_free():
    description = load_robot_description("mara-like")
    poses = forward_kinematics(description.model, [0.0] * 6)
    report = check_state(description.scene, poses)

    assert report.colliding is False
    assert report.min_separation > 0


def test_forearm_below_table_collides():
    description = load_robot_description("mara-like")
    poses = forward_kinematics(description.model, [0.0, 2.2, 0.0, 0.0, 0.0, 0.0])
    report = check_state(description.scene, poses)

    assert report.colliding is True
    assert report.min_separation < 0
    assert report.pair is not None


def test_check_state_rejects_pose_count_mismatch():
    description = load_robot_description("mara-like")
    poses = forward_kinematics(description.model, [0.0] * 6)
    with pytest.raises(ContractViolation):
        check_state(description.scene, poses[:-1])


def test_contact_report_invariant():
    with pytest.raises(ContractViolation):
        ContactReport(colliding=True, min_separation=0.01)


def test_scene_validation():
    capsule = Capsule(5, (0, 0, 0), (0, 0, 0.1), 0.02)
    with pytest.raises(ConfigurationError):
        CollisionScene(capsules=(capsule,), n_frames=3)
    with pytest.raises(ConfigurationError):
        Capsule(0, (0, 0, 0), (0, 0, 0.1), 0.0)

    scene = CollisionScene(
        capsules=(Capsule(0, (0, 0, 0), (0, 0, 1), 0.1), Capsule(1, (0, 0, 0), (1, 0, 0), 0.1)),
        n_frames=2,
        ignore_pairs=frozenset({(1, 0)}),
    )
    assert (0, 1) in scene.ignore_pairs and (1, 0) in scene.ignore_pairs


def test_collision_detector_agrees_with_point_sampling_oracle():
    description = load_robot_description("mara-like")
    model, scene = description.model, description.scene
    rng = np.random.default_rng(2024)
    sampler = np.random.default_rng(99)
    agreements = 0
    for _ in range(1000):
        angles = rng.uniform(model.lower_limits, model.upper_limits)
        poses = forward_kinematics(model, angles)
        report = check_state(scene, poses)
        if report.colliding == oracle_colliding(scene, poses, sampler):
            agreements += 1
        else:
            assert abs(report.min_separation) <= 2e-3
    assert agreements >= 990


def test_check_state_invariant_under_horizontal_translation():
    description = load_robot_description("mara-like")
    rng = np.random.default_rng(4)
    for _ in range(50):
        angles = rng.uniform(description.model.lower_limits, description.model.upper_limits)
        poses = forward_kinematics(description.model, angles)
        shift = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2), 0.0])
        moved = [Pose(pose.position + shift, pose.orientation) for pose in poses]
        first = check_state(description.scene, poses)
        second = check_state(description.scene, moved)
        assert first.colliding == second.colliding
        assert first.min_separation == pytest.approx(second.min_separation, abs=1e-12)


def test_growing_radii_never_clears_a_collision():
    description = load_robot_description("mara-like")
    rng = np.random.default_rng(8)
    grown = description.scene.with_margin(0.005)
    for _ in range(200):
        angles = rng.uniform(description.model.lower_limits, description.model.upper_limits)
        poses = forward_kinematics(description.model, angles)
        if check_state(description.scene, poses).colliding:
            assert check_state(grown, poses).colliding
