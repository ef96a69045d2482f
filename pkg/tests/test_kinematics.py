import math

import numpy as np
import pytest

from reach_gym import ContractViolation, JointState, Pose, RobotModel, forward_kinematics, load_robot_description
from reach_gym import quaternion_angle, rms_distance
from reach_gym.common import ConfigurationError
from reach_gym.kinematics import (
    JointSpec,
    quat_from_axis_angle,
    quat_multiply,
    quat_to_euler_xyz,
    quat_to_matrix,
    relative_orientation_xyz,
)


def rodrigues(axis, angle):
    axis = np.asarray(axis, dtype=float)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * k @ k


def homogeneous(rotation=np.eye(3), translation=(0.0, 0.0, 0.0)):
    transform = np.eye(4)
    transform[:3, :3] = rotation
    transform[:3, 3] = translation
    return transform


def quat_matrix_oracle(q):
    w, x, y, z = q
    angle = 2 * math.atan2(math.sqrt(x * x + y * y + z * z), w)
    if angle == 0:
        return np.eye(3)
    norm = math.sqrt(x * x + y * y + z * z)
    return rodrigues((x / norm, y / norm, z / norm), angle)


def homogeneous_fk(model: RobotModel, angles):
    transform = homogeneous(
        quat_matrix_oracle(model.base_pose.orientation), model.base_pose.position
    )
    frames = [transform]
    for joint, angle in zip(model.joints, angles):
        transform = transform @ homogeneous(translation=joint.offset)
        transform = transform @ homogeneous(quat_matrix_oracle(joint.rotation))
        transform = transform @ homogeneous(rodrigues(joint.axis, angle))
        frames.append(transform)
    transform = transform @ homogeneous(quat_matrix_oracle(model.tool_rotation), model.tool_offset)
    frames.append(transform)
    return frames


def random_unit_quaternion(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def test_home_pose_of_default_model_is_golden():
    model = load_robot_description("mara-like").model
    poses = forward_kinematics(model, JointState.at_rest([0.0] * 6))

    assert len(poses) == model.n_frames == 8
    np.testing.assert_allclose(poses[-1].position, [0.0, 0.0, 1.10], atol=1e-12)
    np.testing.assert_allclose(poses[-1].orientation, [1.0, 0.0, 0.0, 0.0], atol=1e-12)


def test_single_joint_quarter_turn_about_z():
    length = 0.7
    joint = JointSpec("j", (0, 0, 1), (0, 0, 0), (1, 0, 0, 0), -math.pi, math.pi, 1.57)
    model = RobotModel("single", (joint,), tool_offset=(length, 0.0, 0.0))

    ee = forward_kinematics(model, [math.pi / 2])[-1]

    np.testing.assert_allclose(ee.position, [0.0, length, 0.0], atol=1e-12)


def test_forward_kinematics_matches_homogeneous_oracle():
    model = load_robot_description("mara-like").model
    rng = np.random.default_rng(7)
    for _ in range(1000):
        angles = rng.uniform(model.lower_limits, model.upper_limits)
        poses = forward_kinematics(model, angles)
        frames = homogeneous_fk(model, angles)
        for pose, frame in zip(poses, frames):
            assert np.max(np.abs(pose.position - frame[:3, 3])) < 1e-9
            assert np.max(np.abs(quat_to_matrix(pose.orientation) - frame[:3, :3])) < 1e-9
            assert abs(np.linalg.norm(pose.orientation) - 1.0) < 1e-9


def test_forward_kinematics_with_tilted_joint_frames():
    rng = np.random.default_rng(11)
    joints = tuple(
        JointSpec(
            f"j{i}",
            (1.0, 0.0, 0.0) if i % 2 else (0.0, 0.0, 1.0),
            rng.uniform(-0.2, 0.2, size=3),
            random_unit_quaternion(rng),
            -2.0,
            2.0,
            1.0,
        )
        for i in range(4)
    )
    model = RobotModel(
        "tilted",
        joints,
        base_pose=Pose((0.1, -0.2, 0.05), random_unit_quaternion(rng)),
        tool_offset=(0.0, 0.05, 0.1),
        tool_rotation=random_unit_quaternion(rng),
    )
    for _ in range(50):
        angles = rng.uniform(-2.0, 2.0, size=4)
        ee = forward_kinematics(model, angles)[-1]
        frame = homogeneous_fk(model, angles)[-1]
        assert np.max(np.abs(ee.position - frame[:3, 3])) < 1e-9
        assert np.max(np.abs(quat_to_matrix(ee.orientation) - frame[:3, :3])) < 1e-9


def test_forward_kinematics_rejects_wrong_joint_count():
    model = load_robot_description("mara-like").model
    with pytest.raises(ContractViolation):
        forward_kinematics(model, [0.0] * 5)


def test_joint_spec_rejects_bad_axis_and_limits():
    with pytest.raises(ConfigurationError):
        JointSpec("j", (0, 0, 2), (0, 0, 0), (1, 0, 0, 0), -1.0, 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        JointSpec("j", (0, 0, 1), (0, 0, 0), (1, 0, 0, 0), 1.0, -1.0, 1.0)


def test_quaternion_angle_basic_cases():
    rng = np.random.default_rng(3)
    q = random_unit_quaternion(rng)
    assert quaternion_angle(q, q) == pytest.approx(0.0, abs=1e-7)
    assert quaternion_angle(q, -q) == pytest.approx(0.0, abs=1e-7)
    quarter = quat_from_axis_angle((0, 0, 1), math.pi / 2)
    assert quaternion_angle((1, 0, 0, 0), quarter) == pytest.approx(math.pi / 2, abs=1e-12)
    with pytest.raises(ContractViolation):
        quaternion_angle((0, 0, 0, 0), quarter)


def test_quaternion_angle_properties():
    rng = np.random.default_rng(5)
    for _ in range(500):
        qa = random_unit_quaternion(rng)
        qb = random_unit_quaternion(rng)
        assert quaternion_angle(qa, qb) == quaternion_angle(qb, qa)
        assert 0.0 <= quaternion_angle(qa, qb) <= math.pi

        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0.1, math.pi - 0.1)
        r = quat_from_axis_angle(axis, angle)
        assert abs(quaternion_angle(qa, quat_multiply(qa, r)) - angle) < 1e-9


def test_quaternion_angle_matches_trace_formula():
    rng = np.random.default_rng(9)
    for _ in range(200):
        qa = random_unit_quaternion(rng)
        qb = random_unit_quaternion(rng)
        relative = quat_to_matrix(qa).T @ quat_to_matrix(qb)
        trace_angle = math.acos(max(-1.0, min(1.0, (np.trace(relative) - 1.0) / 2.0)))
        assert quaternion_angle(qa, qb) == pytest.approx(trace_angle, abs=1e-6)


def test_rms_distance_examples():
    assert rms_distance((0.3, 0.2, 0.1), (0.3, 0.2, 0.1)) == 0.0
    assert rms_distance((1.0, 1.0, 1.0), (0.0, 0.0, 0.0)) == pytest.approx(1.0, abs=1e-15)
    assert rms_distance((0.03, 0.0, 0.0), (0.0, 0.0, 0.0)) == pytest.approx(0.03 / math.sqrt(3), abs=1e-15)


def test_rms_distance_triangle_inequality():
    rng = np.random.default_rng(13)
    for _ in range(1000):
        a, b, c = rng.normal(size=(3, 3))
        assert rms_distance(a, c) <= rms_distance(a, b) + rms_distance(b, c) + 1e-12
        assert rms_distance(a, b) == pytest.approx(np.linalg.norm(a - b) / math.sqrt(3), rel=1e-12)


def test_relative_orientation_is_zero_for_matching_frames_and_recovers_single_axis():
    q = quat_from_axis_angle((0, 0, 1), 0.3)
    assert relative_orientation_xyz(q, q) == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)

    tilted = quat_multiply(q, quat_from_axis_angle((1, 0, 0), 0.2))
    roll, pitch, yaw = relative_orientation_xyz(tilted, q)
    assert roll == pytest.approx(0.2, abs=1e-12)
    assert pitch == pytest.approx(0.0, abs=1e-12)
    assert yaw == pytest.approx(0.0, abs=1e-12)
    assert quat_to_euler_xyz(quat_from_axis_angle((0, 1, 0), -0.4))[1] == pytest.approx(-0.4, abs=1e-12)


def test_pose_rejects_non_unit_orientation():
    with pytest.raises(ContractViolation):
        Pose((0.0, 0.0, 0.0), (1.0, 1.0, 0.0, 0.0))
