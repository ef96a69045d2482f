import json

import numpy as np
import pytest

from reach_gym import (
    AccuracyReport,
    BenchmarkError,
    EnvConfig,
    PolicyParams,
    Pose,
    benchmark,
    evaluate_policy,
    load_robot_description,
    make_env,
    render_accuracy_table,
    save_checkpoint,
)
from reach_gym.benchmark import AxisError, read_accuracy_report, write_accuracy_report


def home_target_env(variant):
    home = load_robot_description("mara-like").home_pose()
    return make_env(EnvConfig.for_variant(variant, target_pose=Pose(home.position, home.orientation)))


def hold_still(observation):
    return np.zeros(6)


def test_perfect_policy_has_zero_error():
    report = evaluate_policy(home_target_env("Mara"), hold_still, 5)

    assert report.n_runs == 5 and report.successes == 5 and report.collisions == 0
    for error in report.position.values():
        assert error.mean == pytest.approx(0.0, abs=1e-9)
        assert error.std == pytest.approx(0.0, abs=1e-9)
    assert report.orientation is None
    assert report.mean_final_distance == pytest.approx(0.0, abs=1e-12)


def test_orientation_block_only_for_orientation_variants():
    for variant, expected in (
        ("Mara", False),
        ("MaraOrient", True),
        ("MaraCollision", False),
        ("MaraCollisionOrient", True),
    ):
        report = evaluate_policy(home_target_env(variant), hold_still, 2)
        assert (report.orientation is not None) is expected
        if expected:
            assert set(report.orientation) == {"roll", "pitch", "yaw"}
            assert all(abs(error.mean) < 1e-6 for error in report.orientation.values())


def test_position_errors_are_signed_millimeters():
    env = make_env(EnvConfig(max_episode_steps=1))
    report = evaluate_policy(env, hold_still, 3)

    # Home end effector at (0, 0, 1.10) against the (0.40, 0.10, 0.40) target.
    assert report.position["x"].mean == pytest.approx(-400.0, abs=1e-6)
    assert report.position["y"].mean == pytest.approx(-100.0, abs=1e-6)
    assert report.position["z"].mean == pytest.approx(700.0, abs=1e-6)
    assert report.successes == 0


def test_zero_runs_is_an_error():
    with pytest.raises(BenchmarkError):
        evaluate_policy(home_target_env("Mara"), hold_still, 0)


def test_negative_std_is_rejected():
    with pytest.raises(ValueError):
        AxisError(mean=0.0, std=-1.0)


def test_benchmark_is_deterministic_for_a_seed(tmp_path):
    params = PolicyParams.initialize(19, 6, np.random.default_rng(0), log_std_init=-1.0)
    path = save_checkpoint(tmp_path / "policy.npz", params)
    config = EnvConfig.for_variant("MaraOrient", max_episode_steps=20)

    first = benchmark(path, config, n_runs=3, seed=4)
    second = benchmark(path, config, n_runs=3, seed=4)

    assert first.position == second.position
    assert first.orientation == second.orientation
    assert all(error.std > 0 for error in first.position.values())


def test_report_files_are_identical_for_the_same_seed(tmp_path):
    params = PolicyParams.initialize(19, 6, np.random.default_rng(0), log_std_init=-1.0)
    path = save_checkpoint(tmp_path / "policy.npz", params)
    config = EnvConfig.for_variant("MaraCollisionOrient", max_episode_steps=20)

    first = write_accuracy_report(benchmark(path, config, n_runs=3, seed=4), tmp_path / "first.json")
    second = write_accuracy_report(benchmark(path, config, n_runs=3, seed=4), tmp_path / "second.json")

    assert first.read_bytes() == second.read_bytes()
    assert "generated_at" not in json.loads(first.read_text(encoding="utf-8"))


def test_markdown_table_lists_axes(tmp_path):
    orient = evaluate_policy(home_target_env("MaraOrient"), hold_still, 2)
    table = render_accuracy_table(orient)
    assert "| Distance (mm) | 0.00 ± 0.00 | 0.00 ± 0.00 | 0.00 ± 0.00 |" in table
    assert "| Orientation (deg) |" in table
    assert "Runs: 2 (successes: 2, collisions: 0)" in table
    assert "MaraOrient" in table

    plain = render_accuracy_table(evaluate_policy(home_target_env("Mara"), hold_still, 1), title="Reach")
    assert plain.startswith("### Reach")
    assert "Orientation" not in plain


def test_report_json_round_trip(tmp_path):
    report = evaluate_policy(home_target_env("MaraCollisionOrient"), hold_still, 2)
    path = write_accuracy_report(report, tmp_path / "reports" / "accuracy.json")

    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["schema_version"] == 1
    assert set(data["position_mm"]) == {"x", "y", "z"}
    restored = read_accuracy_report(path)
    assert restored.position == report.position
    assert restored.orientation == report.orientation
    assert restored.successes == 2

    data["schema_version"] = 99
    with pytest.raises(BenchmarkError):
        AccuracyReport.from_dict(data)
