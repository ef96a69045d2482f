import importlib
import json

from click.testing import CliRunner
import numpy as np
import pytest

from reach_gym import PolicyParams, cli, cli_main, save_checkpoint
from reach_gym.exporters import read_reward_surface_csv, read_trajectory_csv, write_metrics_log


def test_help_lists_subcommands():
    runner = CliRunner()
    result = runner.invoke(cli, ["-h"])

    assert result.exit_code == 0, result.output
    for command in ("train", "run", "benchmark", "random", "reward-surface", "plots"):
        assert command in result.output


def test_velocity_above_limit_is_a_validation_error():
    runner = CliRunner()
    result = runner.invoke(cli, ["random", "--velocity", "2.0", "--steps", "5"])

    assert result.exit_code == 2
    assert "1.57" in result.output


def test_environment_flags_without_a_subcommand_go_to_random(tmp_path):
    runner = CliRunner()
    result = runner.invoke(cli, ["--velocity", "2.0", "--steps", "5"])
    assert result.exit_code == 2
    assert "1.57" in result.output

    output = tmp_path / "trajectory.csv"
    result = runner.invoke(cli, ["--seed", "3", "--steps", "20", "-o", str(output)])
    assert result.exit_code == 0, result.output
    assert "Mara: 20 steps" in result.output
    assert len(read_trajectory_csv(output)) == 20

    result = runner.invoke(cli, ["random", "--bogus"])
    assert result.exit_code == 2
    assert "No such option" in result.output


def test_reward_surface_writes_grid(tmp_path):
    output = tmp_path / "surface.csv"
    runner = CliRunner()
    result = runner.invoke(cli, ["reward-surface", "--nx", "11", "--ny", "5", "-o", str(output)])

    assert result.exit_code == 0, result.output
    assert "Reward at x=0, y=0: 10.000000" in result.output
    lines = output.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x,y,reward"
    assert len(lines) == 1 + 55
    assert float(lines[1].split(",")[2]) == 10.0


def test_reward_surface_defaults_to_plain_hyperparameters(tmp_path):
    runner = CliRunner()
    plain = tmp_path / "plain.csv"
    tuned = tmp_path / "tuned.csv"
    assert runner.invoke(cli, ["reward-surface", "--nx", "3", "--ny", "3", "-o", str(plain)]).exit_code == 0
    result = runner.invoke(
        cli, ["reward-surface", "--variant", "MaraOrient", "--nx", "3", "--ny", "3", "-o", str(tuned)]
    )
    assert result.exit_code == 0, result.output

    # Row 2 is (x=0, y=pi/2); row 3 is (x=0, y=pi).
    plain_rows = read_reward_surface_csv(plain)
    tuned_rows = read_reward_surface_csv(tuned)
    assert plain_rows[1, 2] == pytest.approx(11.0 * (2.0 - 0.5**1.5) / 2.0 - 1.0, abs=1e-9)
    assert tuned_rows[1, 2] == pytest.approx(11.0 * (2.0 - 0.5**1.1) / 2.0 - 1.0, abs=1e-9)
    assert plain_rows[2, 2] == pytest.approx(4.5, abs=1e-9)


def test_random_agent_is_deterministic_per_seed(tmp_path):
    runner = CliRunner()
    outputs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        result = runner.invoke(
            cli, ["random", "--variant", "MaraCollision", "--seed", "3", "--steps", "300", "-o", str(path)]
        )
        assert result.exit_code == 0, result.output
        assert "MaraCollision: 300 steps" in result.output
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    assert len(read_trajectory_csv(tmp_path / "a.csv")) == 300


def test_plots_on_empty_log_warns(tmp_path):
    log = write_metrics_log([], tmp_path / "metrics.csv")
    runner = CliRunner()
    result = runner.invoke(cli, ["plots", str(log), "-o", str(tmp_path / "plots")])

    assert result.exit_code == 0, result.output
    assert "has no rows" in result.output
    assert (tmp_path / "plots" / "reward.csv").exists()
    assert "Image:" not in result.output


def test_train_writes_instance_outputs(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        cli,
        [
            "train",
            "--robot",
            "planar-2dof",
            "--instance",
            "0-1",
            "--total-timesteps",
            "64",
            "--n-steps",
            "64",
            "--workers",
            "2",
            "--plots",
            "-o",
            str(tmp_path / "runs"),
        ],
    )

    assert result.exit_code == 0, result.output
    for instance_id in (0, 1):
        folder = tmp_path / "runs" / "Mara" / f"instance-{instance_id:03d}"
        assert (folder / "metrics.csv").exists()
        assert (folder / "checkpoints" / "update-00001.npz").exists()
        assert (folder / "plots" / "entropy.csv").exists()
    assert "Instance 1:" in result.output


def test_run_picks_a_checkpoint_interactively(tmp_path, monkeypatch):
    runs_dir = tmp_path / "runs"
    checkpoint = save_checkpoint(
        runs_dir / "Mara" / "instance-000" / "checkpoints" / "update-00001.npz",
        PolicyParams.initialize(11, 2, np.random.default_rng(0)),
        metadata={"variant": "Mara", "robot": "planar-2dof"},
    )

    class DummySelect:
        def __init__(self, value):
            self.value = value

        def ask(self):
            return self.value

    def fake_select(*args, **kwargs):
        return DummySelect(checkpoint)

    cli_module = importlib.import_module("reach_gym.cli")
    monkeypatch.setattr(cli_module.questionary, "select", fake_select)

    output = tmp_path / "trajectory.csv"
    runner = CliRunner()
    result = runner.invoke(cli, ["run", "--runs-dir", str(runs_dir), "-o", str(output)])

    assert result.exit_code == 0, result.output
    assert "Termination:" in result.output
    assert read_trajectory_csv(output)[0].step == 0


def test_run_without_checkpoints_reports_it(tmp_path):
    runner = CliRunner()
    result = runner.invoke(cli, ["run", "--runs-dir", str(tmp_path / "none")])
    assert result.exit_code == 0
    assert "No checkpoints found" in result.output


def test_benchmark_reports_mismatched_checkpoint(tmp_path):
    checkpoint = save_checkpoint(tmp_path / "planar.npz", PolicyParams.initialize(11, 2, np.random.default_rng(0)))
    runner = CliRunner()
    result = runner.invoke(cli, ["benchmark", str(checkpoint), "--robot", "mara-like", "-n", "2"])

    assert result.exit_code == 3
    assert "11 inputs" in result.output


def test_benchmark_reports_a_checkpoint_without_dimensions(tmp_path):
    path = save_checkpoint(tmp_path / "policy.npz", PolicyParams.initialize(19, 6, np.random.default_rng(0)))
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        arrays = {name: data[name] for name in data.files if name != "header"}
    del header["obs_dim"]
    with path.open("wb") as handle:
        np.savez(handle, header=np.array(json.dumps(header)), **arrays)

    result = CliRunner().invoke(cli, ["benchmark", str(path), "-n", "1"])

    assert result.exit_code == 3
    assert "obs_dim" in result.output


def test_benchmark_writes_report_and_markdown(tmp_path):
    checkpoint = save_checkpoint(
        tmp_path / "policy.npz",
        PolicyParams.initialize(19, 6, np.random.default_rng(0)),
        metadata={"variant": "MaraOrient", "robot": "mara-like"},
    )
    runner = CliRunner()
    result = runner.invoke(
        cli,
        [
            "benchmark",
            str(checkpoint),
            "-n",
            "2",
            "--config",
            str(_short_episode_config(tmp_path)),
            "-o",
            str(tmp_path / "accuracy.json"),
            "--markdown",
            str(tmp_path / "accuracy.md"),
        ],
    )

    assert result.exit_code == 0, result.output
    assert "Orientation (deg)" in result.output
    assert (tmp_path / "accuracy.json").exists()
    assert "Distance (mm)" in (tmp_path / "accuracy.md").read_text(encoding="utf-8")


def _short_episode_config(tmp_path):
    path = tmp_path / "short.json"
    path.write_text('{"format_version": 1, "max_episode_steps": 10}', encoding="utf-8")
    return path


def test_cli_main_exit_codes(tmp_path, capsys):
    assert cli_main(["reward-surface", "--nx", "3", "--ny", "3", "-o", str(tmp_path / "s.csv")]) == 0
    assert cli_main(["random", "--velocity", "2.0"]) == 2
    assert cli_main(["--velocity", "2.0"]) == 2
    assert cli_main(["random", "--steps", "0"]) == 1
    assert cli_main(["no-such-command-flag", "--bogus"]) == 1
    missing = tmp_path / "missing.json"
    missing.write_text('{"format_version": 7}', encoding="utf-8")
    assert cli_main(["random", "--config", str(missing)]) == 2
    assert "format_version" in capsys.readouterr().err
