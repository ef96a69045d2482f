"""CLI entrypoints for reach-gym."""

from __future__ import annotations

from contextlib import contextmanager
from datetime import datetime
import logging
import math
from pathlib import Path
from typing import Any, Iterator, Sequence

import click
from click_default_group import DefaultGroup
import questionary

from .benchmark import benchmark, render_accuracy_table, write_accuracy_report
from .checkpoint import Checkpoint, find_checkpoints, load_checkpoint
from .common import ConfigurationError, ContractViolation, ReachGymError
from .config import RunConfig, load_run_config
from .envs import MAX_VELOCITY_LIMIT, EnvVariant, run_random_agent
from .exporters import write_reward_surface_csv, write_trajectory_csv
from .plots import emit_plots
from .ppo import run_policy, train_instances
from .rewards import RewardHyperparams, reward_surface


CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
VARIANT_CHOICES = [variant.value for variant in EnvVariant]

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class ValidationFailure(click.ClickException):
    exit_code = EXIT_VALIDATION


class RuntimeFailure(click.ClickException):
    exit_code = EXIT_RUNTIME


@contextmanager
def _translate_errors() -> Iterator[None]:
    try:
        yield
    except (ConfigurationError, ContractViolation) as exc:
        raise ValidationFailure(str(exc)) from exc
    except ReachGymError as exc:
        raise RuntimeFailure(str(exc)) from exc
    except OSError as exc:
        raise RuntimeFailure(str(exc)) from exc


class InstanceRange(click.ParamType):
    """``3``, ``0-3`` or ``0,2,5``."""

    name = "instance"

    def convert(self, value: Any, param, ctx) -> list[int]:
        if isinstance(value, list):
            return value
        ids: list[int] = []
        try:
            for part in str(value).split(","):
                part = part.strip()
                if "-" in part:
                    start, end = (int(item) for item in part.split("-", 1))
                    if end < start:
                        self.fail(f"empty instance range `{part}`", param, ctx)
                    ids.extend(range(start, end + 1))
                else:
                    ids.append(int(part))
        except ValueError:
            self.fail(f"`{value}` is not an instance id or range", param, ctx)
        if any(i < 0 for i in ids):
            self.fail("instance ids must be non-negative", param, ctx)
        return list(dict.fromkeys(ids))


_ENV_OPTIONS = (
    click.option(
        "--variant",
        type=click.Choice(VARIANT_CHOICES, case_sensitive=False),
        help="Environment variant (reward function). Defaults to the config file, then Mara.",
    ),
    click.option("--robot", help="Built-in robot (mara-like, planar-2dof) or a robot model file."),
    click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        help="JSON run configuration (environment plus optional `train` section).",
    ),
    click.option("--seed", type=click.IntRange(min=0), help="Random seed for environment and trainer."),
    click.option("-r", "--real-speed", is_flag=True, default=None, help="Run in real speed."),
    click.option(
        "-v",
        "--velocity",
        type=float,
        help=f"Set servo velocity. Keep < {MAX_VELOCITY_LIMIT} rad/s for real speed.",
    ),
    click.option(
        "--instance",
        type=InstanceRange(),
        help="Instance id (or range such as 0-3 for train); outputs are namespaced per id.",
    ),
)


def env_options(func):
    """Environment flags shared by every simulation subcommand."""
    for option in reversed(_ENV_OPTIONS):
        func = option(func)
    return func


def _build_run_config(
    *,
    config_path: str | None,
    variant: str | None,
    robot: str | None,
    seed: int | None,
    real_speed: bool | None,
    velocity: float | None,
    instance_id: int | None = None,
    train_overrides: dict[str, Any] | None = None,
) -> RunConfig:
    with _translate_errors():
        return load_run_config(
            config_path,
            variant=variant,
            env_overrides={
                "robot": robot,
                "seed": seed,
                "real_speed": real_speed,
                "velocity_limit": velocity,
                "instance_id": instance_id,
            },
            train_overrides={"seed": seed, **(train_overrides or {})},
        )


def _single_instance(instance: list[int] | None, command: str) -> int | None:
    if not instance:
        return None
    if len(instance) > 1:
        raise ValidationFailure(f"`{command}` runs one instance; only `train` accepts a range")
    return instance[0]


def _load_checkpoint(path: str | Path) -> Checkpoint:
    with _translate_errors():
        return load_checkpoint(path)


def _pick_checkpoint(runs_dir: Path) -> Path | None:
    found = find_checkpoints(runs_dir)
    if not found:
        click.echo(f"No checkpoints found under {runs_dir}.")
        return None
    choices = []
    for path in found:
        stamp = datetime.fromtimestamp(path.stat().st_mtime).strftime("%Y-%m-%d %H:%M")
        label = path.relative_to(runs_dir) if path.is_relative_to(runs_dir) else path
        choices.append(questionary.Choice(title=f"{stamp}  {label}", value=path))
    selected = questionary.select("Select a checkpoint to run:", choices=choices).ask()
    if selected is None:
        click.echo("No checkpoint selected.")
        return None
    return Path(selected)


@click.group(
    cls=DefaultGroup,
    default="random",
    default_if_no_args=True,
    context_settings={**CONTEXT_SETTINGS, "ignore_unknown_options": True},
)
@click.option(
    "--log-level",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default="WARNING",
    show_default=True,
    help="Logging threshold for library messages.",
)
def cli(log_level):
    """MARA reach environments on a kinematic simulator, with a PPO trainer and benchmark tools."""
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command("train")
@env_options
@click.option(
    "-o",
    "--out",
    "output_root",
    type=click.Path(file_okay=False),
    default="runs",
    show_default=True,
    help="Root directory; each instance writes to <out>/<variant>/instance-NNN.",
)
@click.option("--total-timesteps", type=click.IntRange(min=1), help="Override the training budget.")
@click.option("--n-steps", type=click.IntRange(min=1), help="Override the rollout length.")
@click.option("--checkpoint-interval", type=click.IntRange(min=1), help="Updates between checkpoints.")
@click.option("--workers", type=click.IntRange(min=1), help="Concurrent trainers for instance ranges.")
@click.option("--plots", "with_plots", is_flag=True, help="Emit reward/entropy plots after training.")
def train_cmd(
    variant,
    robot,
    config_path,
    seed,
    real_speed,
    velocity,
    instance,
    output_root,
    total_timesteps,
    n_steps,
    checkpoint_interval,
    workers,
    with_plots,
):
    """Train a PPO policy on one or more environment instances."""
    run_config = _build_run_config(
        config_path=config_path,
        variant=variant,
        robot=robot,
        seed=seed,
        real_speed=real_speed,
        velocity=velocity,
        train_overrides={
            "total_timesteps": total_timesteps,
            "n_steps": n_steps,
            "checkpoint_interval": checkpoint_interval,
        },
    )
    instance_ids = instance or [run_config.env.instance_id]
    click.echo(
        f"Training {run_config.env.variant.value} on {run_config.env.robot} "
        f"for {run_config.train.total_timesteps} timesteps ({len(instance_ids)} instance(s))..."
    )
    with _translate_errors():
        results = train_instances(
            run_config.env, run_config.train, instance_ids, Path(output_root), workers=workers
        )

    for instance_id, result in results.items():
        click.echo(f"Instance {instance_id}:")
        click.echo(f"  Output: {result.output_dir.resolve()}")
        click.echo(f"  Metrics: {result.metrics_path.resolve()}")
        if result.final_checkpoint:
            click.echo(f"  Checkpoint: {result.final_checkpoint.resolve()}")
        click.echo(
            f"  Updates: {result.updates}, episodes: {result.episodes}, "
            f"mean final distance: {result.mean_final_distance:.4f} m"
        )
        if with_plots:
            with _translate_errors():
                outputs = emit_plots(result.metrics_path, result.output_dir / "plots")
            click.echo(f"  Plots: {outputs.reward_series.parent.resolve()}")


@cli.command("run")
@click.argument("checkpoint", required=False, type=click.Path(exists=True, dir_okay=False))
@env_options
@click.option("--stochastic", is_flag=True, help="Sample actions instead of using the policy mean.")
@click.option(
    "--runs-dir",
    type=click.Path(file_okay=False),
    default="runs",
    show_default=True,
    help="Where to look for checkpoints when none is given.",
)
@click.option("-o", "--out", "output_path", type=click.Path(dir_okay=False), help="Trajectory CSV output.")
def run_cmd(
    checkpoint,
    variant,
    robot,
    config_path,
    seed,
    real_speed,
    velocity,
    instance,
    stochastic,
    runs_dir,
    output_path,
):
    """Run a trained policy for one episode (pick a checkpoint interactively if none is given)."""
    if checkpoint is None:
        checkpoint = _pick_checkpoint(Path(runs_dir))
        if checkpoint is None:
            return
    loaded = _load_checkpoint(checkpoint)
    run_config = _build_run_config(
        config_path=config_path,
        variant=variant or loaded.metadata.get("variant"),
        robot=robot or loaded.metadata.get("robot"),
        seed=seed,
        real_speed=real_speed,
        velocity=velocity,
        instance_id=_single_instance(instance, "run"),
    )
    with _translate_errors():
        log = run_policy(
            loaded, run_config.env, deterministic=not stochastic, seed=run_config.env.seed
        )
        if output_path:
            write_trajectory_csv(log.rows, output_path, len(log.rows[0].joint_positions))

    info = log.final_info
    click.echo(
        f"Termination: {log.terminations[0]} after {len(log.rows)} steps, "
        f"final distance {info.distance_x:.4f} m, return {log.episode_returns[0]:.3f}"
    )
    if output_path:
        click.echo(f"Output: {Path(output_path).resolve()}")


@cli.command("benchmark")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@env_options
@click.option("-n", "--runs", "n_runs", type=int, default=10, show_default=True, help="Evaluation episodes.")
@click.option("--deterministic", is_flag=True, help="Use the policy mean instead of sampling.")
@click.option("-o", "--out", "output_path", type=click.Path(dir_okay=False), help="Accuracy report JSON.")
@click.option("--markdown", "markdown_path", type=click.Path(dir_okay=False), help="Also write the table as Markdown.")
def benchmark_cmd(
    checkpoint,
    variant,
    robot,
    config_path,
    seed,
    real_speed,
    velocity,
    instance,
    n_runs,
    deterministic,
    output_path,
    markdown_path,
):
    """Report the mean and standard deviation of the final error over evaluation runs."""
    loaded = _load_checkpoint(checkpoint)
    run_config = _build_run_config(
        config_path=config_path,
        variant=variant or loaded.metadata.get("variant"),
        robot=robot or loaded.metadata.get("robot"),
        seed=seed,
        real_speed=real_speed,
        velocity=velocity,
        instance_id=_single_instance(instance, "benchmark"),
    )
    with _translate_errors():
        report = benchmark(
            loaded,
            run_config.env,
            n_runs=n_runs,
            seed=run_config.env.seed,
            deterministic=deterministic,
        )
        table = render_accuracy_table(report)
        if output_path:
            write_accuracy_report(report, output_path)
        if markdown_path:
            Path(markdown_path).parent.mkdir(parents=True, exist_ok=True)
            Path(markdown_path).write_text(table, encoding="utf-8")

    click.echo(table)
    if output_path:
        click.echo(f"Output: {Path(output_path).resolve()}")
    if markdown_path:
        click.echo(f"Markdown: {Path(markdown_path).resolve()}")


@cli.command("random")
@env_options
@click.option("--steps", type=click.IntRange(min=1), default=1000, show_default=True, help="Environment steps.")
@click.option("-o", "--out", "output_path", type=click.Path(dir_okay=False), help="Trajectory CSV output.")
def random_cmd(variant, robot, config_path, seed, real_speed, velocity, instance, steps, output_path):
    """Drive the environment with uniform random actions."""
    run_config = _build_run_config(
        config_path=config_path,
        variant=variant,
        robot=robot,
        seed=seed,
        real_speed=real_speed,
        velocity=velocity,
        instance_id=_single_instance(instance, "random"),
    )
    with _translate_errors():
        log = run_random_agent(run_config.env, steps)
        if output_path:
            write_trajectory_csv(log.rows, output_path, len(log.rows[0].joint_positions))

    collisions = log.terminations.count("collision")
    mean_return = sum(log.episode_returns) / len(log.episode_returns) if log.episode_returns else math.nan
    click.echo(
        f"{run_config.env.variant.value}: {steps} steps, {len(log.episode_returns)} finished episode(s), "
        f"{collisions} collision(s), mean return {mean_return:.3f}"
    )
    if output_path:
        click.echo(f"Output: {Path(output_path).resolve()}")


@cli.command("reward-surface")
@click.option(
    "--variant",
    type=click.Choice(VARIANT_CHOICES, case_sensitive=False),
    help="Use this variant's packaged reward hyperparameters instead of the plain defaults.",
)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON run configuration.")
@click.option("--nx", type=click.IntRange(min=2), default=101, show_default=True, help="Grid points along distance.")
@click.option("--ny", type=click.IntRange(min=2), default=101, show_default=True, help="Grid points along angle.")
@click.option("--x-max", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True, help="Largest distance (m).")
@click.option(
    "-o",
    "--out",
    "output_path",
    type=click.Path(dir_okay=False),
    default="reward_surface.csv",
    show_default=True,
    help="Grid CSV output (x,y,reward).",
)
def reward_surface_cmd(variant, config_path, nx, ny, x_max, output_path):
    """Tabulate the distance/orientation reward over a grid."""
    if variant is None and config_path is None:
        params = RewardHyperparams()
    else:
        params = _build_run_config(
            config_path=config_path,
            variant=variant,
            robot=None,
            seed=None,
            real_speed=None,
            velocity=None,
        ).env.reward_params
    with _translate_errors():
        grid = reward_surface(params, nx, ny, x_max=x_max)
        path = write_reward_surface_csv(grid, output_path)
    click.echo(f"Reward at x=0, y=0: {grid[0, 2]:.6f}; minimum {grid[:, 2].min():.6f}")
    click.echo(f"Output: {path.resolve()}")


@cli.command("plots")
@click.argument("metrics_log", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", "output_dir", type=click.Path(file_okay=False), help="Defaults to <log dir>/plots.")
@click.option("--no-image", is_flag=True, help="Only write the series CSVs.")
def plots_cmd(metrics_log, output_dir, no_image):
    """Write reward and entropy series (CSV plus a line chart) from a metrics log."""
    output_dir = Path(output_dir) if output_dir else Path(metrics_log).parent / "plots"
    with _translate_errors():
        outputs = emit_plots(metrics_log, output_dir, image=not no_image)
    if outputs.points == 0:
        click.echo(f"Warning: {metrics_log} has no rows; wrote empty series.")
    click.echo(f"Reward series: {outputs.reward_series.resolve()}")
    click.echo(f"Entropy series: {outputs.entropy_series.resolve()}")
    if outputs.image:
        click.echo(f"Image: {outputs.image.resolve()}")


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and map failures to exit codes: 1 usage, 2 validation, 3 runtime."""
    try:
        result = cli.main(
            args=list(argv) if argv is not None else None,
            prog_name="reach-gym",
            standalone_mode=False,
        )
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE
    except (ConfigurationError, ContractViolation) as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_VALIDATION
    except ReachGymError as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_RUNTIME
    return result if isinstance(result, int) else 0
