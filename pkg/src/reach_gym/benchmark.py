"""Accuracy of a trained policy against its target, aggregated over evaluation runs."""

from __future__ import annotations

from dataclasses import dataclass
import json
import math
from pathlib import Path
from typing import Any, Callable, Sequence

from jinja2 import Environment, PackageLoader
import numpy as np

from .checkpoint import Checkpoint
from .common import BenchmarkError, ContractViolation
from .envs import EnvConfig, ReachEnv, make_env, termination_reason
from .kinematics import relative_orientation_xyz
from .policy import PolicyRunner
from .ppo import resolve_checkpoint


REPORT_SCHEMA_VERSION = 1
POSITION_AXES = ("x", "y", "z")
ORIENTATION_AXES = ("roll", "pitch", "yaw")

_jinja_env = Environment(
    loader=PackageLoader("reach_gym", "templates"),
    autoescape=False,
    keep_trailing_newline=True,
)


@dataclass(frozen=True)
class AxisError:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std >= 0:
            raise ContractViolation(f"Standard deviation must be non-negative, got {self.std}")

    def to_dict(self) -> dict[str, float]:
        return {"mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class AccuracyReport:
    """Signed end-effector error at episode end: millimeters per axis, degrees per rotation axis.

    ``orientation`` is present exactly for the orientation-aware variants.
    """

    variant: str
    n_runs: int
    position: dict[str, AxisError]
    orientation: dict[str, AxisError] | None = None
    successes: int = 0
    collisions: int = 0
    mean_final_distance: float = math.nan

    def __post_init__(self):
        if self.n_runs < 1:
            raise ContractViolation("An accuracy report needs at least one run")

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "variant": self.variant,
            "n_runs": self.n_runs,
            "successes": self.successes,
            "collisions": self.collisions,
            "mean_final_distance": self.mean_final_distance,
            "position_mm": {axis: error.to_dict() for axis, error in self.position.items()},
            "orientation_deg": (
                {axis: error.to_dict() for axis, error in self.orientation.items()}
                if self.orientation is not None
                else None
            ),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AccuracyReport":
        version = data.get("schema_version")
        if version != REPORT_SCHEMA_VERSION:
            raise BenchmarkError(f"Unsupported accuracy report schema_version {version!r}")
        orientation = data.get("orientation_deg")
        return cls(
            variant=data["variant"],
            n_runs=int(data["n_runs"]),
            position={axis: AxisError(**value) for axis, value in data["position_mm"].items()},
            orientation=(
                {axis: AxisError(**value) for axis, value in orientation.items()}
                if orientation is not None
                else None
            ),
            successes=int(data.get("successes", 0)),
            collisions=int(data.get("collisions", 0)),
            mean_final_distance=float(data.get("mean_final_distance", math.nan)),
        )


def _axis_errors(samples: np.ndarray, axes: Sequence[str], scale: float) -> dict[str, AxisError]:
    scaled = samples * scale
    return {
        axis: AxisError(float(scaled[:, i].mean()), float(scaled[:, i].std()))
        for i, axis in enumerate(axes)
    }


def evaluate_policy(
    env: ReachEnv,
    act: Callable[[np.ndarray], np.ndarray],
    n_runs: int,
) -> AccuracyReport:
    """Run ``n_runs`` episodes until success, collision or the step cap and measure the final error."""
    if n_runs < 1:
        raise BenchmarkError("Benchmark needs at least one run; zero runs completed")
    position_errors = []
    orientation_errors = []
    distances = []
    outcomes = []
    for _ in range(n_runs):
        observation = env.reset().as_array()
        while True:
            result = env.step(act(observation))
            if result.done:
                break
            observation = result.observation.as_array()
        ee = env.ee_pose
        position_errors.append(ee.position - env.target.position)
        orientation_errors.append(relative_orientation_xyz(ee.orientation, env.target.orientation))
        distances.append(result.info.distance_x)
        outcomes.append(termination_reason(result.info))

    orientation = None
    if env.config.variant.uses_orientation:
        orientation = _axis_errors(np.array(orientation_errors), ORIENTATION_AXES, 180.0 / math.pi)
    return AccuracyReport(
        variant=env.config.variant.value,
        n_runs=n_runs,
        position=_axis_errors(np.array(position_errors), POSITION_AXES, 1000.0),
        orientation=orientation,
        successes=outcomes.count("success"),
        collisions=outcomes.count("collision"),
        mean_final_distance=float(np.mean(distances)),
    )


def benchmark(
    checkpoint: Checkpoint | str | Path,
    env_config: EnvConfig,
    n_runs: int = 10,
    *,
    seed: int = 0,
    deterministic: bool = False,
) -> AccuracyReport:
    checkpoint = resolve_checkpoint(checkpoint)
    env = make_env(env_config)
    checkpoint.check_compatible(env.observation_space.shape[0], env.action_space.shape[0])
    runner = PolicyRunner(
        checkpoint.params,
        checkpoint.obs_rms,
        deterministic=deterministic,
        rng=np.random.default_rng(np.random.SeedSequence([seed, env_config.instance_id, 3])),
    )
    return evaluate_policy(env, runner, n_runs)


def write_accuracy_report(report: AccuracyReport, output_path: str | Path) -> Path:
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(json.dumps(report.to_dict(), indent=2, ensure_ascii=False), encoding="utf-8")
    return output_path


def read_accuracy_report(path: str | Path) -> AccuracyReport:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BenchmarkError(f"Cannot read accuracy report {path}: {exc}") from exc
    return AccuracyReport.from_dict(data)


def render_accuracy_table(report: AccuracyReport, *, title: str | None = None) -> str:
    template = _jinja_env.get_template("accuracy.md.j2")
    return template.render(
        report=report,
        title=title or f"Mean error distribution with respect to the target ({report.variant})",
        position_axes=POSITION_AXES,
        orientation_axes=ORIENTATION_AXES,
    )
