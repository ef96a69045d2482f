"""Reach environments over the kinematic simulator, plus the gymnasium adapter."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
import logging
import math
import time
from typing import Any, Callable, ClassVar

import gymnasium
from gymnasium import spaces
import numpy as np

from .assets import DEFAULT_ROBOT, variant_defaults
from .collision import check_state
from .common import ConfigurationError, ContractViolation
from .kinematics import JointState, Pose, forward_kinematics, quaternion_angle, rms_distance
from .rewards import (
    RewardHyperparams,
    reward_collision,
    reward_collision_orient,
    reward_mara,
    reward_orient_core,
)
from .robot import RobotDescription, load_robot_description


logger = logging.getLogger(__name__)

MAX_VELOCITY_LIMIT = 1.57
DEFAULT_TARGET_POSITION = (0.40, 0.10, 0.40)
# Tool z-axis pointing down at the table (half turn about y).
DEFAULT_TARGET_ORIENTATION = (0.0, 0.0, 1.0, 0.0)


class EnvVariant(str, Enum):
    MARA = "Mara"
    MARA_ORIENT = "MaraOrient"
    MARA_COLLISION = "MaraCollision"
    MARA_COLLISION_ORIENT = "MaraCollisionOrient"

    @property
    def uses_orientation(self) -> bool:
        return self in (EnvVariant.MARA_ORIENT, EnvVariant.MARA_COLLISION_ORIENT)

    @property
    def penalizes_collision(self) -> bool:
        return self in (EnvVariant.MARA_COLLISION, EnvVariant.MARA_COLLISION_ORIENT)

    @classmethod
    def parse(cls, value: "EnvVariant | str") -> "EnvVariant":
        if isinstance(value, cls):
            return value
        normalized = str(value).replace("-", "").replace("_", "").lower()
        for variant in cls:
            if variant.value.lower() == normalized:
                return variant
        valid = ", ".join(variant.value for variant in cls)
        raise ConfigurationError(f"Unknown environment variant `{value}`. Use one of [{valid}].")


def _default_target() -> Pose:
    return Pose(DEFAULT_TARGET_POSITION, DEFAULT_TARGET_ORIENTATION)


@dataclass(frozen=True, eq=False)
class EnvConfig:
    variant: EnvVariant = EnvVariant.MARA
    robot: str = DEFAULT_ROBOT
    target_pose: Pose = field(default_factory=_default_target)
    reward_params: RewardHyperparams = field(default_factory=RewardHyperparams)
    max_episode_steps: int = 256
    action_scale: float = 0.025
    velocity_limit: float = MAX_VELOCITY_LIMIT
    success_threshold: float = 0.02
    real_speed: bool = False
    seed: int = 0
    instance_id: int = 0
    control_period: float = 0.01
    initial_positions: tuple[float, ...] | None = None
    target_randomization: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variant", EnvVariant.parse(self.variant))
        if not 0 < self.velocity_limit <= MAX_VELOCITY_LIMIT:
            raise ConfigurationError(
                f"velocity_limit {self.velocity_limit} rad/s is outside (0, {MAX_VELOCITY_LIMIT}]; "
                f"keep servo velocity below {MAX_VELOCITY_LIMIT} rad/s"
            )
        if self.max_episode_steps < 1:
            raise ConfigurationError("max_episode_steps must be at least 1")
        if not self.success_threshold > 0:
            raise ConfigurationError("success_threshold must be positive")
        if not self.action_scale > 0:
            raise ConfigurationError("action_scale must be positive")
        if not self.control_period > 0:
            raise ConfigurationError("control_period must be positive")
        if self.target_randomization < 0:
            raise ConfigurationError("target_randomization must be non-negative")
        if self.seed < 0 or self.instance_id < 0:
            raise ConfigurationError("seed and instance_id must be non-negative")
        if self.initial_positions is not None:
            object.__setattr__(
                self, "initial_positions", tuple(float(v) for v in self.initial_positions)
            )

    @classmethod
    def for_variant(cls, variant: EnvVariant | str, **overrides: Any) -> "EnvConfig":
        """Config with the shipped per-variant reward overrides applied."""
        variant = EnvVariant.parse(variant)
        defaults = variant_defaults(variant.value)
        reward = RewardHyperparams.from_dict(defaults["reward_params"])
        if "reward_params" in overrides and isinstance(overrides["reward_params"], dict):
            overrides["reward_params"] = RewardHyperparams.from_dict(overrides["reward_params"], reward)
        overrides.setdefault("reward_params", reward)
        return cls(variant=variant, **overrides)

    def with_overrides(self, **overrides: Any) -> "EnvConfig":
        return replace(self, **{key: value for key, value in overrides.items() if value is not None})

    def to_dict(self) -> dict[str, Any]:
        data = {item.name: getattr(self, item.name) for item in fields(self)}
        data["variant"] = self.variant.value
        data["target_pose"] = self.target_pose.to_dict()
        data["reward_params"] = self.reward_params.to_dict()
        if self.initial_positions is not None:
            data["initial_positions"] = list(self.initial_positions)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EnvConfig":
        known = {item.name for item in fields(cls)}
        unknown = sorted(set(data) - known - {"format_version", "train"})
        if unknown:
            raise ConfigurationError(f"Unknown environment config keys: {', '.join(unknown)}")
        values = {key: value for key, value in data.items() if key in known}
        if "target_pose" in values:
            try:
                values["target_pose"] = Pose.from_dict(values["target_pose"])
            except ContractViolation as exc:
                raise ConfigurationError(f"Invalid target_pose: {exc}") from exc
        variant = values.pop("variant", EnvVariant.MARA)
        return cls.for_variant(variant, **values)


@dataclass(frozen=True)
class Observation:
    joint_positions: np.ndarray
    joint_velocities: np.ndarray
    ee_to_target: np.ndarray
    ee_orientation: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate(
            [self.joint_positions, self.joint_velocities, self.ee_to_target, self.ee_orientation]
        )

    @property
    def width(self) -> int:
        return self.as_array().size


def observation_width(n_joints: int) -> int:
    return 2 * n_joints + 7


@dataclass(frozen=True)
class StepInfo:
    collided: bool
    distance_x: float
    orientation_y: float
    success: bool
    truncated: bool = False
    ee_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    min_separation: float = math.inf

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    done: bool
    info: StepInfo


@dataclass
class TrajectoryRow:
    step: int
    joint_positions: tuple[float, ...]
    ee_position: tuple[float, float, float]
    reward: float
    done: bool


@dataclass
class EpisodeLog:
    rows: list[TrajectoryRow] = field(default_factory=list)
    episode_returns: list[float] = field(default_factory=list)
    terminations: list[str] = field(default_factory=list)
    resets: int = 0
    final_info: StepInfo | None = None

    def record(self, step: int, env: "ReachEnv", result: StepResult) -> None:
        self.rows.append(
            TrajectoryRow(
                step=step,
                joint_positions=tuple(env.joint_state.positions.tolist()),
                ee_position=result.info.ee_position,
                reward=result.reward,
                done=result.done,
            )
        )
        self.final_info = result.info

    @property
    def rewards(self) -> list[float]:
        return [row.reward for row in self.rows]


def termination_reason(info: StepInfo) -> str:
    if info.collided:
        return "collision"
    if info.success:
        return "success"
    return "timeout"


class ReachEnv:
    """Reach a target pose with a position-controlled arm; one subclass per reward variant.

    Actions are per-joint position deltas in ``[-1, 1]`` scaled by ``action_scale``
    and rate-limited to ``velocity_limit * control_period``. Any collision ends the
    episode; only the collision variants penalize it.
    """

    variant: ClassVar[EnvVariant]

    def __init__(self, config: EnvConfig, description: RobotDescription | None = None):
        if config.variant is not self.variant:
            raise ConfigurationError(
                f"{type(self).__name__} cannot run variant {config.variant.value}"
            )
        self.config = config
        self.description = description or load_robot_description(config.robot)
        self.model = self.description.model
        self.scene = self.description.scene
        n = self.model.n_joints

        if config.initial_positions is None:
            initial = np.zeros(n)
        else:
            initial = np.array(config.initial_positions, dtype=np.float64)
            if initial.shape != (n,):
                raise ConfigurationError(
                    f"initial_positions has {initial.size} entries; robot {self.model.name} has {n} joints"
                )
        if np.any(initial < self.model.lower_limits) or np.any(initial > self.model.upper_limits):
            raise ConfigurationError("initial_positions lie outside the joint limits")
        self.initial_state = JointState.at_rest(initial)

        self.max_step_delta = np.minimum(config.velocity_limit, self.model.velocity_limits) * config.control_period
        self.action_space = spaces.Box(-1.0, 1.0, shape=(n,), dtype=np.float64)
        self.observation_space = spaces.Box(
            -np.inf, np.inf, shape=(observation_width(n),), dtype=np.float64
        )
        self.rng = np.random.default_rng(np.random.SeedSequence([config.seed, config.instance_id]))

        self.target: Pose = config.target_pose
        self._state: JointState | None = None
        self._poses: list[Pose] = []
        self._steps = 0
        self._done = False
        self._next_tick: float | None = None

    @property
    def n_joints(self) -> int:
        return self.model.n_joints

    @property
    def joint_state(self) -> JointState:
        if self._state is None:
            raise ContractViolation("Environment has not been reset")
        return self._state

    @property
    def ee_pose(self) -> Pose:
        return self._poses[-1]

    @property
    def steps(self) -> int:
        return self._steps

    @property
    def done(self) -> bool:
        return self._done

    def compute_reward(self, x: float, y: float, collided: bool) -> float:
        raise NotImplementedError

    def _observe(self) -> Observation:
        ee = self.ee_pose
        return Observation(
            joint_positions=self._state.positions.copy(),
            joint_velocities=self._state.velocities.copy(),
            ee_to_target=self.target.position - ee.position,
            ee_orientation=ee.orientation.copy(),
        )

    def _sample_target(self) -> Pose:
        nominal = self.config.target_pose
        spread = self.config.target_randomization
        if spread == 0:
            return nominal
        offset = self.rng.uniform(-spread, spread, size=3)
        return Pose(nominal.position + offset, nominal.orientation)

    def reset(self) -> Observation:
        self.target = self._sample_target()
        self._state = self.initial_state
        self._poses = forward_kinematics(self.model, self._state)
        self._steps = 0
        self._done = False
        self._next_tick = None
        return self._observe()

    def step(self, action) -> StepResult:
        if self._state is None:
            raise ContractViolation("step() called before reset()")
        if self._done:
            raise ContractViolation("step() called after the episode ended; call reset() first")
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape != (self.n_joints,):
            raise ContractViolation(f"Action must have {self.n_joints} entries, got {action.size}")
        if not np.all(np.isfinite(action)):
            raise ContractViolation("Action contains non-finite values")

        dt = self.config.control_period
        delta = np.clip(self.config.action_scale * np.clip(action, -1.0, 1.0), -self.max_step_delta, self.max_step_delta)
        previous = self._state.positions
        positions = np.clip(previous + delta, self.model.lower_limits, self.model.upper_limits)
        self._state = JointState(positions, (positions - previous) / dt)
        self._poses = forward_kinematics(self.model, self._state)
        report = check_state(self.scene, self._poses)

        ee = self.ee_pose
        x = rms_distance(ee.position, self.target.position)
        y = quaternion_angle(ee.orientation, self.target.orientation)
        reward = self.compute_reward(x, y, report.colliding)
        self._steps += 1

        success = x < self.config.success_threshold and not report.colliding
        timed_out = self._steps >= self.config.max_episode_steps
        self._done = report.colliding or success or timed_out
        if report.colliding:
            logger.debug(
                "Collision at step %d between %s (separation %.4f m)",
                self._steps,
                report.pair,
                report.min_separation,
            )
        if self.config.real_speed:
            self._throttle(dt)

        info = StepInfo(
            collided=report.colliding,
            distance_x=x,
            orientation_y=y,
            success=success,
            truncated=timed_out and not (report.colliding or success),
            ee_position=tuple(ee.position.tolist()),
            min_separation=report.min_separation,
        )
        return StepResult(observation=self._observe(), reward=reward, done=self._done, info=info)

    def _throttle(self, dt: float) -> None:
        now = time.perf_counter()
        if self._next_tick is not None and now < self._next_tick:
            time.sleep(self._next_tick - now)
            now = self._next_tick
        self._next_tick = now + dt


class MaraEnv(ReachEnv):
    variant = EnvVariant.MARA

    def compute_reward(self, x: float, y: float, collided: bool) -> float:
        return reward_mara(x, self.config.reward_params)


class MaraOrientEnv(ReachEnv):
    variant = EnvVariant.MARA_ORIENT

    def compute_reward(self, x: float, y: float, collided: bool) -> float:
        return reward_orient_core(x, y, self.config.reward_params)


class MaraCollisionEnv(ReachEnv):
    variant = EnvVariant.MARA_COLLISION

    def compute_reward(self, x: float, y: float, collided: bool) -> float:
        return reward_collision(x, collided, self.config.reward_params)


class MaraCollisionOrientEnv(ReachEnv):
    variant = EnvVariant.MARA_COLLISION_ORIENT

    def compute_reward(self, x: float, y: float, collided: bool) -> float:
        return reward_collision_orient(x, y, collided, self.config.reward_params)


ENV_REGISTRY: dict[str, Callable[[EnvConfig], ReachEnv]] = {
    cls.variant.value: cls
    for cls in (MaraEnv, MaraOrientEnv, MaraCollisionEnv, MaraCollisionOrientEnv)
}


def make_env(config: EnvConfig) -> ReachEnv:
    constructor = ENV_REGISTRY.get(config.variant.value)
    if constructor is None:
        raise ConfigurationError(f"No environment registered for variant {config.variant.value}")
    return constructor(config)


def run_random_agent(config: EnvConfig, n_steps: int) -> EpisodeLog:
    """Uniform random actions for ``n_steps`` steps, resetting whenever an episode ends."""
    env = make_env(config)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, config.instance_id, 1]))
    log = EpisodeLog()
    env.reset()
    log.resets += 1
    episode_return = 0.0
    for step in range(n_steps):
        result = env.step(rng.uniform(-1.0, 1.0, size=env.n_joints))
        log.record(step, env, result)
        episode_return += result.reward
        if result.done:
            log.episode_returns.append(episode_return)
            log.terminations.append(termination_reason(result.info))
            episode_return = 0.0
            env.reset()
            log.resets += 1
    return log


class GymReachEnv(gymnasium.Env):
    """gymnasium view of a ReachEnv (5-tuple step, arrays instead of dataclasses)."""

    metadata = {"render_modes": []}

    def __init__(self, config: EnvConfig | None = None, **overrides: Any):
        if config is None:
            variant = overrides.pop("variant", EnvVariant.MARA)
            config = EnvConfig.for_variant(variant, **overrides)
        self._config = config
        self.env = make_env(config)
        self.action_space = self.env.action_space
        self.observation_space = self.env.observation_space

    def reset(self, *, seed: int | None = None, options: dict[str, Any] | None = None):
        super().reset(seed=seed)
        if seed is not None:
            self._config = replace(self._config, seed=seed)
            self.env = make_env(self._config)
        observation = self.env.reset()
        return observation.as_array(), {}

    def step(self, action):
        result = self.env.step(action)
        truncated = result.info.truncated
        terminated = result.done and not truncated
        return result.observation.as_array(), result.reward, terminated, truncated, result.info.as_dict()


def register_gymnasium_envs() -> list[str]:
    registered = []
    for variant in EnvVariant:
        env_id = f"{variant.value}-v0"
        if env_id not in gymnasium.envs.registry:
            gymnasium.register(id=env_id, entry_point=GymReachEnv, kwargs={"variant": variant.value})
        registered.append(env_id)
    return registered
