"""MARA-style reach environments on a kinematic simulator, with a from-scratch PPO trainer."""

import sys

from .benchmark import AccuracyReport, benchmark, evaluate_policy, render_accuracy_table
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .cli import cli, cli_main
from .collision import Capsule, CollisionScene, ContactReport, check_state, segment_segment_distance
from .common import (
    BenchmarkError,
    CheckpointError,
    ConfigurationError,
    ContractViolation,
    MetricsParseError,
    ReachGymError,
    TrainingError,
)
from .config import RunConfig, load_run_config
from .envs import (
    EnvConfig,
    EnvVariant,
    GymReachEnv,
    MaraCollisionEnv,
    MaraCollisionOrientEnv,
    MaraEnv,
    MaraOrientEnv,
    ReachEnv,
    make_env,
    register_gymnasium_envs,
    run_random_agent,
)
from .kinematics import JointState, Pose, RobotModel, forward_kinematics, quaternion_angle, rms_distance
from .plots import emit_plots
from .policy import PolicyParams, policy_forward, sample_action
from .ppo import TrainConfig, compute_gae, ppo_update, run_policy, train, train_instances
from .rewards import (
    RewardHyperparams,
    distance_fraction,
    reward_collision,
    reward_collision_orient,
    reward_mara,
    reward_orient_core,
    reward_surface,
)
from .robot import RobotDescription, load_robot_description


def main() -> None:
    sys.exit(cli_main())


__all__ = [
    "AccuracyReport",
    "BenchmarkError",
    "Capsule",
    "Checkpoint",
    "CheckpointError",
    "CollisionScene",
    "ConfigurationError",
    "ContactReport",
    "ContractViolation",
    "EnvConfig",
    "EnvVariant",
    "GymReachEnv",
    "JointState",
    "MaraCollisionEnv",
    "MaraCollisionOrientEnv",
    "MaraEnv",
    "MaraOrientEnv",
    "MetricsParseError",
    "PolicyParams",
    "Pose",
    "ReachEnv",
    "ReachGymError",
    "RewardHyperparams",
    "RobotDescription",
    "RobotModel",
    "RunConfig",
    "TrainConfig",
    "TrainingError",
    "benchmark",
    "check_state",
    "cli",
    "cli_main",
    "compute_gae",
    "distance_fraction",
    "emit_plots",
    "evaluate_policy",
    "forward_kinematics",
    "load_checkpoint",
    "load_robot_description",
    "load_run_config",
    "main",
    "make_env",
    "policy_forward",
    "ppo_update",
    "quaternion_angle",
    "register_gymnasium_envs",
    "render_accuracy_table",
    "reward_collision",
    "reward_collision_orient",
    "reward_mara",
    "reward_orient_core",
    "reward_surface",
    "rms_distance",
    "run_policy",
    "run_random_agent",
    "sample_action",
    "save_checkpoint",
    "segment_segment_distance",
    "train",
    "train_instances",
]
