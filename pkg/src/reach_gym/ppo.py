"""Proximal policy optimization for the reach environments.

One trainer owns one environment and one set of parameters. Parallel
instances are independent trainers with their own seeds and output folders.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields, replace
import logging
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .assets import variant_defaults
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .common import ConfigurationError, TrainingError, instance_dir, write_json_document
from .envs import EnvConfig, EnvVariant, EpisodeLog, ReachEnv, make_env, termination_reason
from .exporters import MetricsLogWriter, MetricsRow
from .policy import (
    HIDDEN_SIZE,
    PolicyParams,
    PolicyRunner,
    RunningMeanStd,
    forward_with_cache,
    gaussian_entropy,
    gaussian_log_prob,
    policy_backward,
    policy_forward,
)


logger = logging.getLogger(__name__)

METRICS_FILENAME = "metrics.csv"
CONFIG_FILENAME = "config.json"
CHECKPOINT_DIRNAME = "checkpoints"
EPISODE_WINDOW = 100


@dataclass(frozen=True)
class TrainConfig:
    n_steps: int = 2048
    n_minibatches: int = 32
    gae_lambda: float = 0.95
    discount_gamma: float = 0.99
    n_epochs: int = 10
    entropy_coef: float = 0.0
    base_learning_rate: float = 3e-4
    clip_range: float = 0.2
    vf_coef: float = 0.5
    seed: int = 0
    total_timesteps: int = 100_000_000
    max_grad_norm: float | None = 0.5
    normalize_observations: bool = True
    checkpoint_interval: int = 10
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden_size: int = HIDDEN_SIZE
    log_std_init: float = 0.0
    early_stop_reward: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "total_timesteps", int(self.total_timesteps))
        checks = (
            (self.n_steps >= 1, "n_steps must be at least 1"),
            (self.n_minibatches >= 1, "n_minibatches must be at least 1"),
            (self.n_steps % max(self.n_minibatches, 1) == 0, "n_steps must be divisible by n_minibatches"),
            (0.0 <= self.gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]"),
            (0.0 < self.discount_gamma <= 1.0, "discount_gamma must lie in (0, 1]"),
            (self.n_epochs >= 1, "n_epochs must be at least 1"),
            (self.entropy_coef >= 0, "entropy_coef must be >= 0"),
            (self.base_learning_rate > 0, "base_learning_rate must be > 0"),
            (self.clip_range > 0, "clip_range must be > 0"),
            (self.vf_coef >= 0, "vf_coef must be >= 0"),
            (self.seed >= 0, "seed must be non-negative"),
            (self.total_timesteps >= 1, "total_timesteps must be at least 1"),
            (self.max_grad_norm is None or self.max_grad_norm > 0, "max_grad_norm must be > 0"),
            (self.checkpoint_interval >= 1, "checkpoint_interval must be at least 1"),
            (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0, "adam betas must lie in [0, 1)"),
            (self.adam_eps > 0, "adam_eps must be > 0"),
            (self.hidden_size >= 1, "hidden_size must be at least 1"),
        )
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(f"Invalid training config: {message}")

    @property
    def minibatch_size(self) -> int:
        return self.n_steps // self.n_minibatches

    @property
    def n_updates(self) -> int:
        return max(1, self.total_timesteps // self.n_steps)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None, base: "TrainConfig | None" = None) -> "TrainConfig":
        base = base or cls()
        if not data:
            return base
        known = {item.name for item in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown training config keys: {', '.join(unknown)}")
        return replace(base, **data)

    @classmethod
    def for_variant(cls, variant: str, **overrides: Any) -> "TrainConfig":
        defaults = variant_defaults(EnvVariant.parse(variant).value)
        return cls.from_dict(overrides, cls.from_dict(defaults["train"]))


@dataclass
class RolloutBuffer:
    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    @classmethod
    def allocate(cls, n_steps: int, obs_dim: int, act_dim: int) -> "RolloutBuffer":
        return cls(
            observations=np.zeros((n_steps, obs_dim)),
            actions=np.zeros((n_steps, act_dim)),
            log_probs=np.zeros(n_steps),
            values=np.zeros(n_steps),
            rewards=np.zeros(n_steps),
            dones=np.zeros(n_steps),
            advantages=np.zeros(n_steps),
            returns=np.zeros(n_steps),
        )

    def __len__(self) -> int:
        return self.rewards.shape[0]


def compute_gae(
    buffer: RolloutBuffer,
    discount_gamma: float,
    gae_lambda: float,
    bootstrap_value: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates; ``dones[t]`` marks an episode ending at step ``t``.

    Results are also stored on the buffer.
    """
    n = len(buffer)
    advantages = np.zeros(n)
    next_value = float(bootstrap_value)
    running = 0.0
    for t in reversed(range(n)):
        not_done = 1.0 - buffer.dones[t]
        delta = buffer.rewards[t] + discount_gamma * next_value * not_done - buffer.values[t]
        running = delta + discount_gamma * gae_lambda * not_done * running
        advantages[t] = running
        next_value = buffer.values[t]
    returns = advantages + buffer.values
    buffer.advantages = advantages
    buffer.returns = returns
    return advantages, returns


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


def learning_rate(timestep: int, total_timesteps: int, base: float = 3e-4) -> float:
    """``base * (1 - t / T)``, floored at zero past the budget."""
    return base * max(0.0, 1.0 - timestep / total_timesteps)


@dataclass
class AdamState:
    m: PolicyParams
    v: PolicyParams
    t: int = 0

    @classmethod
    def for_params(cls, params: PolicyParams) -> "AdamState":
        return cls(m=params.zeros_like(), v=params.zeros_like())


def adam_step(
    params: PolicyParams,
    grads: PolicyParams,
    state: AdamState,
    lr: float,
    *,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place bias-corrected Adam update of ``params``."""
    state.t += 1
    correction1 = 1.0 - beta1**state.t
    correction2 = 1.0 - beta2**state.t
    for name, grad in grads.items():
        m = getattr(state.m, name)
        v = getattr(state.v, name)
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        step = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        getattr(params, name)[...] -= step


def clip_by_global_norm(grads: PolicyParams, max_norm: float | None) -> tuple[PolicyParams, float]:
    norm = grads.global_norm()
    if max_norm is None or norm <= max_norm:
        return grads, norm
    scale = max_norm / (norm + 1e-6)
    return PolicyParams(**{name: array * scale for name, array in grads.items()}), norm


@dataclass(frozen=True)
class LossStats:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_frac: float
    approx_kl: float


def ppo_loss_and_grads(
    params: PolicyParams,
    obs: np.ndarray,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    *,
    clip_range: float,
    vf_coef: float,
    entropy_coef: float,
) -> tuple[LossStats, PolicyParams]:
    """Clipped-surrogate loss ``pg + vf_coef * mse - entropy_coef * H`` and its exact gradient."""
    batch = obs.shape[0]
    mean, value, cache = forward_with_cache(params, obs)
    log_std = params.log_std
    log_probs = gaussian_log_prob(actions, mean, log_std)
    log_ratio = log_probs - old_log_probs
    ratio = np.exp(log_ratio)
    surrogate = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range) * advantages
    policy_loss = -float(np.mean(np.minimum(surrogate, clipped)))
    value_error = value - returns
    value_loss = float(np.mean(value_error * value_error))
    entropy = gaussian_entropy(log_std)
    loss = policy_loss + vf_coef * value_loss - entropy_coef * entropy

    # Where the clipped term is the minimum the ratio sits outside the clip range.
    d_ratio = np.where(surrogate <= clipped, -advantages / batch, 0.0)
    d_log_prob = d_ratio * ratio
    inv_var = np.exp(-2.0 * log_std)
    residual = actions - mean
    d_mean = d_log_prob[:, None] * residual * inv_var
    z_squared = residual * residual * inv_var
    d_log_std = (d_log_prob[:, None] * (z_squared - 1.0)).sum(axis=0) - entropy_coef
    d_value = vf_coef * 2.0 * value_error / batch
    grads = policy_backward(params, cache, d_mean, d_value, d_log_std)

    stats = LossStats(
        loss=loss,
        policy_loss=policy_loss,
        value_loss=value_loss,
        entropy=entropy,
        clip_frac=float(np.mean(np.abs(ratio - 1.0) > clip_range)),
        approx_kl=float(0.5 * np.mean(log_ratio * log_ratio)),
    )
    return stats, grads


@dataclass(frozen=True)
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_frac: float
    approx_kl: float
    learning_rate: float
    grad_norm: float


def ppo_update(
    params: PolicyParams,
    buffer: RolloutBuffer,
    config: TrainConfig,
    update_index: int,
    *,
    optimizer: AdamState | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[PolicyParams, UpdateStats]:
    """``n_epochs`` passes over shuffled minibatches of one rollout; returns fresh parameters."""
    if len(buffer) != config.n_steps:
        raise ConfigurationError(
            f"Rollout holds {len(buffer)} steps; training config expects {config.n_steps}"
        )
    params = params.copy()
    optimizer = optimizer or AdamState.for_params(params)
    rng = rng or np.random.default_rng(np.random.SeedSequence([config.seed, update_index]))
    lr = learning_rate(update_index * config.n_steps, config.total_timesteps, config.base_learning_rate)
    advantages = normalize_advantages(buffer.advantages)

    collected: list[LossStats] = []
    grad_norms: list[float] = []
    size = config.minibatch_size
    for epoch in range(config.n_epochs):
        order = rng.permutation(config.n_steps)
        for start in range(0, config.n_steps, size):
            index = order[start : start + size]
            stats, grads = ppo_loss_and_grads(
                params,
                buffer.observations[index],
                buffer.actions[index],
                buffer.log_probs[index],
                advantages[index],
                buffer.returns[index],
                clip_range=config.clip_range,
                vf_coef=config.vf_coef,
                entropy_coef=config.entropy_coef,
            )
            if not math.isfinite(stats.loss):
                raise TrainingError(
                    f"Non-finite loss at update {update_index}, epoch {epoch}, minibatch {start // size}: "
                    f"policy_loss={stats.policy_loss}, value_loss={stats.value_loss}, "
                    f"entropy={stats.entropy}"
                )
            grads, norm = clip_by_global_norm(grads, config.max_grad_norm)
            adam_step(
                params,
                grads,
                optimizer,
                lr,
                beta1=config.adam_beta1,
                beta2=config.adam_beta2,
                eps=config.adam_eps,
            )
            collected.append(stats)
            grad_norms.append(norm)

    if not params.is_finite():
        raise TrainingError(f"Parameters became non-finite during update {update_index}")

    return params, UpdateStats(
        policy_loss=float(np.mean([s.policy_loss for s in collected])),
        value_loss=float(np.mean([s.value_loss for s in collected])),
        entropy=float(np.mean([s.entropy for s in collected])),
        clip_frac=float(np.mean([s.clip_frac for s in collected])),
        approx_kl=float(np.mean([s.approx_kl for s in collected])),
        learning_rate=lr,
        grad_norm=float(np.mean(grad_norms)),
    )


@dataclass
class EpisodeTracker:
    """Carries the live episode across rollout boundaries."""

    observation: np.ndarray
    episode_return: float = 0.0
    returns: deque = field(default_factory=lambda: deque(maxlen=EPISODE_WINDOW))
    final_distances: deque = field(default_factory=lambda: deque(maxlen=EPISODE_WINDOW))
    completed: int = 0


def collect_rollout(
    env: ReachEnv,
    params: PolicyParams,
    n_steps: int,
    rng: np.random.Generator,
    tracker: EpisodeTracker,
    obs_rms: RunningMeanStd | None = None,
) -> tuple[RolloutBuffer, float]:
    """Step ``env`` for ``n_steps`` with the stochastic policy; returns the buffer and bootstrap value.

    Stored actions are the unclamped samples so stored log-probabilities stay exact.
    """
    buffer = RolloutBuffer.allocate(n_steps, params.obs_dim, params.act_dim)
    std = np.exp(params.log_std)
    for t in range(n_steps):
        raw = tracker.observation
        if obs_rms is not None:
            obs_rms.update(raw)
            obs = obs_rms.normalize(raw)
        else:
            obs = raw
        mean, value = policy_forward(params, obs)
        action = mean + std * rng.standard_normal(mean.shape)
        result = env.step(np.clip(action, -1.0, 1.0))

        buffer.observations[t] = obs
        buffer.actions[t] = action
        buffer.log_probs[t] = gaussian_log_prob(action, mean, params.log_std)
        buffer.values[t] = value
        buffer.rewards[t] = result.reward
        buffer.dones[t] = float(result.done)

        tracker.episode_return += result.reward
        if result.done:
            tracker.returns.append(tracker.episode_return)
            tracker.final_distances.append(result.info.distance_x)
            tracker.completed += 1
            tracker.episode_return = 0.0
            tracker.observation = env.reset().as_array()
        else:
            tracker.observation = result.observation.as_array()

    last = tracker.observation
    if obs_rms is not None:
        last = obs_rms.normalize(last)
    _, bootstrap = policy_forward(params, last)
    return buffer, float(bootstrap)


@dataclass
class TrainResult:
    output_dir: Path
    metrics_path: Path
    checkpoints: list[Path]
    updates: int
    timesteps: int
    episodes: int
    mean_final_distance: float
    initial_mean_reward: float
    final_mean_reward: float
    initial_entropy: float
    final_entropy: float

    @property
    def final_checkpoint(self) -> Path | None:
        return self.checkpoints[-1] if self.checkpoints else None


def _mean_or_nan(values: Iterable[float]) -> float:
    values = list(values)
    return float(np.mean(values)) if values else float("nan")


def train(
    env_config: EnvConfig,
    train_config: TrainConfig,
    output_dir: str | Path,
) -> TrainResult:
    """Alternate rollout collection and PPO updates until the timestep budget or early stop.

    Writes ``metrics.csv`` (one row per update), ``config.json`` and a checkpoint
    every ``checkpoint_interval`` updates plus one after the last update.
    """
    output_dir = Path(output_dir)
    env = make_env(env_config)
    obs_dim = env.observation_space.shape[0]
    act_dim = env.action_space.shape[0]

    seeds = np.random.SeedSequence([train_config.seed, env_config.instance_id]).spawn(3)
    init_rng, action_rng, shuffle_rng = (np.random.default_rng(s) for s in seeds)
    params = PolicyParams.initialize(
        obs_dim, act_dim, init_rng, train_config.hidden_size, train_config.log_std_init
    )
    obs_rms = RunningMeanStd(obs_dim) if train_config.normalize_observations else None
    optimizer = AdamState.for_params(params)

    write_json_document(
        {**env_config.to_dict(), "train": train_config.to_dict()}, output_dir / CONFIG_FILENAME
    )
    metadata = {
        "variant": env_config.variant.value,
        "robot": env_config.robot,
        "instance_id": env_config.instance_id,
        "seed": train_config.seed,
    }

    tracker = EpisodeTracker(observation=env.reset().as_array())
    checkpoints: list[Path] = []
    metrics_path = output_dir / METRICS_FILENAME
    initial_reward = float("nan")
    initial_entropy = gaussian_entropy(params.log_std)
    final_reward = float("nan")
    timesteps = 0
    update = 0
    n_updates = train_config.n_updates

    logger.info(
        "Training %s on %s (instance %d): %d updates of %d steps",
        env_config.variant.value,
        env_config.robot,
        env_config.instance_id,
        n_updates,
        train_config.n_steps,
    )
    with MetricsLogWriter(metrics_path) as metrics:
        for update in range(1, n_updates + 1):
            buffer, bootstrap = collect_rollout(
                env, params, train_config.n_steps, action_rng, tracker, obs_rms
            )
            compute_gae(buffer, train_config.discount_gamma, train_config.gae_lambda, bootstrap)
            params, stats = ppo_update(
                params, buffer, train_config, update - 1, optimizer=optimizer, rng=shuffle_rng
            )
            timesteps += train_config.n_steps
            mean_reward = _mean_or_nan(tracker.returns)
            if update == 1:
                initial_reward = mean_reward
            final_reward = mean_reward

            metrics.write(
                MetricsRow(
                    update=update,
                    timesteps=timesteps,
                    mean_ep_reward=mean_reward,
                    entropy=stats.entropy,
                    policy_loss=stats.policy_loss,
                    value_loss=stats.value_loss,
                    clip_frac=stats.clip_frac,
                    approx_kl=stats.approx_kl,
                )
            )
            logger.info(
                "update %d/%d timesteps=%d mean_ep_reward=%.3f entropy=%.3f lr=%.2e kl=%.5f",
                update,
                n_updates,
                timesteps,
                mean_reward,
                stats.entropy,
                stats.learning_rate,
                stats.approx_kl,
            )

            stop_early = (
                train_config.early_stop_reward is not None
                and mean_reward >= train_config.early_stop_reward
            )
            if update % train_config.checkpoint_interval == 0 or update == n_updates or stop_early:
                path = output_dir / CHECKPOINT_DIRNAME / f"update-{update:05d}.npz"
                checkpoints.append(
                    save_checkpoint(
                        path,
                        params,
                        obs_rms=obs_rms,
                        metadata={**metadata, "update": update, "timesteps": timesteps},
                    )
                )
            if stop_early:
                logger.info("Mean episode reward %.3f reached the early-stop threshold", mean_reward)
                break

    return TrainResult(
        output_dir=output_dir,
        metrics_path=metrics_path,
        checkpoints=checkpoints,
        updates=update,
        timesteps=timesteps,
        episodes=tracker.completed,
        mean_final_distance=_mean_or_nan(tracker.final_distances),
        initial_mean_reward=initial_reward,
        final_mean_reward=final_reward,
        initial_entropy=initial_entropy,
        final_entropy=gaussian_entropy(params.log_std),
    )


def train_instances(
    env_config: EnvConfig,
    train_config: TrainConfig,
    instance_ids: Iterable[int],
    output_root: str | Path,
    *,
    workers: int | None = None,
) -> dict[int, TrainResult]:
    """Independent trainers, one per instance id, each in its own output folder."""
    ids = list(dict.fromkeys(int(i) for i in instance_ids))
    if not ids:
        raise ConfigurationError("No instance ids given")

    def run_one(instance_id: int) -> TrainResult:
        config = replace(env_config, instance_id=instance_id)
        return train(config, train_config, instance_dir(output_root, config.variant.value, instance_id))

    if len(ids) == 1:
        return {ids[0]: run_one(ids[0])}

    results: dict[int, TrainResult] = {}
    failures: dict[int, Exception] = {}
    with ThreadPoolExecutor(max_workers=workers or len(ids)) as executor:
        future_to_id = {executor.submit(run_one, instance_id): instance_id for instance_id in ids}
        for future in as_completed(future_to_id):
            instance_id = future_to_id[future]
            try:
                results[instance_id] = future.result()
            except Exception as exc:
                logger.error("Instance %d failed: %s", instance_id, exc)
                failures[instance_id] = exc
    if failures:
        detail = "; ".join(f"instance {i}: {failures[i]}" for i in sorted(failures))
        raise TrainingError(f"{len(failures)} of {len(ids)} training instances failed ({detail})")
    return dict(sorted(results.items()))


def resolve_checkpoint(checkpoint: Checkpoint | str | Path) -> Checkpoint:
    if isinstance(checkpoint, Checkpoint):
        return checkpoint
    return load_checkpoint(checkpoint)


def run_policy(
    checkpoint: Checkpoint | str | Path,
    env_config: EnvConfig,
    *,
    deterministic: bool = True,
    seed: int = 0,
) -> EpisodeLog:
    """One episode with a trained policy, stopping at success, collision or the step cap."""
    checkpoint = resolve_checkpoint(checkpoint)
    env = make_env(env_config)
    checkpoint.check_compatible(env.observation_space.shape[0], env.action_space.shape[0])
    runner = PolicyRunner(
        checkpoint.params,
        checkpoint.obs_rms,
        deterministic=deterministic,
        rng=np.random.default_rng(np.random.SeedSequence([seed, env_config.instance_id, 2])),
    )
    log = EpisodeLog()
    observation = env.reset().as_array()
    log.resets += 1
    episode_return = 0.0
    step = 0
    while True:
        result = env.step(runner(observation))
        log.record(step, env, result)
        episode_return += result.reward
        step += 1
        if result.done:
            break
        observation = result.observation.as_array()
    log.episode_returns.append(episode_return)
    log.terminations.append(termination_reason(result.info))
    return log
