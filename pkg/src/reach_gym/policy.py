"""Two-hidden-layer tanh MLP policy and value networks with hand-written backprop."""

from __future__ import annotations

from dataclasses import dataclass, fields
import math
from typing import Iterator

import numpy as np

from .common import ContractViolation


HIDDEN_SIZE = 64
LOG_2PI = math.log(2.0 * math.pi)
ENTROPY_CONSTANT = 0.5 * math.log(2.0 * math.pi * math.e)


@dataclass
class PolicyParams:
    """Policy network, its separate value-network copy, and the state-independent log std.

    Weight matrices are stored ``(out, in)`` so a layer computes ``x @ w.T + b``.
    """

    pi_w1: np.ndarray
    pi_b1: np.ndarray
    pi_w2: np.ndarray
    pi_b2: np.ndarray
    pi_w3: np.ndarray
    pi_b3: np.ndarray
    vf_w1: np.ndarray
    vf_b1: np.ndarray
    vf_w2: np.ndarray
    vf_b2: np.ndarray
    vf_w3: np.ndarray
    vf_b3: np.ndarray
    log_std: np.ndarray

    @property
    def obs_dim(self) -> int:
        return self.pi_w1.shape[1]

    @property
    def act_dim(self) -> int:
        return self.pi_w3.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.pi_w1.shape[0]

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(item.name for item in fields(cls))

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in self.names():
            yield name, getattr(self, name)

    def arrays(self) -> dict[str, np.ndarray]:
        return dict(self.items())

    def copy(self) -> "PolicyParams":
        return PolicyParams(**{name: array.copy() for name, array in self.items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(array)) for _, array in self.items())

    def global_norm(self) -> float:
        return math.sqrt(sum(float(np.sum(array * array)) for _, array in self.items()))

    @staticmethod
    def expected_shapes(obs_dim: int, act_dim: int, hidden: int = HIDDEN_SIZE) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        for prefix, out_dim in (("pi", act_dim), ("vf", 1)):
            shapes[f"{prefix}_w1"] = (hidden, obs_dim)
            shapes[f"{prefix}_b1"] = (hidden,)
            shapes[f"{prefix}_w2"] = (hidden, hidden)
            shapes[f"{prefix}_b2"] = (hidden,)
            shapes[f"{prefix}_w3"] = (out_dim, hidden)
            shapes[f"{prefix}_b3"] = (out_dim,)
        shapes["log_std"] = (act_dim,)
        return shapes

    def check_shapes(self) -> None:
        expected = self.expected_shapes(self.obs_dim, self.act_dim, self.hidden_size)
        for name, array in self.items():
            if array.shape != expected[name]:
                raise ContractViolation(
                    f"Parameter {name} has shape {array.shape}, expected {expected[name]}"
                )

    @classmethod
    def zeros(cls, obs_dim: int, act_dim: int, hidden: int = HIDDEN_SIZE) -> "PolicyParams":
        shapes = cls.expected_shapes(obs_dim, act_dim, hidden)
        return cls(**{name: np.zeros(shape) for name, shape in shapes.items()})

    def zeros_like(self) -> "PolicyParams":
        return PolicyParams(**{name: np.zeros_like(array) for name, array in self.items()})

    @classmethod
    def initialize(
        cls,
        obs_dim: int,
        act_dim: int,
        rng: np.random.Generator,
        hidden: int = HIDDEN_SIZE,
        log_std_init: float = 0.0,
    ) -> "PolicyParams":
        params = cls.zeros(obs_dim, act_dim, hidden)
        for prefix, out_gain in (("pi", 0.01), ("vf", 1.0)):
            for layer, gain in (("w1", math.sqrt(2.0)), ("w2", math.sqrt(2.0)), ("w3", out_gain)):
                name = f"{prefix}_{layer}"
                setattr(params, name, orthogonal(getattr(params, name).shape, gain, rng))
        params.log_std[:] = log_std_init
        return params


def orthogonal(shape: tuple[int, int], gain: float, rng: np.random.Generator) -> np.ndarray:
    rows, cols = shape
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


@dataclass
class ForwardCache:
    obs: np.ndarray
    pi_h1: np.ndarray
    pi_h2: np.ndarray
    vf_h1: np.ndarray
    vf_h2: np.ndarray


def _as_batch(params: PolicyParams, obs) -> tuple[np.ndarray, bool]:
    obs = np.asarray(obs, dtype=np.float64)
    single = obs.ndim == 1
    batch = obs[None, :] if single else obs
    if batch.ndim != 2 or batch.shape[1] != params.obs_dim:
        raise ContractViolation(
            f"Observation width {batch.shape[-1]} does not match policy input {params.obs_dim}"
        )
    return batch, single


def forward_with_cache(params: PolicyParams, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
    pi_h1 = np.tanh(obs @ params.pi_w1.T + params.pi_b1)
    pi_h2 = np.tanh(pi_h1 @ params.pi_w2.T + params.pi_b2)
    mean = pi_h2 @ params.pi_w3.T + params.pi_b3
    vf_h1 = np.tanh(obs @ params.vf_w1.T + params.vf_b1)
    vf_h2 = np.tanh(vf_h1 @ params.vf_w2.T + params.vf_b2)
    value = (vf_h2 @ params.vf_w3.T + params.vf_b3)[:, 0]
    return mean, value, ForwardCache(obs, pi_h1, pi_h2, vf_h1, vf_h2)


def policy_forward(params: PolicyParams, obs) -> tuple[np.ndarray, np.ndarray | float]:
    """Action mean and state value for one observation or a ``(batch, obs_dim)`` array."""
    batch, single = _as_batch(params, obs)
    mean, value, _ = forward_with_cache(params, batch)
    if single:
        return mean[0], float(value[0])
    return mean, value


def _backprop_mlp(
    x: np.ndarray,
    h1: np.ndarray,
    h2: np.ndarray,
    w2: np.ndarray,
    w3: np.ndarray,
    d_out: np.ndarray,
) -> tuple[np.ndarray, ...]:
    d_w3 = d_out.T @ h2
    d_b3 = d_out.sum(axis=0)
    d_z2 = (d_out @ w3) * (1.0 - h2 * h2)
    d_w2 = d_z2.T @ h1
    d_b2 = d_z2.sum(axis=0)
    d_z1 = (d_z2 @ w2) * (1.0 - h1 * h1)
    d_w1 = d_z1.T @ x
    d_b1 = d_z1.sum(axis=0)
    return d_w1, d_b1, d_w2, d_b2, d_w3, d_b3


def policy_backward(
    params: PolicyParams,
    cache: ForwardCache,
    d_mean: np.ndarray,
    d_value: np.ndarray,
    d_log_std: np.ndarray,
) -> PolicyParams:
    """Gradients of a scalar loss given its gradients w.r.t. the network outputs."""
    pi = _backprop_mlp(cache.obs, cache.pi_h1, cache.pi_h2, params.pi_w2, params.pi_w3, d_mean)
    vf = _backprop_mlp(
        cache.obs, cache.vf_h1, cache.vf_h2, params.vf_w2, params.vf_w3, d_value.reshape(-1, 1)
    )
    return PolicyParams(*pi, *vf, np.asarray(d_log_std, dtype=np.float64).copy())


def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Diagonal-Gaussian log density summed over the last axis."""
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * log_std.size * LOG_2PI


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(log_std) + log_std.size * ENTROPY_CONSTANT)


def sample_action(params: PolicyParams, obs, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Draw from ``Normal(mean, exp(log_std))``; the log density is of the unclamped sample."""
    mean, _ = policy_forward(params, obs)
    action = mean + np.exp(params.log_std) * rng.standard_normal(mean.shape)
    return action, float(gaussian_log_prob(action, mean, params.log_std))


class RunningMeanStd:
    """Streaming observation mean/variance (parallel-variance merge of batches)."""

    def __init__(self, shape: int | tuple[int, ...], epsilon: float = 1e-4, clip: float = 10.0):
        self.mean = np.zeros(shape)
        self.var = np.ones(shape)
        self.count = epsilon
        self.clip = clip

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(batch)
        batch_mean = batch.mean(axis=0)
        batch_var = batch.var(axis=0)
        batch_count = batch.shape[0]
        delta = batch_mean - self.mean
        total = self.count + batch_count
        self.mean = self.mean + delta * batch_count / total
        m2 = self.var * self.count + batch_var * batch_count + delta * delta * self.count * batch_count / total
        self.var = m2 / total
        self.count = total

    def normalize(self, obs: np.ndarray) -> np.ndarray:
        return np.clip((obs - self.mean) / np.sqrt(self.var + 1e-8), -self.clip, self.clip)


class PolicyRunner:
    """Maps raw environment observations to clamped actions for evaluation."""

    def __init__(
        self,
        params: PolicyParams,
        obs_rms: RunningMeanStd | None = None,
        *,
        deterministic: bool = True,
        rng: np.random.Generator | None = None,
    ):
        self.params = params
        self.obs_rms = obs_rms
        self.deterministic = deterministic
        self.rng = rng or np.random.default_rng(0)

    def __call__(self, observation: np.ndarray) -> np.ndarray:
        obs = self.obs_rms.normalize(observation) if self.obs_rms is not None else observation
        if self.deterministic:
            action, _ = policy_forward(self.params, obs)
        else:
            action, _ = sample_action(self.params, obs, self.rng)
        return np.clip(action, -1.0, 1.0)
