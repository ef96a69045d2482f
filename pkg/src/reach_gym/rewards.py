"""Reach reward functions for the four environment variants.

``x`` is always the RMS distance between end-effector and target (Euclidean
distance over sqrt(3)) and ``y`` the geodesic orientation angle in radians.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
import math
from typing import Any

import numpy as np

from .common import ConfigurationError, ContractViolation


PENALTY_BASE_FLOOR = 1e-6


@dataclass(frozen=True)
class RewardHyperparams:
    alpha: float = 5.0
    beta: float = 1.5
    gamma: float = 1.0
    delta: float = 3.0
    eta: float = 0.03
    done: float = 0.02
    collision_orient_exponent: float = 0.03

    def __post_init__(self):
        checks = (
            (self.alpha > 0, "alpha must be > 0"),
            (self.beta > 0, "beta must be > 0"),
            (self.gamma > -1, "gamma must be > -1"),
            (self.delta >= 0, "delta must be >= 0"),
            (self.eta > 0, "eta must be > 0"),
            (self.done > 0, "done must be > 0"),
            (self.collision_orient_exponent > 0, "collision_orient_exponent must be > 0"),
        )
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(f"Invalid reward hyperparameters: {message}")

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None, base: "RewardHyperparams | None" = None):
        base = base or cls()
        if not data:
            return base
        known = {item.name for item in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown reward hyperparameters: {', '.join(unknown)}")
        return replace(base, **{key: float(value) for key, value in data.items()})


def _check_distance(x: float) -> None:
    if not x >= 0:
        raise ContractViolation(f"Distance must be non-negative, got {x}")


def _check_angle(y: float) -> None:
    if not 0.0 <= y <= math.pi:
        raise ContractViolation(f"Orientation angle must lie in [0, pi], got {y}")


def distance_fraction(x: float, h: RewardHyperparams) -> float:
    """The bracketed distance term shared by every variant; 11 at ``x = 0``."""
    _check_distance(x)
    floor = math.exp(-h.alpha)
    numerator = math.exp(-h.alpha * x) - floor + 10.0 * (math.exp(-h.alpha * x / h.done) - floor)
    return numerator / (1.0 - floor)


def reward_mara(x: float, h: RewardHyperparams) -> float:
    return distance_fraction(x, h) - 1.0


def orientation_factor(y: float, h: RewardHyperparams) -> float:
    _check_angle(y)
    return (1.0 + h.gamma - (y / math.pi) ** h.beta) / (1.0 + h.gamma)


def reward_orient_core(x: float, y: float, h: RewardHyperparams) -> float:
    return distance_fraction(x, h) * orientation_factor(y, h) - 1.0


def _penalty_base(value: float) -> float:
    # A fractional power needs a positive base; far from the target the distance term is negative.
    return max(abs(value), PENALTY_BASE_FLOOR)


def collision_penalty(x: float, h: RewardHyperparams) -> float:
    return h.delta * _penalty_base(2.0 * min(distance_fraction(x, h), 0.5)) ** h.eta


def collision_orient_penalty(x: float, h: RewardHyperparams) -> float:
    return h.delta * _penalty_base(2.0 * distance_fraction(x, h)) ** h.collision_orient_exponent


def reward_collision(x: float, colliding: bool, h: RewardHyperparams) -> float:
    base = reward_mara(x, h)
    if not colliding:
        return base
    return base - collision_penalty(x, h)


def reward_collision_orient(x: float, y: float, colliding: bool, h: RewardHyperparams) -> float:
    core = reward_orient_core(x, y, h)
    if not colliding:
        return core
    return core - collision_orient_penalty(x, h)


def reward_surface(
    h: RewardHyperparams,
    nx: int,
    ny: int,
    *,
    x_max: float = 1.0,
) -> np.ndarray:
    """Row-major ``(nx * ny, 3)`` grid of ``(x, y, reward_orient_core)``; x varies slowest."""
    if nx < 2 or ny < 2:
        raise ContractViolation(f"Reward surface needs at least 2x2 cells, got {nx}x{ny}")
    xs = np.linspace(0.0, x_max, nx)
    ys = np.linspace(0.0, math.pi, ny)
    grid = np.empty((nx * ny, 3))
    row = 0
    for x in xs:
        for y in ys:
            grid[row] = (x, y, reward_orient_core(float(x), float(y), h))
            row += 1
    return grid
