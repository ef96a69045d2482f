"""CSV writers and readers for trajectories, reward surfaces and training metrics."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .common import MetricsParseError
from .envs import TrajectoryRow


REWARD_SURFACE_HEADER = ("x", "y", "reward")
METRICS_HEADER = (
    "update",
    "timesteps",
    "mean_ep_reward",
    "entropy",
    "policy_loss",
    "value_loss",
    "clip_frac",
    "approx_kl",
)


def trajectory_header(n_joints: int) -> list[str]:
    return ["step", *[f"q{i + 1}" for i in range(n_joints)], "ee_x", "ee_y", "ee_z", "reward", "done"]


def write_trajectory_csv(rows: Sequence[TrajectoryRow], path: str | Path, n_joints: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(trajectory_header(n_joints))
        for row in rows:
            writer.writerow(
                [row.step, *row.joint_positions, *row.ee_position, row.reward, int(row.done)]
            )
    return path


def read_trajectory_csv(path: str | Path) -> list[TrajectoryRow]:
    path = Path(path)
    rows: list[TrajectoryRow] = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[0] != "step" or header[-1] != "done":
            raise MetricsParseError(path, 1, "not a trajectory file")
        n_joints = len(header) - 6
        for line_number, record in enumerate(reader, start=2):
            try:
                values = [float(value) for value in record]
            except ValueError as exc:
                raise MetricsParseError(path, line_number, str(exc)) from exc
            if len(values) != len(header):
                raise MetricsParseError(path, line_number, f"expected {len(header)} columns")
            rows.append(
                TrajectoryRow(
                    step=int(values[0]),
                    joint_positions=tuple(values[1 : 1 + n_joints]),
                    ee_position=tuple(values[1 + n_joints : 4 + n_joints]),
                    reward=values[4 + n_joints],
                    done=bool(int(values[5 + n_joints])),
                )
            )
    return rows


def write_reward_surface_csv(grid: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REWARD_SURFACE_HEADER)
        for x, y, reward in grid:
            writer.writerow([float(x), float(y), float(reward)])
    return path


def read_reward_surface_csv(path: str | Path) -> np.ndarray:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if tuple(header or ()) != REWARD_SURFACE_HEADER:
            raise MetricsParseError(path, 1, f"expected header {','.join(REWARD_SURFACE_HEADER)}")
        values = []
        for line_number, record in enumerate(reader, start=2):
            try:
                values.append([float(value) for value in record])
            except ValueError as exc:
                raise MetricsParseError(path, line_number, str(exc)) from exc
            if len(record) != 3:
                raise MetricsParseError(path, line_number, "expected 3 columns")
    return np.array(values).reshape(-1, 3)


@dataclass(frozen=True)
class MetricsRow:
    update: int
    timesteps: int
    mean_ep_reward: float
    entropy: float
    policy_loss: float
    value_loss: float
    clip_frac: float
    approx_kl: float


class MetricsLogWriter:
    """Append-only metrics CSV; each row is flushed so a crashed run keeps its history."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle: TextIO = self.path.open("w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._handle)
        self._writer.writerow(METRICS_HEADER)
        self._handle.flush()

    def write(self, row: MetricsRow) -> None:
        self._writer.writerow(astuple(row))
        self._handle.flush()

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> "MetricsLogWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def write_metrics_log(rows: Iterable[MetricsRow], path: str | Path) -> Path:
    with MetricsLogWriter(path) as writer:
        for row in rows:
            writer.write(row)
    return Path(path)


def read_metrics_log(path: str | Path) -> list[MetricsRow]:
    path = Path(path)
    converters = [int if item.type in (int, "int") else float for item in fields(MetricsRow)]
    rows: list[MetricsRow] = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            return rows
        if tuple(header) != METRICS_HEADER:
            raise MetricsParseError(path, 1, f"expected header {','.join(METRICS_HEADER)}")
        for line_number, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(METRICS_HEADER):
                raise MetricsParseError(
                    path, line_number, f"expected {len(METRICS_HEADER)} columns, got {len(record)}"
                )
            try:
                values = [convert(value) for convert, value in zip(converters, record)]
            except ValueError as exc:
                raise MetricsParseError(path, line_number, str(exc)) from exc
            rows.append(MetricsRow(*values))
    return rows

