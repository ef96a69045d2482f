"""Checkpoint files: policy weights plus observation statistics in one ``.npz`` container.

The container holds a JSON ``header`` (format version, architecture shapes, byte
order, metadata) and one little-endian float64 array per parameter, stored
row-major. No pickled objects are written or accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import os
from pathlib import Path
from typing import Any

import numpy as np

from .common import CheckpointError
from .policy import HIDDEN_SIZE, PolicyParams, RunningMeanStd


CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_SUFFIX = ".npz"
BYTE_ORDER = "little"
ARRAY_DTYPE = "<f8"


@dataclass
class Checkpoint:
    params: PolicyParams
    obs_rms: RunningMeanStd | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def check_compatible(self, obs_dim: int, act_dim: int) -> None:
        if (self.params.obs_dim, self.params.act_dim) != (obs_dim, act_dim):
            raise CheckpointError(
                f"Checkpoint architecture is {self.params.obs_dim} inputs -> {self.params.act_dim} "
                f"actions, but the environment needs {obs_dim} -> {act_dim}"
            )


def save_checkpoint(
    path: str | Path,
    params: PolicyParams,
    *,
    obs_rms: RunningMeanStd | None = None,
    metadata: dict[str, Any] | None = None,
) -> Path:
    path = Path(path)
    if path.suffix != CHECKPOINT_SUFFIX:
        path = path.with_suffix(CHECKPOINT_SUFFIX)
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "byte_order": BYTE_ORDER,
        "dtype": ARRAY_DTYPE,
        "obs_dim": params.obs_dim,
        "act_dim": params.act_dim,
        "hidden_size": params.hidden_size,
        "activation": "tanh",
        "shapes": {name: list(array.shape) for name, array in params.items()},
        "obs_rms_count": obs_rms.count if obs_rms is not None else None,
        "metadata": metadata or {},
    }
    arrays = {name: np.ascontiguousarray(array, dtype=ARRAY_DTYPE) for name, array in params.items()}
    if obs_rms is not None:
        arrays["obs_rms_mean"] = np.ascontiguousarray(obs_rms.mean, dtype=ARRAY_DTYPE)
        arrays["obs_rms_var"] = np.ascontiguousarray(obs_rms.var, dtype=ARRAY_DTYPE)

    tmp_path = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tmp_path.open("wb") as handle:
            np.savez(handle, header=np.array(json.dumps(header, sort_keys=True)), **arrays)
        os.replace(tmp_path, path)
    except OSError as exc:
        raise CheckpointError(f"Failed to write checkpoint {path}: {exc}") from exc
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            contents = {name: data[name] for name in data.files if name != "header"}
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"Cannot read checkpoint {path}: {exc}") from exc

    if not isinstance(header, dict):
        raise CheckpointError(f"{path}: checkpoint header must be an object")
    version = header.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format_version {version!r}")

    dims = {}
    for key, default in (("obs_dim", None), ("act_dim", None), ("hidden_size", HIDDEN_SIZE)):
        value = header.get(key, default)
        if not isinstance(value, int) or value < 1:
            raise CheckpointError(f"{path}: checkpoint header has no valid `{key}`")
        dims[key] = value

    expected = PolicyParams.expected_shapes(dims["obs_dim"], dims["act_dim"], dims["hidden_size"])
    arrays: dict[str, np.ndarray] = {}
    for name, shape in expected.items():
        if name not in contents:
            raise CheckpointError(f"{path}: missing parameter array `{name}`")
        array = contents[name]
        if tuple(array.shape) != shape:
            raise CheckpointError(
                f"{path}: parameter `{name}` has shape {tuple(array.shape)}, header implies {shape}"
            )
        arrays[name] = array.astype(np.float64)

    obs_rms = None
    if "obs_rms_mean" in contents:
        if "obs_rms_var" not in contents:
            raise CheckpointError(f"{path}: observation statistics lack `obs_rms_var`")
        obs_rms = RunningMeanStd(dims["obs_dim"])
        obs_rms.mean = contents["obs_rms_mean"].astype(np.float64)
        obs_rms.var = contents["obs_rms_var"].astype(np.float64)
        obs_rms.count = float(header.get("obs_rms_count") or 0.0)

    return Checkpoint(
        params=PolicyParams(**arrays),
        obs_rms=obs_rms,
        metadata=dict(header.get("metadata", {})),
    )


def find_checkpoints(root: str | Path) -> list[Path]:
    """Checkpoints under ``root``, newest first."""
    root = Path(root)
    if not root.exists():
        return []
    found = [path for path in root.glob(f"**/*{CHECKPOINT_SUFFIX}") if path.is_file()]
    found.sort(key=lambda item: item.stat().st_mtime, reverse=True)
    return found
