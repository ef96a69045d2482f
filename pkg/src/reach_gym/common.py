"""Shared errors and helpers for the environments, trainer and CLI flows."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any


FORMAT_VERSION = 1


class ReachGymError(Exception):
    """Base class for every error raised by reach-gym."""


class ContractViolation(ReachGymError, ValueError):
    """An operation was called outside its preconditions."""


class ConfigurationError(ReachGymError, ValueError):
    """A config, model file or CLI value failed validation."""


class CheckpointError(ReachGymError):
    """A checkpoint could not be written, read or matched to a config."""


class TrainingError(ReachGymError, RuntimeError):
    """Training produced a non-finite loss or could not continue."""


class BenchmarkError(ReachGymError, RuntimeError):
    pass


class MetricsParseError(ReachGymError, ValueError):
    def __init__(self, path: str | Path, line_number: int, message: str):
        self.path = Path(path)
        self.line_number = line_number
        super().__init__(f"{path}: line {line_number}: {message}")


def slugify(text: str | None) -> str:
    if not text:
        return "unknown"
    slug = re.sub(r"[^A-Za-z0-9._-]+", "-", text)
    return slug.strip("-") or "unknown"


def instance_dir(root: str | Path, variant: str, instance_id: int) -> Path:
    """Namespace outputs so parallel instances never share files."""
    return Path(root) / slugify(variant) / f"instance-{int(instance_id):03d}"


def load_json_document(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"Cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"Invalid JSON in {path} at line {exc.lineno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top-level value must be an object")
    version = data.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigurationError(
            f"{path}: unsupported format_version {version!r} (expected {FORMAT_VERSION})"
        )
    return data


def write_json_document(data: dict[str, Any], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"format_version": FORMAT_VERSION, **data}
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
    return path
