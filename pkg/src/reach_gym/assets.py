"""Packaged robot models and per-variant defaults."""

from __future__ import annotations

from functools import lru_cache
import json
from pathlib import Path
from typing import Any


ASSET_ROOT = Path(__file__).parent / "data"
BUILTIN_ROBOTS: dict[str, str] = {
    "mara-like": "mara_like.json",
    "planar-2dof": "planar_2dof.json",
}
DEFAULT_ROBOT = "mara-like"


def read_asset_text(relative_path: str) -> str:
    return (ASSET_ROOT / relative_path).read_text(encoding="utf-8")


def resolve_robot_source(robot: str | Path | None) -> Path:
    selected = str(robot or DEFAULT_ROBOT).strip()
    builtin = BUILTIN_ROBOTS.get(selected.lower())
    if builtin:
        return ASSET_ROOT / builtin

    candidate = Path(selected).expanduser()
    if candidate.exists() and candidate.is_file():
        return candidate

    valid = ", ".join(sorted(BUILTIN_ROBOTS.keys()))
    raise ValueError(
        f"Unknown robot `{selected}`. Use one of [{valid}] or provide a model file path."
    )


@lru_cache(maxsize=1)
def _variant_defaults() -> dict[str, Any]:
    data = json.loads(read_asset_text("variants.json"))
    data.pop("format_version", None)
    return data


def variant_defaults(variant: str) -> dict[str, Any]:
    """Reward and training overrides shipped for one environment variant."""
    entry = _variant_defaults().get(variant, {})
    return {
        "reward_params": dict(entry.get("reward_params", {})),
        "train": dict(entry.get("train", {})),
    }
