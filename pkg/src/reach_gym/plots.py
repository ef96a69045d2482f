"""Reward and entropy curves from a training metrics log."""

from __future__ import annotations

import csv
from dataclasses import dataclass
import logging
from pathlib import Path

from matplotlib.figure import Figure

from .common import MetricsParseError
from .exporters import MetricsRow, read_metrics_log


logger = logging.getLogger(__name__)

REWARD_SERIES_FILENAME = "reward.csv"
ENTROPY_SERIES_FILENAME = "entropy.csv"
CURVES_FILENAME = "training_curves.png"


@dataclass(frozen=True)
class PlotOutputs:
    reward_series: Path
    entropy_series: Path
    image: Path | None
    points: int


def _write_series(path: Path, column: str, rows: list[MetricsRow]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(("update", column))
        for row in rows:
            writer.writerow((row.update, getattr(row, column)))
    return path


def read_series_csv(path: str | Path) -> list[tuple[int, float]]:
    path = Path(path)
    series: list[tuple[int, float]] = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or len(header) != 2 or header[0] != "update":
            raise MetricsParseError(path, 1, "expected header update,<value>")
        for line_number, record in enumerate(reader, start=2):
            try:
                update, value = record
                series.append((int(update), float(value)))
            except ValueError as exc:
                raise MetricsParseError(path, line_number, str(exc)) from exc
    return series


def _render_curves(rows: list[MetricsRow], path: Path) -> Path:
    updates = [row.update for row in rows]
    figure = Figure(figsize=(10, 4))
    reward_axis, entropy_axis = figure.subplots(1, 2)
    reward_axis.plot(updates, [row.mean_ep_reward for row in rows])
    reward_axis.set_title("Mean episode reward")
    reward_axis.set_xlabel("Update")
    reward_axis.grid(True)
    entropy_axis.plot(updates, [row.entropy for row in rows], color="tab:orange")
    entropy_axis.set_title("Policy entropy")
    entropy_axis.set_xlabel("Update")
    entropy_axis.grid(True)
    figure.tight_layout()
    figure.savefig(path)
    return path


def emit_plots(metrics_log: str | Path, output_dir: str | Path, *, image: bool = True) -> PlotOutputs:
    """Write reward/entropy series CSVs and a line-chart image next to each other.

    An empty log yields header-only series files and no image.
    """
    rows = read_metrics_log(metrics_log)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    reward_path = _write_series(output_dir / REWARD_SERIES_FILENAME, "mean_ep_reward", rows)
    entropy_path = _write_series(output_dir / ENTROPY_SERIES_FILENAME, "entropy", rows)
    if not rows:
        logger.warning("Metrics log %s has no rows; wrote empty series", metrics_log)
        return PlotOutputs(reward_path, entropy_path, None, 0)

    image_path = _render_curves(rows, output_dir / CURVES_FILENAME) if image else None
    return PlotOutputs(reward_path, entropy_path, image_path, len(rows))
