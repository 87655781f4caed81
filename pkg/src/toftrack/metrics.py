"""Detection-count error metrics and track identity stability.

Count errors follow the usual definitions; NRMSE normalizes RMSE by the true
object count of the scenario. ID switches count the frames where a
ground-truth object's matched track id differs from its previously matched
id (unmatched frames are skipped, not counted as switches).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

DEFAULT_MATCH_GATE_PX = 30.0


@dataclass(frozen=True)
class CountSeries:
    predicted: tuple[int, ...]
    truth: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.predicted) != len(self.truth):
            raise ValueError("predicted and truth series must have equal length")
        if len(self.predicted) < 1:
            raise ValueError("series must be non-empty")
        if any(p < 0 for p in self.predicted) or any(t < 0 for t in self.truth):
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class CountErrors:
    mae: float
    rmse: float
    nrmse: float

    def as_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "nrmse": self.nrmse}


def count_errors(series: CountSeries, n_objects: int) -> CountErrors:
    """MAE, RMSE, and RMSE / n_objects over a per-frame count series."""
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    err = np.asarray(series.predicted, np.float64) - np.asarray(series.truth, np.float64)
    mae = float(np.abs(err).mean())
    rmse = float(math.sqrt((err**2).mean()))
    return CountErrors(mae=mae, rmse=rmse, nrmse=rmse / n_objects)


def id_switches(assignments: Sequence[Sequence[int | None]]) -> int:
    """Count identity changes per ground-truth object across frames.

    `assignments[f][o]` is the track id matched to object `o` at frame `f`,
    or None when unmatched. A switch is counted whenever an object's id
    differs from its previously matched id.
    """
    if not assignments:
        return 0
    n_objects = len(assignments[0])
    switches = 0
    last: list[int | None] = [None] * n_objects
    for frame in assignments:
        if len(frame) != n_objects:
            raise ValueError("every frame must assign all ground-truth objects")
        for o, tid in enumerate(frame):
            if tid is None:
                continue
            if last[o] is not None and tid != last[o]:
                switches += 1
            last[o] = tid
    return switches


def match_to_truth(
    track_ids: Sequence[int],
    track_points: np.ndarray,
    truth_points: np.ndarray,
    gate: float = DEFAULT_MATCH_GATE_PX,
) -> list[int | None]:
    """Per-object nearest-track match within a distance gate (one frame).

    Points are 2D (pixel) coordinates; each object takes the nearest track
    center within `gate`, ties broken by lower track id.
    """
    truth = np.asarray(truth_points, np.float64).reshape(-1, 2)
    out: list[int | None] = [None] * len(truth)
    if len(track_ids) == 0:
        return out
    pts = np.asarray(track_points, np.float64).reshape(-1, 2)
    ids = np.asarray(track_ids)
    for o, tp in enumerate(truth):
        d = np.hypot(pts[:, 0] - tp[0], pts[:, 1] - tp[1])
        order = np.lexsort((ids, d))
        best = order[0]
        if d[best] <= gate:
            out[o] = int(ids[best])
    return out


def benchmark_table(series_by_count: Mapping[int, CountSeries]) -> dict:
    """Aggregate count errors for the five benchmark scenarios (1..5 objects)."""
    required = set(range(1, 6))
    if set(series_by_count) != required:
        missing = sorted(required - set(series_by_count))
        raise ValueError(f"benchmark requires scenarios 1..5, missing {missing}")
    rows = {}
    for n in sorted(series_by_count):
        rows[str(n)] = count_errors(series_by_count[n], n).as_dict()
    return {"metric": ["mae", "rmse", "nrmse"], "objects": rows}


def format_benchmark_table(table: dict) -> str:
    """Human-readable rendering of :func:`benchmark_table` output."""
    lines = [f"{'objects':>8} {'MAE':>8} {'RMSE':>8} {'NRMSE':>8}"]
    for n, row in table["objects"].items():
        lines.append(
            f"{n:>8} {row['mae']:>8.3f} {row['rmse']:>8.3f} {row['nrmse']:>8.3f}"
        )
    return "\n".join(lines)
