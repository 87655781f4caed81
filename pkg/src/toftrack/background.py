"""Static background model and coarse-to-fine foreground extraction.

The model is built once from prescan frames of the empty scene: a voxel
occupancy set (coarse stage) plus a KD-tree over a deduplicated subset of the
prescan points (fine stage). Live frames are filtered in two passes: drop
points whose voxel is occupied by background, then drop points whose nearest
background point is within the fine radius.

Model file layout (little-endian): magic b"TOFM", u32 version (= 1),
f32 voxel size, f32 fine radius, u32 point count, then f32 xyz triplets.
The voxel occupancy set is rebuilt from the stored points on load.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np
from scipy.spatial import cKDTree

from .frames import PointCloudFrame

MODEL_MAGIC = b"TOFM"
MODEL_VERSION = 1
_MODEL_HEAD = struct.Struct("<4sIffI")

# Cap on deduplicated representatives kept per voxel; bounds KD-tree size
# under long prescans.
MAX_POINTS_PER_VOXEL = 8

_BIAS = 1 << 20  # voxel index offset so packed codes stay positive


class ModelError(ValueError):
    """Background model cannot be built or parsed."""


def voxel_codes(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """Pack per-axis floor(p / voxel_size) indices into one int64 per point."""
    idx = np.floor(np.asarray(points, np.float64) / voxel_size).astype(np.int64)
    if np.any(np.abs(idx) >= _BIAS):
        raise ValueError("points out of supported voxel index range")
    idx += _BIAS
    return (idx[:, 0] << 42) | (idx[:, 1] << 21) | idx[:, 2]


@dataclass
class BackgroundModel:
    voxel_size: float
    fine_radius: float
    points: np.ndarray          # deduplicated prescan points, float64 (M, 3)
    occupied: np.ndarray        # sorted unique voxel codes, int64
    tree: cKDTree

    def occupied_voxels(self) -> set[tuple[int, int, int]]:
        """Occupied set as integer 3-tuples (mainly for inspection/tests)."""
        codes = self.occupied
        ix = (codes >> 42) - _BIAS
        iy = ((codes >> 21) & (2**21 - 1)) - _BIAS
        iz = (codes & (2**21 - 1)) - _BIAS
        return set(zip(ix.tolist(), iy.tolist(), iz.tolist()))


def build_model(
    prescan_frames: list[PointCloudFrame],
    voxel_size: float = 0.01,
    fine_radius: float = 0.01,
    max_per_voxel: int = MAX_POINTS_PER_VOXEL,
) -> BackgroundModel:
    """Build the model from prescan frames of the empty scene."""
    if voxel_size <= 0 or fine_radius <= 0:
        raise ValueError("voxel size and fine radius must be positive")
    clouds = [f.points for f in prescan_frames if len(f) > 0]
    if not clouds:
        raise ModelError("prescan contains no points")
    pts = np.concatenate(clouds).astype(np.float64)

    codes = voxel_codes(pts, voxel_size)
    occupied = np.unique(codes)

    # Keep at most max_per_voxel representatives per voxel, in prescan order.
    order = np.argsort(codes, kind="stable")
    sorted_codes = codes[order]
    group_start = np.searchsorted(sorted_codes, sorted_codes, side="left")
    rank_in_group = np.arange(len(sorted_codes)) - group_start
    keep = order[rank_in_group < max_per_voxel]
    keep.sort()
    reps = pts[keep]

    return BackgroundModel(
        voxel_size=float(voxel_size),
        fine_radius=float(fine_radius),
        points=reps,
        occupied=occupied,
        tree=cKDTree(reps),
    )


def _points_of(frame) -> np.ndarray:
    return frame.points if isinstance(frame, PointCloudFrame) else np.asarray(frame)


def coarse_filter(frame, model: BackgroundModel) -> np.ndarray:
    """Keep only points whose voxel is not occupied by background (order kept)."""
    pts = _points_of(frame)
    if len(pts) == 0:
        return pts.reshape(0, 3)
    codes = voxel_codes(pts, model.voxel_size)
    pos = np.searchsorted(model.occupied, codes)
    pos = np.minimum(pos, len(model.occupied) - 1)
    hit = model.occupied[pos] == codes
    return pts[~hit]


def fine_filter(points: np.ndarray, model: BackgroundModel) -> np.ndarray:
    """Keep only points farther than the fine radius from every background point."""
    pts = np.asarray(points)
    if len(pts) == 0:
        return pts.reshape(0, 3)
    dist, _ = model.tree.query(pts.astype(np.float64), k=1)
    return pts[dist > model.fine_radius]


def subtract(frame, model: BackgroundModel) -> np.ndarray:
    """Coarse-to-fine background subtraction of one frame."""
    return fine_filter(coarse_filter(frame, model), model)


def save_model(model: BackgroundModel, sink: BinaryIO) -> int:
    pts32 = np.ascontiguousarray(model.points, "<f4")
    written = sink.write(
        _MODEL_HEAD.pack(
            MODEL_MAGIC, MODEL_VERSION,
            model.voxel_size, model.fine_radius, len(pts32),
        )
    )
    written += sink.write(pts32.tobytes())
    return written


def load_model(source: BinaryIO) -> BackgroundModel:
    head = source.read(_MODEL_HEAD.size)
    if len(head) < _MODEL_HEAD.size:
        raise ModelError("stream too short for a model header")
    magic, version, voxel_size, fine_radius, count = _MODEL_HEAD.unpack(head)
    if magic != MODEL_MAGIC:
        raise ModelError(f"bad magic bytes {magic!r}")
    if version != MODEL_VERSION:
        raise ModelError(f"unsupported model version {version}")
    raw = source.read(12 * count)
    if len(raw) != 12 * count:
        raise ModelError("truncated model payload")
    pts = np.frombuffer(raw, "<f4").reshape(count, 3).astype(np.float64)
    return BackgroundModel(
        voxel_size=float(voxel_size),
        fine_radius=float(fine_radius),
        points=pts,
        occupied=np.unique(voxel_codes(pts, voxel_size)),
        tree=cKDTree(pts),
    )


def save_model_file(path, model: BackgroundModel) -> int:
    with open(path, "wb") as fh:
        return save_model(model, fh)


def load_model_file(path) -> BackgroundModel:
    with open(path, "rb") as fh:
        return load_model(fh)
