"""Point-cloud frame model, pinhole camera geometry, and the sequence file format.

Coordinate convention: right-handed camera frame, x right, y down, z forward
(z > 0 in front of the camera). All coordinates are meters; timestamps are
float64 seconds and strictly increase within a sequence.

Sequence file layout (little-endian)::

    magic  b"TOFS"
    u32    format version (= 1)
    u32    frame count
    f32x4  fx, fy, cx, cy
    u32x2  width, height
    per frame:
        f64    timestamp
        u32    point count
        f32x3  x, y, z  (point count times)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

MAGIC = b"TOFS"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sII4f2I")
_FRAME_HEAD = struct.Struct("<dI")


class SequenceFormatError(ValueError):
    """Stream does not look like a sequence file (bad magic or version)."""


class SequenceCorruptionError(ValueError):
    """Stream is a sequence file but its payload is inconsistent or truncated."""


class ProjectionError(ValueError):
    """Point cannot be projected (z <= 0)."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass
class PointCloudFrame:
    """One timestamped set of 3D points, stored as a float32 (N, 3) array."""

    timestamp: float
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 3), np.float32))

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float32)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("point coordinates must be finite")
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class SequenceHeader:
    version: int
    frame_count: int
    intrinsics: CameraIntrinsics


def project_points(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Project (N, 3) camera-frame points to real-valued (N, 2) pixel coordinates.

    u = fx*x/z + cx, v = fy*y/z + cy. Raises ProjectionError if any z <= 0.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = pts[:, 2]
    if np.any(z <= 0):
        raise ProjectionError("cannot project points with z <= 0")
    uv = np.empty((pts.shape[0], 2))
    uv[:, 0] = intr.fx * pts[:, 0] / z + intr.cx
    uv[:, 1] = intr.fy * pts[:, 1] / z + intr.cy
    return uv


def project_point(p, intr: CameraIntrinsics) -> tuple[float, float]:
    """Single-point variant of :func:`project_points`."""
    uv = project_points(np.asarray(p, dtype=np.float64).reshape(1, 3), intr)
    return float(uv[0, 0]), float(uv[0, 1])


def write_sequence(
    frames: list[PointCloudFrame], header: SequenceHeader, sink: BinaryIO
) -> int:
    """Serialize frames to `sink`; returns the number of bytes written.

    Frames must be ordered by strictly increasing timestamp and match the
    header's frame count.
    """
    if header.version != FORMAT_VERSION:
        raise SequenceFormatError(f"unsupported version {header.version}")
    if header.frame_count != len(frames):
        raise ValueError(
            f"header frame count {header.frame_count} != {len(frames)} frames"
        )
    ts = [f.timestamp for f in frames]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("frame timestamps must strictly increase")

    k = header.intrinsics
    written = sink.write(
        _HEADER.pack(
            MAGIC, header.version, header.frame_count,
            k.fx, k.fy, k.cx, k.cy, k.width, k.height,
        )
    )
    for frame in frames:
        written += sink.write(_FRAME_HEAD.pack(frame.timestamp, len(frame)))
        written += sink.write(np.ascontiguousarray(frame.points, "<f4").tobytes())
    return written


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise SequenceCorruptionError(f"truncated stream while reading {what}")
    return buf


def read_sequence(source: BinaryIO) -> tuple[SequenceHeader, list[PointCloudFrame]]:
    """Exact inverse of :func:`write_sequence`."""
    head = source.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise SequenceFormatError("stream too short for a sequence header")
    magic, version, count, fx, fy, cx, cy, width, height = _HEADER.unpack(head)
    if magic != MAGIC:
        raise SequenceFormatError(f"bad magic bytes {magic!r}")
    if version != FORMAT_VERSION:
        raise SequenceFormatError(f"unsupported version {version}")
    header = SequenceHeader(
        version=version,
        frame_count=count,
        intrinsics=CameraIntrinsics(fx, fy, cx, cy, width, height),
    )

    frames: list[PointCloudFrame] = []
    last_t = -np.inf
    for i in range(count):
        t, n = _FRAME_HEAD.unpack(_read_exact(source, _FRAME_HEAD.size, f"frame {i}"))
        if t <= last_t:
            raise SequenceCorruptionError(f"non-monotonic timestamp at frame {i}")
        last_t = t
        raw = _read_exact(source, 12 * n, f"frame {i} points")
        pts = np.frombuffer(raw, "<f4").reshape(n, 3).copy()
        frames.append(PointCloudFrame(t, pts))
    return header, frames


def write_sequence_file(path, frames: list[PointCloudFrame], intrinsics: CameraIntrinsics) -> int:
    header = SequenceHeader(FORMAT_VERSION, len(frames), intrinsics)
    with open(path, "wb") as fh:
        return write_sequence(frames, header, fh)


def read_sequence_file(path) -> tuple[SequenceHeader, list[PointCloudFrame]]:
    with open(path, "rb") as fh:
        return read_sequence(fh)
