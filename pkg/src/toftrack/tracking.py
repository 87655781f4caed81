"""Online multi-object tracking over 2D detections (SORT-style).

Detections are axis-aligned pixel boxes derived from cluster projections.
Each track runs a 7-state constant-velocity Kalman filter over
[u, v, s, r, du, dv, ds] where (u, v) is the box center, s its area, and r
its aspect ratio (no velocity). Association minimizes 1 - IoU with a
Hungarian solve; pairs below the IoU floor are rejected afterwards.

Lifecycle: unmatched detections spawn tentative tracks, confirmed after
``min_hits`` consecutive hits (confirmation is sticky); tracks unmatched for
more than ``max_age`` frames are dropped. ``step`` returns all live confirmed
tracks, including ones coasting on prediction, so brief detection dropouts do
not blink the reported count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cluster import ClusterResult
from .frames import CameraIntrinsics, ProjectionError, project_points

log = logging.getLogger(__name__)

INFEASIBLE_COST = 1.0e6

# Constant-velocity transition and measurement matrices.
_F = np.eye(7)
_F[0, 4] = _F[1, 5] = _F[2, 6] = 1.0
_H = np.zeros((4, 7))
_H[0, 0] = _H[1, 1] = _H[2, 2] = _H[3, 3] = 1.0

# Standard SORT noise constants.
KALMAN_R_DIAG = (1.0, 1.0, 10.0, 10.0)
KALMAN_P0_DIAG = (10.0, 10.0, 10.0, 10.0, 1.0e4, 1.0e4, 1.0e4)
KALMAN_Q_DIAG = (1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1.0e-4)


@dataclass(frozen=True)
class DetectionBox:
    u_min: float
    v_min: float
    u_max: float
    v_max: float
    centroid: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        if not (self.u_min < self.u_max and self.v_min < self.v_max):
            raise ValueError("box must have positive extent")

    @property
    def box(self) -> np.ndarray:
        return np.array([self.u_min, self.v_min, self.u_max, self.v_max])


def detections_from_clusters(
    result: ClusterResult,
    points: np.ndarray,
    intrinsics: CameraIntrinsics,
    pad: float = 4.0,
) -> list[DetectionBox]:
    """Axis-aligned box of each cluster's projected members, padded per side.

    Clusters containing unprojectable points (z <= 0) are skipped with a
    warning.
    """
    dets: list[DetectionBox] = []
    skipped = 0
    pts = np.asarray(points, np.float64).reshape(-1, 3)
    for c in range(result.n_clusters):
        members = pts[result.labels == c]
        try:
            uv = project_points(members, intrinsics)
        except ProjectionError:
            skipped += 1
            continue
        dets.append(
            DetectionBox(
                u_min=float(uv[:, 0].min() - pad),
                v_min=float(uv[:, 1].min() - pad),
                u_max=float(uv[:, 0].max() + pad),
                v_max=float(uv[:, 1].max() + pad),
                centroid=result.centroids[c],
            )
        )
    if skipped:
        log.warning("skipped %d cluster detection(s) with unprojectable points", skipped)
    return dets


def centroid_detections(
    result: ClusterResult,
    intrinsics: CameraIntrinsics,
    box_size: tuple[float, float] = (40.0, 20.0),
) -> list[DetectionBox]:
    """Fixed-size boxes centered on projected cluster centroids.

    Fallback detection mode for feeding bare centroids to the tracker.
    """
    dets: list[DetectionBox] = []
    skipped = 0
    w, h = box_size
    for c in range(result.n_clusters):
        try:
            uv = project_points(result.centroids[c].reshape(1, 3), intrinsics)[0]
        except ProjectionError:
            skipped += 1
            continue
        dets.append(
            DetectionBox(
                u_min=float(uv[0] - w / 2), v_min=float(uv[1] - h / 2),
                u_max=float(uv[0] + w / 2), v_max=float(uv[1] + h / 2),
                centroid=result.centroids[c],
            )
        )
    if skipped:
        log.warning("skipped %d centroid detection(s) with z <= 0", skipped)
    return dets


def iou(a, b) -> float:
    """Intersection over union of two [u0, v0, u1, v1] boxes."""
    a = np.asarray(a, np.float64).reshape(4)
    b = np.asarray(b, np.float64).reshape(4)
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    a = np.asarray(boxes_a, np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def hungarian(cost: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    """Minimum-total-cost one-to-one assignment of min(m, n) pairs."""
    c = np.asarray(cost, np.float64)
    if c.ndim != 2:
        raise ValueError("cost must be a 2D matrix")
    if c.size == 0:
        return [], 0.0
    if not np.isfinite(c).all():
        raise ValueError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(c)
    pairs = list(zip(rows.tolist(), cols.tolist()))
    return pairs, float(c[rows, cols].sum())


def box_to_z(box: np.ndarray) -> np.ndarray:
    """[u0,v0,u1,v1] -> measurement [center u, center v, area, aspect]."""
    w = box[2] - box[0]
    h = box[3] - box[1]
    return np.array([box[0] + w / 2.0, box[1] + h / 2.0, w * h, w / h])


def z_to_box(z: np.ndarray) -> np.ndarray:
    w = np.sqrt(max(z[2] * z[3], 0.0))
    h = z[2] / w if w > 0 else 0.0
    return np.array([z[0] - w / 2.0, z[1] - h / 2.0, z[0] + w / 2.0, z[1] + h / 2.0])


class KalmanBoxFilter:
    """Constant-velocity Kalman filter over [u, v, s, r, du, dv, ds]."""

    def __init__(
        self,
        box: np.ndarray,
        r_diag=KALMAN_R_DIAG,
        q_diag=KALMAN_Q_DIAG,
        p0_diag=KALMAN_P0_DIAG,
        validate: bool = False,
    ):
        self.x = np.zeros(7)
        self.x[:4] = box_to_z(np.asarray(box, np.float64))
        self.P = np.diag(np.asarray(p0_diag, np.float64))
        self.Q = np.diag(np.asarray(q_diag, np.float64))
        self.R = np.diag(np.asarray(r_diag, np.float64))
        self.validate = validate

    def _check(self) -> None:
        self.P = (self.P + self.P.T) / 2.0
        if self.validate:
            lo = float(np.linalg.eigvalsh(self.P).min())
            if lo < -1e-9:
                raise FloatingPointError(f"covariance lost PSD (min eigenvalue {lo})")

    def predict(self) -> np.ndarray:
        if self.x[2] + self.x[6] <= 0:  # keep predicted area positive
            self.x[6] = 0.0
        self.x = _F @ self.x
        self.P = _F @ self.P @ _F.T + self.Q
        self._check()
        return self.box

    def update(self, box: np.ndarray) -> np.ndarray:
        z = box_to_z(np.asarray(box, np.float64))
        y = z - _H @ self.x
        S = _H @ self.P @ _H.T + self.R
        K = np.linalg.solve(S.T, (self.P @ _H.T).T).T
        self.x = self.x + K @ y
        self.P = (np.eye(7) - K @ _H) @ self.P
        self._check()
        return self.box

    @property
    def box(self) -> np.ndarray:
        return z_to_box(self.x)


class Track:
    def __init__(self, track_id: int, det: DetectionBox, kalman_kwargs: dict):
        self.id = track_id
        self.kf = KalmanBoxFilter(det.box, **kalman_kwargs)
        self.centroid = det.centroid
        self.hits = 1
        self.hit_streak = 1
        self.age = 0
        self.time_since_update = 0
        self.confirmed = False

    @property
    def box(self) -> np.ndarray:
        return self.kf.box

    def predict(self) -> np.ndarray:
        if self.time_since_update > 0:
            self.hit_streak = 0
        self.time_since_update += 1
        self.age += 1
        return self.kf.predict()

    def update(self, det: DetectionBox) -> None:
        self.kf.update(det.box)
        self.centroid = det.centroid
        self.hits += 1
        self.hit_streak += 1
        self.time_since_update = 0


class SortTracker:
    """Tracking-by-detection with persistent integer IDs (never reused)."""

    def __init__(
        self,
        iou_min: float = 0.3,
        max_age: int = 15,
        min_hits: int = 3,
        kalman_kwargs: dict | None = None,
    ):
        self.iou_min = iou_min
        self.max_age = max_age
        self.min_hits = min_hits
        self.kalman_kwargs = kalman_kwargs or {}
        self.tracks: list[Track] = []
        self.frame_count = 0
        self._next_id = 1

    def active_tracks(self) -> list[Track]:
        """Current confirmed tracks without advancing the tracker."""
        return [t for t in self.tracks if t.confirmed]

    def step(self, detections: list[DetectionBox]) -> list[Track]:
        """Advance one frame: predict, associate, update, manage lifecycle."""
        self.frame_count += 1
        for t in self.tracks:
            t.predict()

        matches, unmatched_dets = self._associate(detections)
        for ti, di in matches:
            self.tracks[ti].update(detections[di])
        for di in unmatched_dets:
            t = Track(self._next_id, detections[di], self.kalman_kwargs)
            self._next_id += 1
            self.tracks.append(t)

        for t in self.tracks:
            if not t.confirmed and t.hit_streak >= self.min_hits:
                t.confirmed = True
        self.tracks = [t for t in self.tracks if t.time_since_update <= self.max_age]
        return self.active_tracks()

    def _associate(self, detections) -> tuple[list[tuple[int, int]], list[int]]:
        if not self.tracks or not detections:
            return [], list(range(len(detections)))
        trk_boxes = np.array([t.box for t in self.tracks])
        det_boxes = np.array([d.box for d in detections])
        ious = iou_matrix(trk_boxes, det_boxes)
        cost = 1.0 - ious
        cost[ious < self.iou_min] = INFEASIBLE_COST
        pairs, _ = hungarian(cost)
        matches = [(r, c) for r, c in pairs if ious[r, c] >= self.iou_min]
        matched_dets = {c for _, c in matches}
        unmatched = [c for c in range(len(detections)) if c not in matched_dets]
        return matches, unmatched
