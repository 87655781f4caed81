"""Deterministic synthetic scene generator standing in for the depth sensor.

Geometry: an open-top rectangular bath (planar floor plus four side walls)
viewed top-down by a pinhole camera 1 m above the floor; camera frame x
right, y down, z toward the floor. Knife handles are cylinders (2 cm
diameter, 12 cm long) capped by a hemisphere at the tip, resting on the
floor. Surface sampling weight falls linearly from 1.0 at the tip to 0.25 at
the base, which gives each handle its characteristic tip density peak
without modeling real range physics.

Every output is a pure function of the scenario spec (including its seed):
base surface samples are drawn once per instance, then each frame adds
per-axis Gaussian sensor noise (clipped at 3 sigma so all points stay inside
the bath envelope) and Bernoulli dropout. Hand intrusions add a transient
sphere of points above the bath during their intervals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .frames import CameraIntrinsics, PointCloudFrame

HANDLE_LENGTH = 0.12
HANDLE_RADIUS = 0.01
TIP_WEIGHT = 1.0
BASE_WEIGHT = 0.25


class PlacementError(RuntimeError):
    """Requested knife layout cannot be placed in the bath."""


@dataclass(frozen=True)
class BathRig:
    """Bath geometry, camera rig, and surface sampling density.

    The bath is a rectangular cavity sunk into a counter plane at rim height
    (so the scene has no exposed wall lip); the camera looks straight down
    from above the bath center.
    """

    bath_size: tuple[float, float, float] = (0.6, 0.4, 0.3)
    camera_height: float = 1.0
    intrinsics: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)
    )
    background_samples: int = 10_000
    knife_samples: int = 300
    hand_samples: int = 200
    hand_radius: float = 0.08
    fps: float = 30.0

    @property
    def floor_z(self) -> float:
        return self.camera_height

    @property
    def rim_z(self) -> float:
        return self.camera_height - self.bath_size[2]

    @property
    def half_extent(self) -> tuple[float, float]:
        return self.bath_size[0] / 2.0, self.bath_size[1] / 2.0

    @property
    def counter_half_extent(self) -> tuple[float, float]:
        """Counter plane extent: out to the camera FOV at rim height (inset 1 cm)."""
        k = self.intrinsics
        span_x = min(k.cx, k.width - 1 - k.cx) / k.fx * self.rim_z - 0.01
        span_y = min(k.cy, k.height - 1 - k.cy) / k.fy * self.rim_z - 0.01
        hx, hy = self.half_extent
        return max(span_x, hx), max(span_y, hy)


@dataclass(frozen=True)
class KnifePose:
    """Handle-tip cap center position and yaw of the tip-ward axis direction."""

    tip: tuple[float, float, float]
    yaw: float

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.yaw), math.sin(self.yaw), 0.0])

    @property
    def base(self) -> np.ndarray:
        return np.asarray(self.tip) - HANDLE_LENGTH * self.direction


def _pose_in_bath(pose: KnifePose, rig: BathRig) -> bool:
    hx, hy = rig.half_extent
    margin = HANDLE_RADIUS
    for p in (np.asarray(pose.tip), pose.base):
        if not (-hx + margin <= p[0] <= hx - margin):
            return False
        if not (-hy + margin <= p[1] <= hy - margin):
            return False
        if not (rig.rim_z <= p[2] <= rig.floor_z):
            return False
    return True


@dataclass(frozen=True)
class ScenarioSpec:
    knives: tuple[KnifePose, ...] = ()
    frame_count: int = 60
    noise_sigma: float = 0.002
    dropout: float = 0.0
    seed: int = 0
    hand_intrusions: tuple[tuple[float, float], ...] = ()
    rig: BathRig = field(default_factory=BathRig)

    def __post_init__(self) -> None:
        if not 0 <= len(self.knives) <= 8:
            raise ValueError("knife count must be 0..8")
        if self.frame_count < 0:
            raise ValueError("frame count must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        last_end = -math.inf
        for t0, t1 in self.hand_intrusions:
            if t0 >= t1 or t0 < last_end:
                raise ValueError("hand intrusions must be ordered and non-overlapping")
            last_end = t1
        for pose in self.knives:
            if not _pose_in_bath(pose, self.rig):
                raise ValueError(f"knife pose outside bath region: {pose}")


@dataclass(frozen=True)
class GroundTruth:
    counts: tuple[int, ...]
    knives: tuple[KnifePose, ...]
    hand_intervals: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict:
        return {
            "counts": list(self.counts),
            "knives": [{"tip": list(k.tip), "yaw": k.yaw} for k in self.knives],
            "hand_intervals": [list(iv) for iv in self.hand_intervals],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            counts=tuple(d["counts"]),
            knives=tuple(
                KnifePose(tip=tuple(k["tip"]), yaw=float(k["yaw"])) for k in d["knives"]
            ),
            hand_intervals=tuple(tuple(iv) for iv in d["hand_intervals"]),
        )


def write_ground_truth(gt: GroundTruth, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(gt.to_dict(), fh)


def read_ground_truth(path) -> GroundTruth:
    with open(path, "r", encoding="utf-8") as fh:
        return GroundTruth.from_dict(json.load(fh))


def _sample_bath(rig: BathRig, rng: np.random.Generator) -> np.ndarray:
    hx, hy = rig.half_extent
    cx, cy = rig.counter_half_extent
    depth = rig.bath_size[2]
    counter_area = 4 * cx * cy - 4 * hx * hy
    areas = np.array(
        [
            rig.bath_size[0] * rig.bath_size[1],  # floor
            rig.bath_size[0] * depth,  # wall y = -hy
            rig.bath_size[0] * depth,  # wall y = +hy
            rig.bath_size[1] * depth,  # wall x = -hx
            rig.bath_size[1] * depth,  # wall x = +hx
            counter_area,  # counter plane around the cavity at rim height
        ]
    )
    counts = np.floor(areas / areas.sum() * rig.background_samples).astype(int)
    counts[0] += rig.background_samples - counts.sum()

    parts = []
    u = rng.uniform(-hx, hx, counts[0])
    v = rng.uniform(-hy, hy, counts[0])
    parts.append(np.column_stack([u, v, np.full(counts[0], rig.floor_z)]))
    for sign, n in ((-1, counts[1]), (1, counts[2])):
        u = rng.uniform(-hx, hx, n)
        z = rng.uniform(rig.rim_z, rig.floor_z, n)
        parts.append(np.column_stack([u, np.full(n, sign * hy), z]))
    for sign, n in ((-1, counts[3]), (1, counts[4])):
        v = rng.uniform(-hy, hy, n)
        z = rng.uniform(rig.rim_z, rig.floor_z, n)
        parts.append(np.column_stack([np.full(n, sign * hx), v, z]))
    # counter: rejection-sample the rectangular ring around the cavity
    n = counts[5]
    ring = np.empty((0, 2))
    while len(ring) < n:
        cand = np.column_stack(
            [rng.uniform(-cx, cx, 2 * n), rng.uniform(-cy, cy, 2 * n)]
        )
        outside = (np.abs(cand[:, 0]) > hx) | (np.abs(cand[:, 1]) > hy)
        ring = np.concatenate([ring, cand[outside]])
    ring = ring[:n]
    parts.append(np.column_stack([ring, np.full(n, rig.rim_z)]))
    return np.concatenate(parts)


def _sample_knife(pose: KnifePose, n: int, rng: np.random.Generator) -> np.ndarray:
    """Surface samples of one handle, tip-weighted along the axis."""
    d = pose.direction
    n1 = np.array([-d[1], d[0], 0.0])
    n2 = np.array([0.0, 0.0, 1.0])
    tip = np.asarray(pose.tip)

    cap_mass = 2.0 * math.pi * HANDLE_RADIUS**2 * TIP_WEIGHT
    body_mass = (
        2.0 * math.pi * HANDLE_RADIUS * HANDLE_LENGTH * (TIP_WEIGHT + BASE_WEIGHT) / 2.0
    )
    n_cap = int(np.round(n * cap_mass / (cap_mass + body_mass)))
    n_body = n - n_cap

    # hemispherical cap: uniform sphere directions mirrored into the tip half
    u = rng.normal(size=(n_cap, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    dots = u @ d
    u -= 2.0 * np.minimum(dots, 0.0)[:, None] * d[None, :]
    cap_pts = tip + HANDLE_RADIUS * u

    # body: axial position from the linear tip->base weight via inverse CDF;
    # CDF(tau) = (tau - a*tau^2) / (1 - a), so solve a*tau^2 - tau + (1-a)*f = 0
    a = (1.0 - BASE_WEIGHT / TIP_WEIGHT) / 2.0
    f = rng.uniform(size=n_body)
    tau = (1.0 - np.sqrt(1.0 - 4.0 * a * (1.0 - a) * f)) / (2.0 * a)
    phi = rng.uniform(0.0, 2.0 * math.pi, n_body)
    radial = (
        np.cos(phi)[:, None] * n1[None, :] + np.sin(phi)[:, None] * n2[None, :]
    ) * HANDLE_RADIUS
    body_pts = tip - np.outer(tau * HANDLE_LENGTH, d) + radial
    return np.concatenate([cap_pts, body_pts])


def _sample_hand(rig: BathRig, rng: np.random.Generator) -> np.ndarray:
    center = np.array([0.0, 0.0, rig.rim_z - 0.10])
    u = rng.normal(size=(rig.hand_samples, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return center + rig.hand_radius * u


def _jitter(base: np.ndarray, sigma: float, dropout: float, rng: np.random.Generator) -> np.ndarray:
    noise = rng.normal(0.0, 1.0, base.shape)
    keep = rng.uniform(size=len(base)) >= dropout
    pts = base + np.clip(noise, -3.0, 3.0) * sigma
    return pts[keep]


def generate_sequence(spec: ScenarioSpec) -> tuple[list[PointCloudFrame], GroundTruth]:
    """Render all frames of a scenario along with its exact ground truth."""
    rig = spec.rig
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(5)]
    rng_bg_base, rng_knife_base, rng_bg, rng_knife, rng_hand = streams

    bg_base = _sample_bath(rig, rng_bg_base)
    if spec.knives:
        knife_base = np.concatenate(
            [_sample_knife(p, rig.knife_samples, rng_knife_base) for p in spec.knives]
        )
    else:
        knife_base = np.empty((0, 3))
    hand_base = _sample_hand(rig, rng_hand) if spec.hand_intrusions else None

    frames = []
    for i in range(spec.frame_count):
        t = i / rig.fps
        parts = [
            _jitter(bg_base, spec.noise_sigma, spec.dropout, rng_bg),
            _jitter(knife_base, spec.noise_sigma, spec.dropout, rng_knife),
        ]
        if hand_base is not None and any(t0 <= t < t1 for t0, t1 in spec.hand_intrusions):
            parts.append(_jitter(hand_base, spec.noise_sigma, 0.0, rng_hand))
        frames.append(PointCloudFrame(t, np.concatenate(parts).astype(np.float32)))

    gt = GroundTruth(
        counts=(len(spec.knives),) * spec.frame_count,
        knives=spec.knives,
        hand_intervals=spec.hand_intrusions,
    )
    return frames, gt


def generate_background(spec: ScenarioSpec) -> list[PointCloudFrame]:
    """Prescan frames of the empty bath; requires a knife-free spec."""
    if spec.knives:
        raise ValueError("background generation requires knife count 0")
    frames, _ = generate_sequence(spec)
    return frames


def _instance_seed(seed: int, count: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, count, index]).generate_state(1, np.uint64)[0])


def _segment_distance_2d(p0, d0, l0, p1, d1, l1) -> float:
    """Min distance between two 2D segments p - t*d, t in [0, l]."""
    samples = np.linspace(0.0, 1.0, 33)
    a = np.asarray(p0)[None, :2] - np.outer(samples * l0, np.asarray(d0)[:2])
    b = np.asarray(p1)[None, :2] - np.outer(samples * l1, np.asarray(d1)[:2])
    diff = a[:, None, :] - b[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).min())


def place_knives(
    count: int,
    rig: BathRig,
    rng: np.random.Generator,
    min_tip_separation: float = 0.04,
    max_attempts: int = 500,
) -> tuple[KnifePose, ...]:
    """Random resting poses with tips kept clear of other tips and bodies."""
    hx, hy = rig.half_extent
    z = rig.floor_z - HANDLE_RADIUS
    margin = 0.03  # keep handles clear of the walls' fine-filter shadow
    poses: list[KnifePose] = []
    for _ in range(count):
        for _attempt in range(max_attempts):
            tip = (
                rng.uniform(-hx + margin, hx - margin),
                rng.uniform(-hy + margin, hy - margin),
                z,
            )
            yaw = rng.uniform(0.0, 2.0 * math.pi)
            pose = KnifePose(tip=tip, yaw=yaw)
            if not _pose_in_bath(pose, rig):
                continue
            ok = True
            for other in poses:
                tip_d = math.dist(pose.tip[:2], other.tip[:2])
                if tip_d < min_tip_separation:
                    ok = False
                    break
                # tips must stay clear of the other handle's body as well
                if (
                    _segment_distance_2d(pose.tip, pose.direction, 0.0, other.tip, other.direction, HANDLE_LENGTH)
                    < min_tip_separation
                    or _segment_distance_2d(other.tip, other.direction, 0.0, pose.tip, pose.direction, HANDLE_LENGTH)
                    < min_tip_separation
                ):
                    ok = False
                    break
            if ok:
                poses.append(pose)
                break
        else:
            raise PlacementError(
                f"could not place knife {len(poses) + 1}/{count} "
                f"with separation {min_tip_separation}"
            )
    return tuple(poses)


def generate_benchmark(
    counts=range(1, 6),
    instances: int = 50,
    seed: int = 0,
    min_tip_separation: float = 0.04,
    frame_count: int = 60,
    rig: BathRig = BathRig(),
) -> list[tuple[ScenarioSpec, GroundTruth]]:
    """Reproducible benchmark suite: `instances` scenarios per knife count."""
    if instances < 1:
        raise ValueError("instances must be >= 1")
    out = []
    for count in counts:
        for idx in range(instances):
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, count, idx, 1])
            )
            poses = place_knives(count, rig, rng, min_tip_separation)
            spec = ScenarioSpec(
                knives=poses,
                frame_count=frame_count,
                seed=_instance_seed(seed, count, idx),
                rig=rig,
            )
            gt = GroundTruth(
                counts=(count,) * frame_count, knives=poses, hand_intervals=()
            )
            out.append((spec, gt))
    return out


def clumped_pair_spec(
    seed: int,
    surface_gap: float = 0.01,
    frame_count: int = 60,
    rig: BathRig = BathRig(),
) -> ScenarioSpec:
    """Two parallel handles separated by `surface_gap` between their surfaces.

    Stress layout for separability: axes sit 2 * HANDLE_RADIUS + surface_gap
    apart, tips aligned side by side.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 97]))
    hx, hy = rig.half_extent
    z = rig.floor_z - HANDLE_RADIUS
    offset = 2.0 * HANDLE_RADIUS + surface_gap
    for _ in range(1000):
        yaw = rng.uniform(0.0, 2.0 * math.pi)
        cx = rng.uniform(-hx * 0.6, hx * 0.6)
        cy = rng.uniform(-hy * 0.6, hy * 0.6)
        n1 = np.array([-math.sin(yaw), math.cos(yaw)])
        tips = [
            (cx + s * n1[0] * offset / 2.0, cy + s * n1[1] * offset / 2.0, z)
            for s in (-1.0, 1.0)
        ]
        poses = tuple(KnifePose(tip=t, yaw=yaw) for t in tips)
        if all(_pose_in_bath(p, rig) for p in poses):
            return ScenarioSpec(
                knives=poses,
                frame_count=frame_count,
                seed=_instance_seed(seed, 2, 0),
                rig=rig,
            )
    raise PlacementError("could not place the clumped pair")
