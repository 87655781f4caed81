"""Pipeline configuration: one flat JSON document of "module.key" entries.

Unknown keys are rejected; every value is bounds-checked against its module's
contract. The effective config (defaults merged with overrides) can be dumped
for audit reproducibility via the CLI's --print-config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .tracking import KALMAN_P0_DIAG, KALMAN_Q_DIAG, KALMAN_R_DIAG


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    seed: int = 0
    voxel_size_m: float = 0.01
    fine_radius_m: float = 0.01
    k: int = 5
    subsample_target: int = 4000
    bandwidth_m: float = 0.015
    percentile: float = 70.0
    min_cluster_size: int = 15
    min_samples: int = 5
    iou_min: float = 0.3
    max_age: int = 15
    min_hits: int = 3
    pad_px: float = 4.0
    centroid_box: bool = False
    centroid_box_px: tuple[float, float] = (40.0, 20.0)
    kalman_r: tuple[float, ...] = KALMAN_R_DIAG
    kalman_q: tuple[float, ...] = KALMAN_Q_DIAG
    kalman_p0: tuple[float, ...] = KALMAN_P0_DIAG
    required_dwell_s: float = 10.0
    warmup_frames: int = 10
    match_gate_px: float = 30.0

    _FLAT_KEYS = {
        "seed": "seed",
        "background.voxel_size_m": "voxel_size_m",
        "background.fine_radius_m": "fine_radius_m",
        "accumulator.k": "k",
        "accumulator.subsample_target": "subsample_target",
        "density.bandwidth_m": "bandwidth_m",
        "density.percentile": "percentile",
        "cluster.min_cluster_size": "min_cluster_size",
        "cluster.min_samples": "min_samples",
        "tracker.iou_min": "iou_min",
        "tracker.max_age": "max_age",
        "tracker.min_hits": "min_hits",
        "tracker.pad_px": "pad_px",
        "tracker.centroid_box": "centroid_box",
        "tracker.centroid_box_px": "centroid_box_px",
        "tracker.kalman_r": "kalman_r",
        "tracker.kalman_q": "kalman_q",
        "tracker.kalman_p0": "kalman_p0",
        "compliance.required_dwell_s": "required_dwell_s",
        "eval.warmup_frames": "warmup_frames",
        "eval.match_gate_px": "match_gate_px",
    }

    def __post_init__(self) -> None:
        self.centroid_box_px = tuple(float(v) for v in self.centroid_box_px)
        self.kalman_r = tuple(float(v) for v in self.kalman_r)
        self.kalman_q = tuple(float(v) for v in self.kalman_q)
        self.kalman_p0 = tuple(float(v) for v in self.kalman_p0)
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.voxel_size_m > 0, "background.voxel_size_m must be > 0"),
            (self.fine_radius_m > 0, "background.fine_radius_m must be > 0"),
            (self.k >= 1, "accumulator.k must be >= 1"),
            (self.subsample_target >= 0, "accumulator.subsample_target must be >= 0"),
            (self.bandwidth_m > 0, "density.bandwidth_m must be > 0"),
            (0 <= self.percentile <= 100, "density.percentile must be in [0, 100]"),
            (self.min_cluster_size >= 2, "cluster.min_cluster_size must be >= 2"),
            (self.min_samples >= 1, "cluster.min_samples must be >= 1"),
            (0 <= self.iou_min <= 1, "tracker.iou_min must be in [0, 1]"),
            (self.max_age >= 1, "tracker.max_age must be >= 1"),
            (self.min_hits >= 1, "tracker.min_hits must be >= 1"),
            (self.pad_px >= 0, "tracker.pad_px must be >= 0"),
            (len(self.centroid_box_px) == 2 and min(self.centroid_box_px) > 0,
             "tracker.centroid_box_px must be two positive sizes"),
            (len(self.kalman_r) == 4, "tracker.kalman_r must have 4 entries"),
            (len(self.kalman_q) == 7, "tracker.kalman_q must have 7 entries"),
            (len(self.kalman_p0) == 7, "tracker.kalman_p0 must have 7 entries"),
            (self.required_dwell_s > 0, "compliance.required_dwell_s must be > 0"),
            (self.warmup_frames >= 0, "eval.warmup_frames must be >= 0"),
            (self.match_gate_px > 0, "eval.match_gate_px must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_flat(cls, flat: dict) -> "PipelineConfig":
        unknown = set(flat) - set(cls._FLAT_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {cls._FLAT_KEYS[k]: v for k, v in flat.items()}
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_flat(self) -> dict:
        out = {}
        for flat_key, attr in self._FLAT_KEYS.items():
            v = getattr(self, attr)
            out[flat_key] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_json_file(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                flat = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(flat, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_flat(flat)

    def to_json(self) -> str:
        return json.dumps(self.to_flat(), indent=2, sort_keys=True)
