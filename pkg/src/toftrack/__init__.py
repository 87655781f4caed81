"""Depth-only object detection, tracking, and sanitization dwell monitoring.

Processes streams of timestamped 3D point-cloud frames: static background
subtraction, FIFO frame accumulation, Gaussian KDE with percentile filtering,
hierarchical density-based clustering, 2D SORT-style tracking, and per-track
dwell-time compliance with hand-presence gating.
"""

from .accumulate import FrameAccumulator, subsample
from .background import BackgroundModel, build_model, coarse_filter, fine_filter, subtract
from .cluster import ClusterParams, ClusterResult, cluster, core_distances
from .compliance import ComplianceConfig, ComplianceEngine, HandEvent, Status
from .config import PipelineConfig
from .density import DensityCloud, heatmap, kde, kde_exact, percentile_filter
from .frames import (
    CameraIntrinsics,
    PointCloudFrame,
    SequenceHeader,
    project_point,
    project_points,
    read_sequence,
    write_sequence,
)
from .metrics import CountErrors, CountSeries, benchmark_table, count_errors, id_switches
from .pipeline import RunResult, bench, evaluate_log, run_pipeline
from .scenegen import (
    BathRig,
    GroundTruth,
    KnifePose,
    ScenarioSpec,
    generate_background,
    generate_benchmark,
    generate_sequence,
)
from .tracking import DetectionBox, SortTracker, detections_from_clusters, hungarian, iou

__version__ = "0.1.0"
