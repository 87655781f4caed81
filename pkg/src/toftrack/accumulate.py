"""FIFO accumulation of foreground points over a sliding window of frames.

Accumulating k successive foreground clouds yields a denser cloud for density
estimation; random subsampling then bounds the downstream per-frame cost.
"""

from __future__ import annotations

from collections import deque

import numpy as np


class OrderingError(ValueError):
    """Timestamps pushed out of order."""


class FrameAccumulator:
    """Ring buffer of the last <= k foreground clouds with their timestamps."""

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("window length k must be >= 1")
        self.k = int(k)
        self._frames: deque[tuple[float, np.ndarray]] = deque(maxlen=self.k)

    def __len__(self) -> int:
        return len(self._frames)

    @property
    def timestamps(self) -> list[float]:
        return [t for t, _ in self._frames]

    def push(self, points: np.ndarray, timestamp: float) -> None:
        """Append one foreground cloud; evicts the oldest beyond k frames."""
        if self._frames and timestamp <= self._frames[-1][0]:
            raise OrderingError(
                f"timestamp {timestamp} not after {self._frames[-1][0]}"
            )
        pts = np.asarray(points, np.float64).reshape(-1, 3)
        self._frames.append((float(timestamp), pts))

    def current_cloud(self) -> np.ndarray:
        """Concatenation of all buffered clouds, oldest first (duplicates kept)."""
        if not self._frames:
            return np.empty((0, 3))
        return np.concatenate([pts for _, pts in self._frames])

    def reset(self) -> None:
        self._frames.clear()


def subsample(points: np.ndarray, target: int, seed) -> np.ndarray:
    """Uniform sample of min(target, n) points without replacement.

    `seed` may be an int or a numpy Generator; identical seeds give identical
    output.
    """
    if target < 0:
        raise ValueError("target count must be >= 0")
    pts = np.asarray(points)
    n = len(pts)
    if target >= n:
        return pts.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = rng.choice(n, size=target, replace=False)
    return pts[idx]
