"""Per-track sanitization dwell accounting with hand-presence gating.

The engine is driven in timestamp order with two kinds of input: hand events
(entering/leaving gated mode) and per-frame steps carrying the active track
ids. Dwell accrues per step for each active track, measured on an "ungated
clock" that only advances while no hand is present, so gate boundaries that
fall between steps are accounted exactly. While gated the caller is expected
to freeze the tracker as well (no aging), so occluded objects keep their
identity; this engine only freezes the clock.

A track reaching the required dwell flips SANITIZING -> READY; READY is
sticky for the lifetime of the track id. Records persist after their track
disappears, forming the audit trail returned by :meth:`ComplianceEngine.report`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Status(str, enum.Enum):
    SANITIZING = "SANITIZING"
    READY = "READY"


class OrderingError(ValueError):
    """Event or step timestamps went backwards."""


@dataclass(frozen=True)
class HandEvent:
    timestamp: float
    present: bool


@dataclass
class ComplianceRecord:
    track_id: int
    first_seen: float
    last_seen: float
    dwell: float = 0.0
    status: Status = Status.SANITIZING
    ready_at: float | None = None
    intervals: list[list[float]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "id": self.track_id,
            "first_seen": self.first_seen,
            "last_seen": self.last_seen,
            "dwell_s": self.dwell,
            "status": self.status.value,
            "ready_at": self.ready_at,
            "intervals": [list(iv) for iv in self.intervals],
        }


@dataclass(frozen=True)
class ComplianceConfig:
    required_dwell_s: float = 10.0

    def __post_init__(self) -> None:
        if self.required_dwell_s <= 0:
            raise ValueError("required dwell must be positive")


class ComplianceEngine:
    def __init__(self, config: ComplianceConfig = ComplianceConfig()):
        self.config = config
        self.records: dict[int, ComplianceRecord] = {}
        self._gated = False
        self._last_t: float | None = None
        self._ungated_clock = 0.0
        self._clock_at_prev_step = 0.0
        self._prev_step_t: float | None = None
        self._pending_events: list[dict] = []

    @property
    def gated(self) -> bool:
        return self._gated

    def _advance(self, t: float) -> None:
        if self._last_t is None:
            self._last_t = t
            return
        if t < self._last_t:
            raise OrderingError(f"timestamp {t} before {self._last_t}")
        if not self._gated:
            self._ungated_clock += t - self._last_t
        self._last_t = t

    def on_hand_event(self, event: HandEvent) -> None:
        """Enter or leave gated mode; re-assertion of the same state is a no-op."""
        self._advance(event.timestamp)
        self._gated = event.present

    def step(self, track_ids, timestamp: float) -> list[ComplianceRecord]:
        """Accrue dwell for the active tracks; returns their records.

        Each pre-existing active record gains the ungated time elapsed since
        the previous step; records first seen this step start at zero dwell.
        """
        self._advance(timestamp)
        du = self._ungated_clock - self._clock_at_prev_step
        self._clock_at_prev_step = self._ungated_clock

        out = []
        for tid in track_ids:
            rec = self.records.get(tid)
            if rec is None:
                rec = ComplianceRecord(
                    track_id=tid, first_seen=timestamp, last_seen=timestamp,
                    intervals=[[timestamp, timestamp]],
                )
                self.records[tid] = rec
            else:
                rec.dwell += du
                if rec.intervals and rec.intervals[-1][1] == self._prev_step_t:
                    rec.intervals[-1][1] = timestamp
                else:
                    rec.intervals.append([timestamp, timestamp])
                rec.last_seen = timestamp
                if rec.status is Status.SANITIZING and rec.dwell >= self.config.required_dwell_s:
                    rec.status = Status.READY
                    rec.ready_at = timestamp
                    self._pending_events.append(
                        {"t": timestamp, "event": "status_change",
                         "id": tid, "status": Status.READY.value}
                    )
            out.append(rec)
        self._prev_step_t = timestamp
        return out

    def pop_status_events(self) -> list[dict]:
        ev, self._pending_events = self._pending_events, []
        return ev

    def report(self) -> dict:
        """Audit trail of every record ever seen (active and expired)."""
        recs = sorted(self.records.values(), key=lambda r: r.track_id)
        return {
            "required_dwell_s": self.config.required_dwell_s,
            "records": [r.as_dict() for r in recs],
        }
