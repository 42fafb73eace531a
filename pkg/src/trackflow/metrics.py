"""Per-event accounting, per-second timeline, and run summaries.

Every generated event ends in exactly one state: delivered (on time),
delayed (reached the sink past gamma without a protect flag), flagged_late
(past gamma but protected), dropped@task@point, probe@task@point (converted
into a probe after being chosen for drop), or inflight at run end. Would-drop
marks from runs with dropping disabled are tallied separately; they do not
change an event's final state.
"""

import csv
import json

import numpy as np

from .model import Event


class EventRecord:
    __slots__ = ("event_id", "camera_id", "t_source", "t_sink", "status", "batches")

    def __init__(self, event_id: int, camera_id: str, t_source: int):
        self.event_id = event_id
        self.camera_id = camera_id
        self.t_source = t_source
        self.t_sink: int | None = None
        self.status: str | None = None
        self.batches: dict[str, int] = {}


class MetricsCollector:
    """Aggregates engine callbacks into records, buckets, and counters."""

    def __init__(self, gamma_ms: int):
        self.gamma = gamma_ms
        self.records: dict[int, EventRecord] = {}
        self.would_drop_marks = 0
        self.peak_active = 0
        self._in_per_sec: dict[int, int] = {}
        self._drop_per_sec: dict[int, int] = {}
        self._lat_per_sec: dict[int, list[int]] = {}
        self._active_series: dict[int, int] = {}

    # -- engine hooks --------------------------------------------------

    def on_generated(self, event_id: int, camera_id: str, t_source: int) -> None:
        self.records[event_id] = EventRecord(event_id, camera_id, t_source)
        sec = t_source // 1000
        self._in_per_sec[sec] = self._in_per_sec.get(sec, 0) + 1

    def record_batch(self, event_id: int, task_id: str, m: int) -> None:
        rec = self.records.get(event_id)
        if rec is not None:
            rec.batches[task_id] = m

    def record_drop(self, event: Event, task_id: str, point: int) -> None:
        rec = self.records.get(event.header.event_id)
        if rec is not None and rec.status is None:
            rec.status = f"dropped@{task_id}@p{point}"
        sec = event.header.source_arrival // 1000
        self._drop_per_sec[sec] = self._drop_per_sec.get(sec, 0) + 1

    def record_would_drop(self, event: Event, task_id: str, point: int) -> None:
        self.would_drop_marks += 1

    def record_probe_convert(self, event: Event, task_id: str, point: int) -> None:
        rec = self.records.get(event.header.event_id)
        if rec is not None and rec.status is None:
            rec.status = f"probe@{task_id}@p{point}"

    def record_delivered(self, event: Event, latency_ms: int, flagged: bool) -> None:
        rec = self.records.get(event.header.event_id)
        if rec is None:
            return
        rec.t_sink = rec.t_source + latency_ms
        if latency_ms > self.gamma:
            rec.status = "flagged_late" if flagged else "delayed"
        else:
            rec.status = "delivered"
        sec = rec.t_sink // 1000
        self._lat_per_sec.setdefault(sec, []).append(latency_ms)

    # -- timeline --------------------------------------------------------

    def note_active(self, n_active: int) -> None:
        """Track the active-set size at a tracker decision (for the peak)."""
        self.peak_active = max(self.peak_active, n_active)

    def note_active_sample(self, t_ms: int, n_active: int) -> None:
        """Per-second gauge of the active camera set."""
        self.note_active(n_active)
        self._active_series[t_ms // 1000] = n_active

    def timeline_rows(self) -> list[tuple]:
        """One row per sampled second; latency/in/drop stats merged post-run."""
        rows = []
        for sec in sorted(self._active_series):
            lats = self._lat_per_sec.get(sec, [])
            mean_lat = sum(lats) / len(lats) if lats else 0.0
            rows.append(
                (
                    sec,
                    self._active_series[sec],
                    mean_lat,
                    self._in_per_sec.get(sec, 0),
                    self._drop_per_sec.get(sec, 0),
                )
            )
        return rows

    # -- outputs -----------------------------------------------------------

    def latencies(self) -> list[int]:
        return [
            r.t_sink - r.t_source for r in self.records.values() if r.t_sink is not None
        ]

    def counts(self) -> dict[str, int]:
        c = {
            "generated": len(self.records),
            "delivered": 0,
            "delayed": 0,
            "flagged_late": 0,
            "dropped": 0,
            "probes": 0,
            "in_flight": 0,
        }
        for rec in self.records.values():
            if rec.status is None:
                c["in_flight"] += 1
            elif rec.status in ("delivered", "delayed", "flagged_late"):
                c[rec.status] += 1
            elif rec.status.startswith("dropped@"):
                c["dropped"] += 1
            else:
                c["probes"] += 1
        return c

    def summary(self) -> dict:
        c = self.counts()
        lats = self.latencies()
        median = float(np.median(lats)) if lats else 0.0
        p99 = float(np.percentile(lats, 99)) if lats else 0.0
        return {
            "delivered": c["delivered"],
            "delayed": c["delayed"],
            "dropped": c["dropped"],
            "peak_active_cameras": self.peak_active,
            "median_latency_ms": round(median, 3),
            "p99_latency_ms": round(p99, 3),
            "generated": c["generated"],
            "flagged_late": c["flagged_late"],
            "probes": c["probes"],
            "in_flight": c["in_flight"],
            "would_drop_marks": self.would_drop_marks,
        }

    def write_events_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["event_id", "camera_id", "t_source", "t_sink", "status", "batches"])
            for eid in sorted(self.records):
                rec = self.records[eid]
                batches = "|".join(f"{t}={m}" for t, m in rec.batches.items())
                w.writerow(
                    [
                        rec.event_id,
                        rec.camera_id,
                        rec.t_source,
                        rec.t_sink if rec.t_sink is not None else "",
                        rec.status or "inflight",
                        batches,
                    ]
                )

    def write_timeline_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "active_cameras", "mean_latency_ms", "events_in", "events_dropped"])
            for sec, active, mean_lat, n_in, n_drop in self.timeline_rows():
                w.writerow([sec, active, f"{mean_lat:.3f}", n_in, n_drop])

    def write_summary_json(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.summary(), f, indent=2, sort_keys=True)
            f.write("\n")
