"""Ground-truth analytics stand-ins for the video pipeline stages.

Real detectors are replaced by cost models plus outcome draws keyed on
(event id, task id) from a seeded generator, so a run is reproducible and
independent of arrival order. Frames know whether the tracked entity was in
view; the recognizer flips that truth according to its true/false-positive
rates. Filtering (FC) is a pass-through gate, and the query-fraud hook (QF)
is a no-op with a pluggable interface.
"""

import hashlib
from dataclasses import dataclass

from .model import AffineExecTime, ExecTimeModel
from .tracking import Detection

DEFAULT_FRAME_BYTES = 2900
DETECTION_BYTES = 256


@dataclass(frozen=True)
class FrameRecord:
    """One camera frame: identity, capture time, and ground truth."""

    camera_id: str
    frame_ts: int
    contains_entity: bool
    payload_size: int = DEFAULT_FRAME_BYTES


@dataclass(frozen=True)
class CandidateRecord:
    """Object-detection output: the frame plus candidate crops (modelled)."""

    camera_id: str
    frame_ts: int
    contains_entity: bool
    candidates: int
    payload_size: int = DEFAULT_FRAME_BYTES


@dataclass(frozen=True)
class DetectorProfile:
    """Cost and accuracy stand-in for a detector stage."""

    cost: ExecTimeModel
    tp_rate: float = 1.0
    fp_rate: float = 0.0
    seed: int = 0


def default_va_profile(m_max: int = 25, seed: int = 0) -> DetectorProfile:
    return DetectorProfile(AffineExecTime(5, 10, m_max), seed=seed)


def default_cr_profile(m_max: int = 25, seed: int = 0) -> DetectorProfile:
    # xi(1) = 121 ms per event at batch size 1; recognition dominates the path.
    return DetectorProfile(AffineExecTime(54, 67, m_max), seed=seed)


def outcome_draw(seed: int, event_id: int, task_id: str) -> float:
    """Uniform [0, 1) draw keyed by (event id, task id), arrival-order free."""
    digest = hashlib.blake2b(
        f"{seed}:{event_id}:{task_id}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") / 2**64


def va_candidates(frames: list[FrameRecord]) -> list[CandidateRecord]:
    """Object-detection stand-in: 1:1, forwards image plus candidate boxes."""
    return [
        CandidateRecord(
            f.camera_id,
            f.frame_ts,
            f.contains_entity,
            candidates=1 if f.contains_entity else 0,
            payload_size=f.payload_size,
        )
        for f in frames
    ]


def cr_detections(
    items: list[tuple[int, CandidateRecord]],
    profile: DetectorProfile,
    task_id: str,
) -> list[Detection]:
    """Recognition stand-in: matched follows ground truth filtered by rates."""
    out = []
    for event_id, rec in items:
        draw = outcome_draw(profile.seed, event_id, task_id)
        rate = profile.tp_rate if rec.contains_entity else profile.fp_rate
        out.append(Detection(rec.camera_id, rec.frame_ts, draw < rate, round(draw, 6)))
    return out


class VaLogic:
    """Task logic adapter for the object-detection stage."""

    def __call__(self, events) -> list[tuple]:
        outs = va_candidates([e.payload for e in events])
        return [(rec, rec.payload_size) for rec in outs]


class CrLogic:
    """Task logic adapter for recognition; flags matches as do-not-drop."""

    def __init__(self, profile: DetectorProfile, task_id: str, protect_matches: bool = True):
        self.profile = profile
        self.task_id = task_id
        self.protect_matches = protect_matches

    def __call__(self, events) -> list[tuple]:
        items = [(e.header.event_id, e.payload) for e in events]
        detections = cr_detections(items, self.profile, self.task_id)
        outs = []
        for det in detections:
            flags = {"avoid_drop": True} if (det.matched and self.protect_matches) else None
            outs.append((det, DETECTION_BYTES, flags))
        return outs


class NoOpQf:
    """Query-fraud hook: accepts recognition output, does nothing.

    Swap in any callable with the same shape to give the fork a real body.
    """

    def __call__(self, events) -> list[tuple]:
        return []
