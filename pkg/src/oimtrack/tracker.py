"""Online tracking loop: motion/detection proposal fusion, appearance +
motion association, and track lifecycle management.

Each frame runs: predict all tracks, merge motion-predicted boxes of
unexplained confirmed tracks into the candidate set, associate candidates
to tracks (appearance cascade with motion gating, then an IoU stage for
young tracks), correct matched tracks, and spawn/retire tracks.  Motion
predictions complement the detector: a confirmed track whose predicted box
no detector box explains contributes its own candidate, carrying the
track's gallery embedding and a decayed confidence, so short detector
gaps do not break identities.

A tracker instance is single-threaded; frame order is part of the
contract.  Track ids are never reused within a run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .assignment import hungarian
from .geometry import BoxTLWH, iou, iou_matrix, tlwh_to_xyah
from .motion import KalmanFilter, KalmanState

# Cost assigned to gated-out pairs; any match touching it is discarded.
SENTINEL_COST = 1e5

DETECTOR = "detector"
MOTION = "motion"


@dataclass(frozen=True)
class Detection:
    """One candidate box: detector output or a track's motion prediction."""

    box: BoxTLWH
    confidence: float
    embedding: np.ndarray | None = None
    source: str = DETECTOR

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        if self.source not in (DETECTOR, MOTION):
            raise ValueError(f"unknown detection source {self.source!r}")
        if self.embedding is not None:
            emb = np.asarray(self.embedding, dtype=float)
            norm = float(np.linalg.norm(emb))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"detection embedding must be unit norm, got {norm:.6g}")
            object.__setattr__(self, "embedding", emb)


@dataclass
class TrackerConfig:
    """Association and lifecycle knobs (DeepSORT-style conventions)."""

    max_cosine_distance: float = 0.2
    gating_threshold: float = 9.4877  # chi-square 0.95 quantile, 4 dof
    n_init: int = 3
    max_age: int = 30
    fusion_iou_threshold: float = 0.5
    motion_confidence_decay: float = 0.9
    motion_fusion: bool = True
    iou_match_threshold: float = 0.7
    gallery_momentum: float = 0.9

    def __post_init__(self):
        positives = {
            "max_cosine_distance": self.max_cosine_distance,
            "gating_threshold": self.gating_threshold,
            "fusion_iou_threshold": self.fusion_iou_threshold,
            "motion_confidence_decay": self.motion_confidence_decay,
            "iou_match_threshold": self.iou_match_threshold,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.n_init < 1:
            raise ValueError(f"n_init must be >= 1, got {self.n_init}")
        if self.max_age < 1:
            raise ValueError(f"max_age must be >= 1, got {self.max_age}")
        if not (0.0 < self.gallery_momentum < 1.0):
            raise ValueError(
                f"gallery_momentum must be in (0, 1), got {self.gallery_momentum}"
            )


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DELETED = "deleted"


@dataclass
class Track:
    """One tracked object: motion state, smoothed appearance, lifecycle."""

    track_id: int
    kalman: KalmanState
    gallery: np.ndarray | None
    confidence: float
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    time_since_update: int = 0

    def to_tlwh(self) -> BoxTLWH:
        """Current state as a TLWH box; size floored so long blind
        prediction cannot produce a degenerate box."""
        cx, cy, aspect, height = self.kalman.mean[:4]
        height = max(float(height), 1e-3)
        aspect = max(float(aspect), 1e-6)
        width = aspect * height
        return BoxTLWH(left=cx - width / 2.0, top=cy - height / 2.0,
                       width=width, height=height)

    @property
    def is_confirmed(self) -> bool:
        return self.status is TrackStatus.CONFIRMED

    @property
    def is_deleted(self) -> bool:
        return self.status is TrackStatus.DELETED


def fuse_proposals(detections: list[Detection], tracks: list[Track],
                   cfg: TrackerConfig) -> list[Detection]:
    """Detector detections plus one motion candidate per unexplained
    confirmed track.

    A confirmed track contributes its predicted box only when that box has
    IoU <= ``fusion_iou_threshold`` with every detector box; the candidate
    carries the track's gallery embedding and a decayed confidence.
    Detector detections pass through unchanged.
    """
    fused = list(detections)
    det_boxes = [d.box for d in detections]
    for track in tracks:
        if not track.is_confirmed:
            continue
        predicted = track.to_tlwh()
        if any(iou(predicted, b) > cfg.fusion_iou_threshold for b in det_boxes):
            continue
        confidence = min(1.0, track.confidence * cfg.motion_confidence_decay)
        embedding = None if track.gallery is None else track.gallery.copy()
        fused.append(Detection(box=predicted, confidence=confidence,
                               embedding=embedding, source=MOTION))
    return fused


def _appearance_cost(tracks: list[Track], candidates: list[Detection],
                     kf: KalmanFilter, cfg: TrackerConfig) -> np.ndarray:
    """Cosine distance gated by Mahalanobis distance and the cosine cap."""
    cost = np.full((len(tracks), len(candidates)), SENTINEL_COST)
    boxes = [tlwh_to_xyah(c.box) for c in candidates]
    for i, track in enumerate(tracks):
        gates = kf.gating_distance(track.kalman, boxes)
        if track.gallery is None:
            continue
        for j, cand in enumerate(candidates):
            if cand.embedding is None or gates[j] > cfg.gating_threshold:
                continue
            distance = 1.0 - float(track.gallery @ cand.embedding)
            if distance <= cfg.max_cosine_distance:
                cost[i, j] = distance
    return cost


def _solve_stage(cost: np.ndarray) -> tuple[list[tuple[int, int]], set[int], set[int]]:
    matches = []
    matched_rows: set[int] = set()
    matched_cols: set[int] = set()
    for i, j in hungarian(cost).items():
        if cost[i, j] >= SENTINEL_COST:
            continue
        matches.append((i, j))
        matched_rows.add(i)
        matched_cols.add(j)
    return matches, matched_rows, matched_cols


def associate(tracks: list[Track], candidates: list[Detection], cfg: TrackerConfig,
              kf: KalmanFilter) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Two-stage association.

    Stage 1 is a matching cascade over confirmed tracks by ascending
    ``time_since_update``, using gated cosine distance.  Stage 2 matches the
    remaining tentative and just-missed tracks by IoU.  Returns
    (matches, unmatched track indices, unmatched candidate indices) with
    matches as (track index, candidate index) pairs.
    """
    matches: list[tuple[int, int]] = []
    unmatched_cands = list(range(len(candidates)))

    confirmed = [i for i, t in enumerate(tracks) if t.is_confirmed]
    unmatched_tracks = set(range(len(tracks)))

    for age in sorted({tracks[i].time_since_update for i in confirmed}):
        level = [i for i in confirmed if tracks[i].time_since_update == age]
        if not level or not unmatched_cands:
            continue
        cost = _appearance_cost([tracks[i] for i in level],
                                [candidates[j] for j in unmatched_cands], kf, cfg)
        stage_matches, _, matched_cols = _solve_stage(cost)
        for li, cj in stage_matches:
            matches.append((level[li], unmatched_cands[cj]))
            unmatched_tracks.discard(level[li])
        unmatched_cands = [c for k, c in enumerate(unmatched_cands)
                           if k not in matched_cols]

    # IoU stage: tentative tracks plus confirmed ones missed exactly once.
    iou_tracks = [i for i in sorted(unmatched_tracks)
                  if not tracks[i].is_confirmed or tracks[i].time_since_update == 1]
    if iou_tracks and unmatched_cands:
        track_boxes = [tracks[i].to_tlwh() for i in iou_tracks]
        cand_boxes = [candidates[j].box for j in unmatched_cands]
        cost = 1.0 - iou_matrix(track_boxes, cand_boxes)
        cost[cost > cfg.iou_match_threshold] = SENTINEL_COST
        stage_matches, _, matched_cols = _solve_stage(cost)
        for li, cj in stage_matches:
            matches.append((iou_tracks[li], unmatched_cands[cj]))
            unmatched_tracks.discard(iou_tracks[li])
        unmatched_cands = [c for k, c in enumerate(unmatched_cands)
                           if k not in matched_cols]

    return matches, sorted(unmatched_tracks), unmatched_cands


class Tracker:
    """Stateful per-sequence tracker; feed frames in order via :meth:`step`."""

    def __init__(self, cfg: TrackerConfig | None = None, kf: KalmanFilter | None = None):
        self.cfg = cfg if cfg is not None else TrackerConfig()
        self.kf = kf if kf is not None else KalmanFilter()
        self.tracks: list[Track] = []
        self._next_id = 1
        self._next_frame: int | None = None

    def step(self, frame: int, detections: list[Detection]) -> list[tuple[int, BoxTLWH]]:
        """Advance one frame; returns (track_id, box) for every confirmed
        track updated this frame."""
        if self._next_frame is not None and frame != self._next_frame:
            raise ValueError(
                f"frames must be consecutive: expected {self._next_frame}, got {frame}"
            )
        self._next_frame = frame + 1
        for det in detections:
            if det.source != DETECTOR:
                raise ValueError("step() accepts detector-sourced detections only")

        for track in self.tracks:
            track.kalman = self.kf.predict(track.kalman)
            track.time_since_update += 1

        if self.cfg.motion_fusion:
            candidates = fuse_proposals(detections, self.tracks, self.cfg)
        else:
            candidates = list(detections)

        matches, unmatched_tracks, unmatched_cands = associate(
            self.tracks, candidates, self.cfg, self.kf)

        for ti, ci in matches:
            self._update_track(self.tracks[ti], candidates[ci])
        for ti in unmatched_tracks:
            track = self.tracks[ti]
            if track.status is TrackStatus.TENTATIVE:
                track.status = TrackStatus.DELETED
            elif track.time_since_update > self.cfg.max_age:
                track.status = TrackStatus.DELETED
        for ci in unmatched_cands:
            cand = candidates[ci]
            if cand.source == DETECTOR:
                self._initiate_track(cand)

        self.tracks = [t for t in self.tracks if not t.is_deleted]
        return [(t.track_id, t.to_tlwh()) for t in self.tracks
                if t.is_confirmed and t.time_since_update == 0]

    def _update_track(self, track: Track, cand: Detection) -> None:
        track.kalman = self.kf.update(track.kalman, tlwh_to_xyah(cand.box))
        if cand.embedding is not None:
            if track.gallery is None:
                track.gallery = cand.embedding.copy()
            else:
                m = self.cfg.gallery_momentum
                blended = m * track.gallery + (1.0 - m) * cand.embedding
                norm = float(np.linalg.norm(blended))
                if norm > 1e-12:
                    track.gallery = blended / norm
        track.confidence = cand.confidence
        track.hits += 1
        track.time_since_update = 0
        if track.status is TrackStatus.TENTATIVE and track.hits >= self.cfg.n_init:
            track.status = TrackStatus.CONFIRMED

    def _initiate_track(self, cand: Detection) -> None:
        embedding = None if cand.embedding is None else cand.embedding.copy()
        track = Track(
            track_id=self._next_id,
            kalman=self.kf.initiate(tlwh_to_xyah(cand.box)),
            gallery=embedding,
            confidence=cand.confidence,
        )
        if track.hits >= self.cfg.n_init:  # initiation counts as the first match
            track.status = TrackStatus.CONFIRMED
        self._next_id += 1
        self.tracks.append(track)
