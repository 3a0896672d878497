"""CLEAR MOT and identity-based tracking evaluation: MOTA, FP, FN, IDSw, IDF1.

Matching follows the MOTChallenge protocol: per frame, pairings from the
previous frames are carried over while they remain IoU-valid, then the
leftover ground-truth/prediction pairs are matched optimally on IoU.  An
identity switch is counted whenever a ground-truth object's matched
prediction id differs from the one at its previous matched frame.  IDF1
uses a single global bijection between ground-truth and predicted
identities maximizing the number of IoU-valid overlap frames.

MOTP, fragmentations and mostly-tracked/mostly-lost counts are computed
and logged alongside, but only the five headline metrics are reported.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .assignment import hungarian
from .geometry import BoxTLWH, iou

logger = logging.getLogger(__name__)

_MASK_COST = 1e5

# One tracked frame: list of (object id, box), ids positive.
FrameObjects = list[tuple[int, BoxTLWH]]


def _validate_frames(frames: list[FrameObjects], n_frames: int, name: str) -> list[FrameObjects]:
    if len(frames) != n_frames:
        raise ValueError(f"{name} covers {len(frames)} frames, expected {n_frames}")
    out = []
    for idx, objs in enumerate(frames):
        seen = set()
        for obj_id, box in objs:
            if obj_id <= 0:
                raise ValueError(f"{name} frame {idx + 1}: non-positive id {obj_id}")
            if obj_id in seen:
                raise ValueError(f"{name} frame {idx + 1}: duplicate id {obj_id}")
            seen.add(obj_id)
        out.append(sorted(objs, key=lambda t: t[0]))
    return out


@dataclass
class SequenceRecord:
    """Per-frame ground truth and predictions for one sequence.

    Frame ``f`` (1-based, contiguous) lives at list index ``f - 1``; either
    side may be empty per frame.
    """

    n_frames: int
    gt: list[FrameObjects] = field(default_factory=list)
    predictions: list[FrameObjects] = field(default_factory=list)

    def __post_init__(self):
        if self.n_frames < 0:
            raise ValueError(f"n_frames must be non-negative, got {self.n_frames}")
        if not self.gt:
            self.gt = [[] for _ in range(self.n_frames)]
        if not self.predictions:
            self.predictions = [[] for _ in range(self.n_frames)]
        self.gt = _validate_frames(self.gt, self.n_frames, "gt")
        self.predictions = _validate_frames(self.predictions, self.n_frames, "predictions")

    @property
    def num_gt_boxes(self) -> int:
        return sum(len(f) for f in self.gt)

    @property
    def num_pred_boxes(self) -> int:
        return sum(len(f) for f in self.predictions)

    def from_frame(self, first_frame: int) -> "SequenceRecord":
        """Sub-record starting at ``first_frame`` (renumbered from 1)."""
        if not (1 <= first_frame <= self.n_frames + 1):
            raise ValueError(f"first_frame {first_frame} outside 1..{self.n_frames + 1}")
        return SequenceRecord(
            n_frames=self.n_frames - first_frame + 1,
            gt=[list(f) for f in self.gt[first_frame - 1:]],
            predictions=[list(f) for f in self.predictions[first_frame - 1:]],
        )


@dataclass(frozen=True)
class MetricsReport:
    """The five headline metrics plus the ground-truth box count.

    ``mota = 1 - (fn + fp + idsw) / num_gt`` and may be negative.
    """

    mota: float
    idf1: float
    idsw: int
    fp: int
    fn: int
    num_gt: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "mota": self.mota,
                "idf1": self.idf1,
                "idsw": self.idsw,
                "fp": self.fp,
                "fn": self.fn,
                "num_gt": self.num_gt,
            },
            sort_keys=True,
            indent=2,
        )


@dataclass
class ClearMotResult:
    mota: float
    fp: int
    fn: int
    idsw: int
    num_gt: int
    # per frame: final gt id -> pred id pairing
    frame_matches: list[dict[int, int]]
    motp: float
    fragmentations: int
    mostly_tracked: int
    mostly_lost: int


def clear_mot(seq: SequenceRecord, iou_threshold: float = 0.5) -> ClearMotResult:
    """CLEAR MOT accumulation over a whole sequence."""
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    num_gt = seq.num_gt_boxes
    if num_gt == 0:
        raise ValueError("MOTA is undefined for a sequence with no ground truth")

    fp = fn = idsw = 0
    motp_sum = 0.0
    motp_count = 0
    last_match: dict[int, int] = {}  # gt id -> pred id at its last matched frame
    gt_present: dict[int, int] = {}
    gt_covered: dict[int, int] = {}
    was_matched: dict[int, bool] = {}
    fragmentations = 0
    frame_matches: list[dict[int, int]] = []

    for f in range(seq.n_frames):
        gts = seq.gt[f]
        preds = seq.predictions[f]
        gt_boxes = dict(gts)
        pred_boxes = dict(preds)

        matches: dict[int, int] = {}
        used_preds: set[int] = set()

        # Keep previous pairings that are still valid: standard continuity
        # rule, prevents jitter from registering as switches.
        for gt_id, gt_box in gts:
            pred_id = last_match.get(gt_id)
            if (
                pred_id is not None
                and pred_id in pred_boxes
                and pred_id not in used_preds
                and iou(gt_box, pred_boxes[pred_id]) >= iou_threshold
            ):
                matches[gt_id] = pred_id
                used_preds.add(pred_id)

        rem_gt = [(gid, box) for gid, box in gts if gid not in matches]
        rem_pred = [(pid, box) for pid, box in preds if pid not in used_preds]
        if rem_gt and rem_pred:
            cost = np.full((len(rem_gt), len(rem_pred)), _MASK_COST)
            for i, (_, gbox) in enumerate(rem_gt):
                for j, (_, pbox) in enumerate(rem_pred):
                    overlap = iou(gbox, pbox)
                    if overlap >= iou_threshold:
                        cost[i, j] = 1.0 - overlap
            for i, j in hungarian(cost).items():
                if cost[i, j] >= _MASK_COST:
                    continue
                gt_id = rem_gt[i][0]
                pred_id = rem_pred[j][0]
                if gt_id in last_match and last_match[gt_id] != pred_id:
                    idsw += 1
                matches[gt_id] = pred_id

        for gt_id, pred_id in matches.items():
            last_match[gt_id] = pred_id
            motp_sum += iou(gt_boxes[gt_id], pred_boxes[pred_id])
        motp_count += len(matches)
        fp += len(preds) - len(matches)
        fn += len(gts) - len(matches)
        frame_matches.append(matches)

        for gt_id, _ in gts:
            gt_present[gt_id] = gt_present.get(gt_id, 0) + 1
            matched_now = gt_id in matches
            if matched_now:
                gt_covered[gt_id] = gt_covered.get(gt_id, 0) + 1
                if gt_id in was_matched and not was_matched[gt_id]:
                    fragmentations += 1
            was_matched[gt_id] = matched_now

    mota = 1.0 - (fn + fp + idsw) / num_gt
    motp = motp_sum / motp_count if motp_count else 0.0
    coverage = {gid: gt_covered.get(gid, 0) / cnt for gid, cnt in gt_present.items()}
    mostly_tracked = sum(1 for c in coverage.values() if c >= 0.8)
    mostly_lost = sum(1 for c in coverage.values() if c < 0.2)
    logger.info(
        "clear_mot: MOTP=%.4f fragmentations=%d MT=%d ML=%d",
        motp, fragmentations, mostly_tracked, mostly_lost,
    )
    return ClearMotResult(
        mota=mota, fp=fp, fn=fn, idsw=idsw, num_gt=num_gt,
        frame_matches=frame_matches, motp=motp, fragmentations=fragmentations,
        mostly_tracked=mostly_tracked, mostly_lost=mostly_lost,
    )


def _overlap_counts(seq: SequenceRecord, iou_threshold: float):
    """Per-identity frame counts and pairwise IoU-valid co-occurrence counts."""
    gt_frames: dict[int, int] = {}
    pred_frames: dict[int, int] = {}
    overlap: dict[tuple[int, int], int] = {}
    for f in range(seq.n_frames):
        for gid, _ in seq.gt[f]:
            gt_frames[gid] = gt_frames.get(gid, 0) + 1
        for pid, _ in seq.predictions[f]:
            pred_frames[pid] = pred_frames.get(pid, 0) + 1
        for gid, gbox in seq.gt[f]:
            for pid, pbox in seq.predictions[f]:
                if iou(gbox, pbox) >= iou_threshold:
                    overlap[(gid, pid)] = overlap.get((gid, pid), 0) + 1
    return gt_frames, pred_frames, overlap


def idf1(seq: SequenceRecord, iou_threshold: float = 0.5) -> float:
    """Identification F1: harmonic mean of id-precision and id-recall under
    the best global identity bijection."""
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    total_gt = seq.num_gt_boxes
    if total_gt == 0:
        raise ValueError("IDF1 is undefined for a sequence with no ground truth")
    total_pred = seq.num_pred_boxes
    gt_frames, pred_frames, overlap = _overlap_counts(seq, iou_threshold)

    gt_ids = sorted(gt_frames)
    pred_ids = sorted(pred_frames)
    idtp = 0
    if gt_ids and pred_ids:
        # Maximize total overlap; hungarian minimizes, so negate.
        cost = np.zeros((len(gt_ids), len(pred_ids)))
        for i, gid in enumerate(gt_ids):
            for j, pid in enumerate(pred_ids):
                cost[i, j] = -overlap.get((gid, pid), 0)
        assignment = hungarian(cost)
        idtp = int(-sum(cost[i, j] for i, j in assignment.items()))
    # 2*IDTP + IDFP + IDFN collapses to total_gt + total_pred.
    return 2.0 * idtp / (total_gt + total_pred)


def idf1_brute_force(seq: SequenceRecord, iou_threshold: float = 0.5) -> float:
    """Exhaustive-bijection IDF1 for small id counts; oracle for tests."""
    total_gt = seq.num_gt_boxes
    if total_gt == 0:
        raise ValueError("IDF1 is undefined for a sequence with no ground truth")
    total_pred = seq.num_pred_boxes
    gt_frames, pred_frames, overlap = _overlap_counts(seq, iou_threshold)
    gt_ids = sorted(gt_frames)
    pred_ids = sorted(pred_frames)
    if min(len(gt_ids), len(pred_ids)) > 6:
        raise ValueError("brute-force IDF1 limited to small identity counts")
    best = 0
    if gt_ids and pred_ids:
        # Enumerate all injections of the smaller id set into the larger one.
        if len(gt_ids) <= len(pred_ids):
            candidates = (
                zip(gt_ids, perm)
                for perm in itertools.permutations(pred_ids, len(gt_ids))
            )
        else:
            candidates = (
                zip(perm, pred_ids)
                for perm in itertools.permutations(gt_ids, len(pred_ids))
            )
        best = max(
            sum(overlap.get(pair, 0) for pair in pairing) for pairing in candidates
        )
    return 2.0 * best / (total_gt + total_pred)


def evaluate_sequence(seq: SequenceRecord, iou_threshold: float = 0.5) -> MetricsReport:
    """Full report combining CLEAR MOT counts with IDF1."""
    cm = clear_mot(seq, iou_threshold)
    return MetricsReport(
        mota=cm.mota,
        idf1=idf1(seq, iou_threshold),
        idsw=cm.idsw,
        fp=cm.fp,
        fn=cm.fn,
        num_gt=cm.num_gt,
    )
