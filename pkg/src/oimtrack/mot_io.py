"""MOTChallenge text formats: box files and the embedding sidecar.

Box files are comma-separated with one detection per line:
``frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`` where frame >= 1,
id is -1 for anonymous detections, and x/y/z are unused placeholders
written as -1.  Lines are written sorted by (frame, id) with numbers in
shortest round-trip form (integers without a decimal point), so
parse(write(record)) is lossless and write(parse(file)) is byte-identical
for files this module produced.

The embedding sidecar is a CSV with header ``frame,det_index,<d>`` and one
line per detection: frame, its 0-based index within that frame's box-file
lines, then d floats.  Vectors whose norm drifts more than 1e-6 from 1 are
re-normalized on load with a warning.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import BoxTLWH
from .metrics import FrameObjects, SequenceRecord
from .tracker import Detection

logger = logging.getLogger(__name__)


class MotParseError(ValueError):
    """Malformed input file; message names the offending line."""


@dataclass(frozen=True)
class MotLine:
    """One decoded box-file line."""

    frame: int
    obj_id: int
    left: float
    top: float
    width: float
    height: float
    conf: float
    x: float = -1.0
    y: float = -1.0
    z: float = -1.0


def _format_number(value: float) -> str:
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def format_line(line: MotLine) -> str:
    parts = [str(line.frame), str(line.obj_id)]
    parts += [_format_number(v) for v in
              (line.left, line.top, line.width, line.height, line.conf,
               line.x, line.y, line.z)]
    return ",".join(parts)


def parse_line(text: str, lineno: int) -> MotLine:
    fields = text.split(",")
    if not 7 <= len(fields) <= 10:
        raise MotParseError(
            f"line {lineno}: expected 7..10 comma-separated fields, got {len(fields)}"
        )
    try:
        frame = int(fields[0])
        obj_id = int(fields[1])
        numbers = [float(v) for v in fields[2:]]
    except ValueError as exc:
        raise MotParseError(f"line {lineno}: {exc}") from None
    if frame < 1:
        raise MotParseError(f"line {lineno}: frame must be >= 1, got {frame}")
    numbers += [-1.0] * (8 - len(numbers))
    left, top, width, height, conf, x, y, z = numbers
    if width <= 0 or height <= 0:
        raise MotParseError(
            f"line {lineno}: box must have positive size, got {width}x{height}"
        )
    return MotLine(frame=frame, obj_id=obj_id, left=left, top=top, width=width,
                   height=height, conf=conf, x=x, y=y, z=z)


def read_mot_lines(path) -> list[list[MotLine]]:
    """All lines grouped per frame (index 0 = frame 1, gaps filled empty).

    Within a frame, file order is preserved, which keeps sidecar
    ``det_index`` references valid.
    """
    per_frame: dict[int, list[MotLine]] = {}
    max_frame = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            line = parse_line(text, lineno)
            per_frame.setdefault(line.frame, []).append(line)
            max_frame = max(max_frame, line.frame)
    if per_frame and len(per_frame) != max_frame:
        logger.warning(
            "%s: frames are not contiguous from 1; missing frames treated as empty",
            path,
        )
    return [per_frame.get(f, []) for f in range(1, max_frame + 1)]


def parse_mot(path, *, as_predictions: bool = False) -> SequenceRecord:
    """Read a box file into a sequence record (gt side by default)."""
    frames = read_mot_lines(path)
    objects: list[FrameObjects] = [
        [(line.obj_id, BoxTLWH(line.left, line.top, line.width, line.height))
         for line in frame]
        for frame in frames
    ]
    if as_predictions:
        return SequenceRecord(n_frames=len(frames), predictions=objects)
    return SequenceRecord(n_frames=len(frames), gt=objects)


def combine_records(gt: SequenceRecord, predictions: SequenceRecord) -> SequenceRecord:
    """Merge a ground-truth record and a prediction record for evaluation.

    The prediction file may be shorter (a tracker that stopped early);
    missing trailing frames count as empty.
    """
    n = max(gt.n_frames, predictions.n_frames)
    pad_gt = gt.gt + [[] for _ in range(n - gt.n_frames)]
    pad_pred = predictions.predictions + [[] for _ in range(n - predictions.n_frames)]
    return SequenceRecord(n_frames=n, gt=pad_gt, predictions=pad_pred)


def write_mot(record: SequenceRecord, path, *, side: str = "gt",
              conf: float = 1.0) -> None:
    """Write one side of a record, sorted by (frame, id)."""
    if side == "gt":
        frames = record.gt
    elif side == "predictions":
        frames = record.predictions
    else:
        raise ValueError(f"side must be 'gt' or 'predictions', got {side!r}")
    lines = []
    for f, objs in enumerate(frames, start=1):
        for obj_id, box in objs:
            lines.append(MotLine(frame=f, obj_id=obj_id, left=box.left, top=box.top,
                                 width=box.width, height=box.height, conf=conf))
    lines.sort(key=lambda l: (l.frame, l.obj_id))
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(format_line(line) + "\n")


def write_detections(detections: list[list[Detection]], path) -> None:
    """Write per-frame detections as anonymous (-1 id) box lines, keeping
    within-frame order so sidecar indices line up."""
    with open(path, "w", encoding="utf-8") as fh:
        for f, dets in enumerate(detections, start=1):
            for det in dets:
                line = MotLine(frame=f, obj_id=-1, left=det.box.left, top=det.box.top,
                               width=det.box.width, height=det.box.height,
                               conf=det.confidence)
                fh.write(format_line(line) + "\n")


def read_detections(path) -> list[list[Detection]]:
    """Read a detection file; embeddings are attached separately."""
    frames = read_mot_lines(path)
    return [
        [Detection(box=BoxTLWH(l.left, l.top, l.width, l.height),
                   confidence=min(max(l.conf, 0.0), 1.0))
         for l in frame]
        for frame in frames
    ]


def write_embeddings(detections: list[list[Detection]], path,
                     dim: int | None = None) -> None:
    """Write the embedding sidecar for per-frame detections."""
    if dim is None:
        for dets in detections:
            for det in dets:
                if det.embedding is not None:
                    dim = det.embedding.shape[0]
                    break
            if dim is not None:
                break
    if dim is None:
        raise ValueError("cannot infer embedding dimension from empty detections; pass dim")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"frame,det_index,{dim}\n")
        for f, dets in enumerate(detections, start=1):
            for idx, det in enumerate(dets):
                if det.embedding is None:
                    continue
                if det.embedding.shape[0] != dim:
                    raise ValueError(
                        f"frame {f} det {idx}: embedding dim {det.embedding.shape[0]} "
                        f"!= sidecar dim {dim}"
                    )
                values = ",".join(repr(float(v)) for v in det.embedding)
                fh.write(f"{f},{idx},{values}\n")


def parse_embeddings(path) -> dict[tuple[int, int], np.ndarray]:
    """Read a sidecar into a {(frame, det_index): unit vector} map."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        parts = header.split(",")
        if len(parts) != 3 or parts[0] != "frame" or parts[1] != "det_index":
            raise MotParseError(f"line 1: bad sidecar header {header!r}")
        try:
            dim = int(parts[2])
        except ValueError:
            raise MotParseError(f"line 1: bad sidecar dimension {parts[2]!r}") from None
        out: dict[tuple[int, int], np.ndarray] = {}
        renormalized = 0
        for lineno, raw in enumerate(fh, start=2):
            text = raw.strip()
            if not text:
                continue
            fields = text.split(",")
            if len(fields) != 2 + dim:
                raise MotParseError(
                    f"line {lineno}: expected {2 + dim} fields for dimension {dim}, "
                    f"got {len(fields)}"
                )
            try:
                frame = int(fields[0])
                det_index = int(fields[1])
                vec = np.array([float(v) for v in fields[2:]], dtype=float)
            except ValueError as exc:
                raise MotParseError(f"line {lineno}: {exc}") from None
            norm = float(np.linalg.norm(vec))
            if norm < 1e-12:
                raise MotParseError(f"line {lineno}: zero embedding cannot be normalized")
            if abs(norm - 1.0) > 1e-6:
                vec = vec / norm
                renormalized += 1
            out[(frame, det_index)] = vec
    if renormalized:
        logger.warning("%s: re-normalized %d embeddings with norm drift > 1e-6",
                       path, renormalized)
    return out


def attach_embeddings(detections: list[list[Detection]],
                      embeddings: dict[tuple[int, int], np.ndarray]) -> list[list[Detection]]:
    """Return detections with sidecar embeddings attached by (frame, index)."""
    out: list[list[Detection]] = []
    for f, dets in enumerate(detections, start=1):
        row = []
        for idx, det in enumerate(dets):
            emb = embeddings.get((f, idx))
            if emb is None:
                row.append(det)
            else:
                row.append(Detection(box=det.box, confidence=det.confidence,
                                     embedding=emb, source=det.source))
        out.append(row)
    return out
