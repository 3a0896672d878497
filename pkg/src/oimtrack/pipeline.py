"""End-to-end pipelines: detection filtering, tracking runs, ablation.

These are the composition points the CLI exposes; they contain no file
parsing of their own so tests can drive them with in-memory data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import RunConfig
from .geometry import nms
from .learn import (
    LinearEmbedder,
    EpochStats,
    TrainSample,
    train,
    train_oim_baseline,
)
from .memory import ProjectionMemory
from .metrics import MetricsReport, SequenceRecord, evaluate_sequence
from .mot_io import combine_records
from .synth import Scenario, generate
from .tracker import Detection, Tracker, TrackerConfig


def filter_detections(det_frames: list[list[Detection]], min_confidence: float,
                      nms_iou: float | None = None) -> list[list[Detection]]:
    """Confidence-threshold (and optionally NMS-suppress) detector boxes."""
    out = []
    for dets in det_frames:
        kept = [d for d in dets if d.confidence >= min_confidence]
        if nms_iou is not None and len(kept) > 1:
            keep_idx = nms([d.box for d in kept], [d.confidence for d in kept], nms_iou)
            kept = [kept[i] for i in keep_idx]
        out.append(kept)
    return out


def run_tracking(det_frames: list[list[Detection]], cfg: TrackerConfig) -> SequenceRecord:
    """Track a detection stream; returns the prediction side of a record."""
    tracker = Tracker(cfg)
    predictions = []
    for frame, dets in enumerate(det_frames, start=1):
        outputs = tracker.step(frame, dets)
        predictions.append([(track_id, box) for track_id, box in outputs])
    return SequenceRecord(n_frames=len(det_frames), predictions=predictions)


def reembed_detections(det_frames: list[list[Detection]],
                       model: LinearEmbedder) -> list[list[Detection]]:
    """Replace raw feature vectors with the embedder's output."""
    out = []
    for dets in det_frames:
        row = []
        for det in dets:
            if det.embedding is None:
                row.append(det)
            else:
                row.append(Detection(box=det.box, confidence=det.confidence,
                                     embedding=model.embed(det.embedding),
                                     source=det.source))
        out.append(row)
    return out


def rank1_accuracy(model: LinearEmbedder, gallery: list[TrainSample],
                   query: list[TrainSample]) -> float:
    """Identity-classification accuracy in embedding space.

    Each identity's gallery embeddings are averaged into a unit centroid;
    a query counts as correct when its nearest centroid is its own
    identity.  This probes the embedding geometry the tracker matches on,
    independent of the training-time memory."""
    centroids: dict[int, np.ndarray] = {}
    for ident in sorted({s.identity for s in gallery if s.identity is not None}):
        vecs = [model.embed(s.feature) for s in gallery if s.identity == ident]
        mean = np.mean(vecs, axis=0)
        centroids[ident] = mean / np.linalg.norm(mean)
    if not centroids:
        raise ValueError("gallery has no labeled samples")
    idents = sorted(centroids)
    matrix = np.stack([centroids[i] for i in idents])
    correct = 0
    total = 0
    for sample in query:
        if sample.identity is None:
            continue
        total += 1
        best = idents[int(np.argmax(matrix @ model.embed(sample.feature)))]
        correct += int(best == sample.identity)
    if total == 0:
        raise ValueError("query has no labeled samples")
    return correct / total


@dataclass
class AblationRow:
    method: str
    mota: float
    idf1: float
    idsw: float
    fp: float
    fn: float
    accuracy: float


@dataclass
class AblationChecks:
    """Directional expectations for the three-way comparison."""

    accuracy_improves: bool      # id accuracy: hierarchical > baseline
    mota_not_worse: bool         # MOTA (no fusion): hierarchical >= baseline
    fusion_reduces_idsw: bool    # IDSw: fusion <= no fusion
    fusion_keeps_mota: bool      # MOTA drop from fusion <= 0.005
    fusion_idf1_not_worse: bool  # IDF1: fusion >= no fusion

    @property
    def all_pass(self) -> bool:
        return (self.accuracy_improves and self.mota_not_worse
                and self.fusion_reduces_idsw and self.fusion_keeps_mota
                and self.fusion_idf1_not_worse)


@dataclass
class AblationResult:
    rows: list[AblationRow]          # OIM-MM, iHOIM-MM, iHOIM+MM (seed means)
    checks: AblationChecks
    seeds: list[int]
    histories: dict[str, list[list[EpochStats]]]  # per objective, per seed


def _track_and_score(scenario: Scenario, det_frames: list[list[Detection]],
                     cfg: RunConfig, motion_fusion: bool) -> MetricsReport:
    tracker_cfg = replace(cfg.tracker, motion_fusion=motion_fusion)
    filtered = filter_detections(det_frames, cfg.io.min_confidence, cfg.io.nms_iou)
    predictions = run_tracking(filtered, tracker_cfg)
    return evaluate_sequence(combine_records(scenario.gt, predictions))


def run_ablation(cfg: RunConfig, seeds: list[int]) -> AblationResult:
    """Loss and motion-fusion ablation on the configured scenario.

    Per seed: train the hierarchical objective and the flat baseline from
    identical initial weights, re-embed the scenario's detections with
    each model, then track without fusion for both and additionally with
    fusion for the hierarchical model.  Rows report seed-averaged metrics.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    metrics: dict[str, list[MetricsReport]] = {m: [] for m in
                                               ("OIM-MM", "iHOIM-MM", "iHOIM+MM")}
    accuracies: dict[str, list[float]] = {"oim": [], "ihoim": []}
    histories: dict[str, list[list[EpochStats]]] = {"oim": [], "ihoim": []}

    for seed in seeds:
        scenario_cfg = replace(cfg.scenario, seed=seed)
        scenario = generate(scenario_cfg)
        train_cfg = replace(cfg.train, seed=seed)
        n = scenario_cfg.n_identities
        dim = cfg.memory.embedding_dim
        feature_dim = scenario_cfg.feature_dim

        results: dict[str, tuple[LinearEmbedder, ProjectionMemory]] = {}
        for name, trainer in (("ihoim", train), ("oim", train_oim_baseline)):
            model = LinearEmbedder.init_random(dim, feature_dim, seed=seed)
            mem = ProjectionMemory(n, cfg.memory.n_background, dim,
                                   momentum=train_cfg.momentum,
                                   temperature=train_cfg.temperature)
            histories[name].append(trainer(model, scenario.train_samples, mem, train_cfg))
            accuracies[name].append(rank1_accuracy(
                model, scenario.gallery_samples, scenario.query_samples))
            results[name] = (model, mem)

        dets_ihoim = reembed_detections(scenario.detections, results["ihoim"][0])
        dets_oim = reembed_detections(scenario.detections, results["oim"][0])
        metrics["OIM-MM"].append(_track_and_score(scenario, dets_oim, cfg, False))
        metrics["iHOIM-MM"].append(_track_and_score(scenario, dets_ihoim, cfg, False))
        metrics["iHOIM+MM"].append(_track_and_score(scenario, dets_ihoim, cfg, True))

    def mean(values):
        return float(np.mean(values))

    rows = []
    for method, objective in (("OIM-MM", "oim"), ("iHOIM-MM", "ihoim"),
                              ("iHOIM+MM", "ihoim")):
        reports = metrics[method]
        rows.append(AblationRow(
            method=method,
            mota=mean([r.mota for r in reports]),
            idf1=mean([r.idf1 for r in reports]),
            idsw=mean([r.idsw for r in reports]),
            fp=mean([r.fp for r in reports]),
            fn=mean([r.fn for r in reports]),
            accuracy=mean(accuracies[objective]),
        ))

    oim_row, ihoim_row, fused_row = rows
    checks = AblationChecks(
        accuracy_improves=ihoim_row.accuracy > oim_row.accuracy,
        mota_not_worse=ihoim_row.mota >= oim_row.mota,
        fusion_reduces_idsw=fused_row.idsw <= ihoim_row.idsw,
        fusion_keeps_mota=fused_row.mota >= ihoim_row.mota - 0.005,
        fusion_idf1_not_worse=fused_row.idf1 >= ihoim_row.idf1,
    )
    return AblationResult(rows=rows, checks=checks, seeds=list(seeds),
                          histories=histories)
