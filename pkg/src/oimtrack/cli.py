"""Command-line surface tying the modules into pipelines.

Subcommands: ``synth`` (generate a scenario to MOT-format files), ``track``
(run the tracker over detection + embedding files), ``evaluate`` (CLEAR
MOT/IDF1 report), ``gradcheck`` (finite-difference audit of the analytic
loss gradient), and ``ablate`` (loss/motion-fusion comparison table).

Exit codes: 0 success, 1 input error, 2 failed acceptance check
(gradcheck tolerance exceeded or an ablation direction violated).
Every command is deterministic given its config and seed: reruns produce
byte-identical output files.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, benchmark_run_config
from .learn import write_history_csv
from .loss import ihoim_gradient, ihoim_loss
from .memory import ProjectionMemory
from .metrics import clear_mot, idf1
from .mot_io import (
    MotParseError,
    attach_embeddings,
    combine_records,
    parse_embeddings,
    parse_mot,
    read_detections,
    write_detections,
    write_embeddings,
    write_mot,
)
from .pipeline import filter_detections, run_ablation, run_tracking
from .synth import generate, prototype_separation

GRADCHECK_TOLERANCE = 1e-4
_FD_STEP = 1e-5


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig.load(path)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = generate(cfg.scenario)

    write_mot(scenario.gt, out_dir / "gt.txt", side="gt")
    write_detections(scenario.detections, out_dir / "det.txt")
    write_embeddings(scenario.detections, out_dir / "emb.csv",
                     dim=cfg.scenario.feature_dim)
    min_angle = (prototype_separation(scenario)
                 if cfg.scenario.n_identities >= 2 else None)
    _write_json(out_dir / "scenario.json", {
        "config": cfg.to_dict(),
        "summary": {
            "n_frames": cfg.scenario.n_frames,
            "n_detections": sum(len(f) for f in scenario.detections),
            "prototype_min_angle_deg": min_angle,
        },
    })
    print(f"wrote scenario to {out_dir}")
    return 0


def cmd_track(args) -> int:
    cfg = _load_config(args.config)
    det_frames = read_detections(args.det)
    if args.emb is not None:
        det_frames = attach_embeddings(det_frames, parse_embeddings(args.emb))
    det_frames = filter_detections(det_frames, cfg.io.min_confidence, cfg.io.nms_iou)
    tracker_cfg = cfg.tracker
    if args.no_motion_fusion:
        tracker_cfg = replace(tracker_cfg, motion_fusion=False)
    predictions = run_tracking(det_frames, tracker_cfg)
    write_mot(predictions, args.out, side="predictions")
    print(f"tracked {predictions.n_frames} frames -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    gt = parse_mot(args.gt)
    res = parse_mot(args.res, as_predictions=True)
    seq = combine_records(gt, res)
    cm = clear_mot(seq)
    idf1_score = idf1(seq)
    # FN inside the track-confirmation warm-up (first n_init - 1 frames) are
    # unavoidable for any online tracker; annotate their count.
    warmup_frames = min(cfg.tracker.n_init - 1, seq.n_frames)
    warmup_fn = sum(
        len(seq.gt[f]) - len(cm.frame_matches[f]) for f in range(warmup_frames)
    )
    payload = {
        "mota": cm.mota,
        "idf1": idf1_score,
        "idsw": cm.idsw,
        "fp": cm.fp,
        "fn": cm.fn,
        "num_gt": cm.num_gt,
        "warmup_fn": warmup_fn,
    }
    _write_json(Path(args.out), payload)
    print(f"MOTA {cm.mota:.4f}  IDF1 {idf1_score:.4f}  IDSw {cm.idsw}  "
          f"FP {cm.fp}  FN {cm.fn} (warm-up FN {warmup_fn})")
    return 0


def _random_instance(rng: np.random.Generator):
    n = int(rng.integers(1, 9))
    b = int(rng.integers(1, 9))
    dim = int(rng.integers(2, 65))
    tau = 1.0 if rng.uniform() < 0.5 else 1.0 / 30.0
    mem = ProjectionMemory(n, b, dim, momentum=0.5, temperature=tau)
    for row in range(n + b):
        if rng.uniform() < 0.15:
            continue  # leave some rows unwritten (zero)
        v = rng.normal(size=dim)
        mem.w[row] = v / np.linalg.norm(v)
    x = rng.normal(size=dim)
    x /= np.linalg.norm(x)
    y = int(rng.uniform() < 0.6)
    k = None
    if y == 1 and rng.uniform() < 0.8:
        k = int(rng.integers(1, n + 1))
    return mem, x, y, k


def _frozen_objective(mem, x, y, k, lam):
    bd = ihoim_loss(mem, x, y, k)
    if bd.oim_loss is None:
        return bd.detection_loss
    return bd.detection_loss + lam * bd.oim_loss


def gradient_check(trials: int, seed: int) -> float:
    """Max relative error between the analytic gradient and central finite
    differences of the frozen-weight objective over random instances.

    The error scale is floored at 1e-6: below that the objective is
    saturated and central differences bottom out at round-off.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        mem, x, y, k = _random_instance(rng)
        lam = ihoim_loss(mem, x, y, k).lam
        analytic = ihoim_gradient(mem, x, y, k)
        fd = np.zeros_like(x)
        for i in range(x.shape[0]):
            step = np.zeros_like(x)
            step[i] = _FD_STEP
            fd[i] = (_frozen_objective(mem, x + step, y, k, lam)
                     - _frozen_objective(mem, x - step, y, k, lam)) / (2 * _FD_STEP)
        scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(fd)), 1e-6)
        worst = max(worst, float(np.linalg.norm(analytic - fd)) / scale)
    return worst


def cmd_gradcheck(args) -> int:
    start = time.perf_counter()
    worst = gradient_check(args.trials, args.seed)
    elapsed = time.perf_counter() - start
    print(f"max relative gradient error over {args.trials} trials: {worst:.3e} "
          f"({elapsed:.2f}s)")
    return 0 if worst < GRADCHECK_TOLERANCE else 2


def cmd_ablate(args) -> int:
    cfg = benchmark_run_config() if args.config is None else RunConfig.load(args.config)
    seeds = [cfg.train.seed + i for i in range(args.seeds)]
    start = time.perf_counter()
    result = run_ablation(cfg, seeds)
    elapsed = time.perf_counter() - start

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = f"{'method':<10} {'MOTA':>8} {'IDF1':>8} {'IDSw':>8} {'FP':>8} {'FN':>8} {'id_acc':>8}"
    print(header)
    table_lines = ["method,mota,idf1,idsw,fp,fn,accuracy"]
    for row in result.rows:
        print(f"{row.method:<10} {row.mota:>8.4f} {row.idf1:>8.4f} {row.idsw:>8.1f} "
              f"{row.fp:>8.1f} {row.fn:>8.1f} {row.accuracy:>8.4f}")
        table_lines.append(
            f"{row.method},{row.mota!r},{row.idf1!r},{row.idsw!r},"
            f"{row.fp!r},{row.fn!r},{row.accuracy!r}"
        )
    (out_dir / "table.csv").write_text("\n".join(table_lines) + "\n", encoding="utf-8")
    for objective, per_seed in result.histories.items():
        for seed, history in zip(result.seeds, per_seed):
            write_history_csv(history, out_dir / f"history_{objective}_seed{seed}.csv")
    checks = result.checks
    _write_json(out_dir / "report.json", {
        "rows": {
            row.method: {
                "mota": row.mota, "idf1": row.idf1, "idsw": row.idsw,
                "fp": row.fp, "fn": row.fn, "accuracy": row.accuracy,
            }
            for row in result.rows
        },
        "checks": {
            "accuracy_improves": checks.accuracy_improves,
            "mota_not_worse": checks.mota_not_worse,
            "fusion_reduces_idsw": checks.fusion_reduces_idsw,
            "fusion_keeps_mota": checks.fusion_keeps_mota,
            "fusion_idf1_not_worse": checks.fusion_idf1_not_worse,
        },
        "seeds": result.seeds,
    })
    print(f"ablation over seeds {result.seeds} took {elapsed:.1f}s", file=sys.stderr)
    if not checks.all_pass:
        failed = [name for name, ok in (
            ("accuracy_improves", checks.accuracy_improves),
            ("mota_not_worse", checks.mota_not_worse),
            ("fusion_reduces_idsw", checks.fusion_reduces_idsw),
            ("fusion_keeps_mota", checks.fusion_keeps_mota),
            ("fusion_idf1_not_worse", checks.fusion_idf1_not_worse),
        ) if not ok]
        print(f"direction check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oimtrack",
        description="Synthetic-scenario tracking pipelines: generate, track, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scenario to MOT files")
    p.add_argument("--config", required=True, help="run-config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="run the tracker over a detection file")
    p.add_argument("--det", required=True, help="MOT detection file")
    p.add_argument("--emb", default=None, help="embedding sidecar CSV")
    p.add_argument("--config", default=None, help="run-config JSON (defaults used if omitted)")
    p.add_argument("--out", required=True, help="output MOT result file")
    p.add_argument("--no-motion-fusion", action="store_true",
                   help="disable motion-prediction proposals")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="score a result file against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--res", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--config", default=None,
                   help="run-config JSON (for the warm-up annotation)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference audit of the loss gradient")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="loss/motion-fusion ablation table")
    p.add_argument("--config", default=None,
                   help="run-config JSON (benchmark defaults if omitted)")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--seeds", type=int, default=1,
                   help="number of consecutive seeds to average over")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, MotParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
