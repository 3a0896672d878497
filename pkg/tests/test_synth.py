import numpy as np
import pytest

from oimtrack.metrics import SequenceRecord, evaluate_sequence
from oimtrack.mot_io import combine_records
from oimtrack.synth import (
    Scenario,
    ScenarioConfig,
    benchmark_config,
    generate,
    prototype_separation,
)


def clean_config(**overrides):
    base = dict(n_identities=3, n_frames=20, arena_width=800, arena_height=600,
                feature_dim=16, min_speed=1.0, max_speed=3.0, seed=0)
    base.update(overrides)
    return ScenarioConfig(**base)


class TestConfigValidation:
    def test_rates_must_be_proper(self):
        with pytest.raises(ValueError):
            clean_config(miss_rate=1.0)
        with pytest.raises(ValueError):
            clean_config(false_positive_rate=-0.1)

    def test_occlusion_windows_checked(self):
        with pytest.raises(ValueError):
            clean_config(occlusions=[(1, 5, 25)])
        with pytest.raises(ValueError):
            clean_config(occlusions=[(9, 5, 10)])

    def test_counts_checked(self):
        with pytest.raises(ValueError):
            clean_config(n_identities=0)
        with pytest.raises(ValueError):
            clean_config(n_frames=0)


class TestGeneration:
    def test_noiseless_detections_equal_gt(self):
        scen = generate(clean_config())
        for f in range(scen.gt.n_frames):
            gt_boxes = [b for _, b in scen.gt.gt[f]]
            det_boxes = [d.box for d in scen.detections[f]]
            assert len(gt_boxes) == len(det_boxes)
            for g, d in zip(gt_boxes, det_boxes):
                assert g == d

    def test_full_miss_rate_leaves_only_false_positives(self):
        scen = generate(clean_config(miss_rate=0.999999, false_positive_rate=0.5))
        # Bernoulli miss at ~1 kills every identity detection
        total = sum(len(f) for f in scen.detections)
        assert 0 < total < scen.gt.n_frames  # only occasional false positives

    def test_deterministic_under_seed(self):
        a = generate(clean_config(miss_rate=0.2, false_positive_rate=0.3,
                                  box_jitter=1.5, embedding_noise=0.4))
        b = generate(clean_config(miss_rate=0.2, false_positive_rate=0.3,
                                  box_jitter=1.5, embedding_noise=0.4))
        assert a.gt == b.gt
        assert np.array_equal(a.prototypes, b.prototypes)
        for fa, fb in zip(a.detections, b.detections):
            assert len(fa) == len(fb)
            for da, db in zip(fa, fb):
                assert da.box == db.box and da.confidence == db.confidence
                assert np.array_equal(da.embedding, db.embedding)

    def test_different_seeds_differ(self):
        a = generate(clean_config(seed=1, box_jitter=1.0))
        b = generate(clean_config(seed=2, box_jitter=1.0))
        assert a.gt != b.gt

    def test_gt_boxes_stay_in_arena(self):
        scen = generate(clean_config(n_frames=300, min_speed=3.0, max_speed=6.0))
        for frame in scen.gt.gt:
            for _, box in frame:
                assert box.left >= 0 and box.top >= 0
                assert box.right <= 800 and box.bottom <= 600

    def test_occluded_identity_missing_from_detections_only(self):
        scen = generate(clean_config(occlusions=[(2, 5, 9)]))
        for f in range(4, 9):  # frames 5..9, zero-based indices
            assert any(gid == 2 for gid, _ in scen.gt.gt[f])
            # noiseless detections pair one-to-one with visible identities
            assert len(scen.detections[f]) == 2

    def test_embeddings_unit_norm(self):
        scen = generate(clean_config(embedding_noise=0.7,
                                     false_positive_rate=0.4, box_jitter=1.0))
        for frame in scen.detections:
            for d in frame:
                assert abs(np.linalg.norm(d.embedding) - 1.0) < 1e-9
        for s in scen.train_samples + scen.gallery_samples + scen.query_samples:
            assert abs(np.linalg.norm(s.feature) - 1.0) < 1e-9

    def test_sample_split_sizes(self):
        cfg = clean_config(train_per_identity=7, gallery_per_identity=2,
                           query_per_identity=4, train_backgrounds=11)
        scen = generate(cfg)
        persons = [s for s in scen.train_samples if s.is_person]
        backgrounds = [s for s in scen.train_samples if not s.is_person]
        assert len(persons) == 21 and len(backgrounds) == 11
        assert len(scen.gallery_samples) == 6
        assert len(scen.query_samples) == 12


class TestStatistics:
    def test_expected_detection_count(self):
        cfg = clean_config(n_identities=4, n_frames=1500, miss_rate=0.3,
                           false_positive_rate=0.4, arena_width=2000,
                           arena_height=2000, min_speed=0.2, max_speed=0.5)
        scen = generate(cfg)
        counts = [len(f) for f in scen.detections]
        expected = 4 * 0.7 + 0.4
        assert np.mean(counts) == pytest.approx(expected, rel=0.05)


class TestPrototypes:
    def test_orthogonal_pair_is_ninety_degrees(self):
        scen = generate(clean_config(n_identities=2))
        scen.prototypes = np.eye(16)[:2]
        assert prototype_separation(scen) == pytest.approx(90.0)

    def test_separation_floor_enforced(self):
        scen = generate(ScenarioConfig(n_identities=20, n_frames=2,
                                       feature_dim=64, seed=0))
        assert prototype_separation(scen) >= 15.0

    def test_single_identity_rejected(self):
        scen = generate(clean_config(n_identities=1))
        with pytest.raises(ValueError):
            prototype_separation(scen)

    def test_impossible_separation_fails_loudly(self):
        with pytest.raises(ValueError):
            generate(ScenarioConfig(n_identities=50, n_frames=2, feature_dim=2,
                                    min_prototype_angle_deg=60.0, seed=0))


class TestSelfConsistency:
    def test_gt_scores_perfectly_against_itself(self):
        scen = generate(clean_config(miss_rate=0.3, box_jitter=2.0,
                                     false_positive_rate=0.3,
                                     embedding_noise=0.5))
        mirror = SequenceRecord(n_frames=scen.gt.n_frames,
                                predictions=[list(f) for f in scen.gt.gt])
        report = evaluate_sequence(combine_records(scen.gt, mirror))
        assert report.mota == 1.0 and report.idf1 == 1.0

    def test_benchmark_config_is_valid_and_generates(self):
        cfg = benchmark_config(seed=1)
        assert cfg.n_identities == 20 and cfg.n_frames == 400
        scen = generate(cfg)
        assert isinstance(scen, Scenario)
        assert prototype_separation(scen) >= cfg.min_prototype_angle_deg
