import numpy as np
import pytest

from oimtrack.memory import ProjectionMemory


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class TestConstruction:
    def test_paper_scale_mot16(self):
        mem = ProjectionMemory(517, 500, 256, momentum=0.5, temperature=1 / 30)
        assert mem.w.shape == (1017, 256)
        assert not mem.w.any()
        assert mem.queue_head == 0

    def test_minimal(self):
        mem = ProjectionMemory(1, 1, 2, momentum=0.5, temperature=1.0)
        assert mem.w.shape == (2, 2)
        assert not mem.w.any()

    def test_paper_scale_mot20(self):
        mem = ProjectionMemory(2332, 2000, 256)
        assert mem.w.shape == (4332, 256)

    @pytest.mark.parametrize("kwargs", [
        dict(n_identities=0, n_background=1, dim=2),
        dict(n_identities=1, n_background=0, dim=2),
        dict(n_identities=1, n_background=1, dim=0),
        dict(n_identities=1, n_background=1, dim=2, momentum=1.5),
        dict(n_identities=1, n_background=1, dim=2, temperature=0.0),
    ])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(ValueError):
            ProjectionMemory(**kwargs)


class TestProject:
    def test_matching_row_scores_one(self):
        mem = ProjectionMemory(2, 1, 3)
        x = unit([1.0, 2.0, 2.0])
        mem.w[1] = x
        scores = mem.project(x)
        assert scores[1] == pytest.approx(1.0)

    def test_orthogonal_row_scores_zero(self):
        mem = ProjectionMemory(1, 1, 2)
        mem.w[0] = [1.0, 0.0]
        assert mem.project(np.array([0.0, 1.0]))[0] == 0.0

    def test_direct_dot_product(self):
        mem = ProjectionMemory(1, 1, 2)
        mem.w[0] = [0.6, 0.8]
        assert mem.project(np.array([1.0, 0.0]))[0] == pytest.approx(0.6)

    def test_dimension_mismatch(self):
        mem = ProjectionMemory(1, 1, 3)
        with pytest.raises(ValueError):
            mem.project(np.array([1.0, 0.0]))

    def test_scores_bounded_for_unit_inputs(self):
        rng = np.random.default_rng(1)
        mem = ProjectionMemory(4, 4, 8)
        for k in range(1, 5):
            mem.update_labeled(k, unit(rng.normal(size=8)))
        for _ in range(4):
            mem.push_background(unit(rng.normal(size=8)))
        for _ in range(100):
            s = mem.project(unit(rng.normal(size=8)))
            assert np.all(s >= -1.0 - 1e-12) and np.all(s <= 1.0 + 1e-12)


class TestUpdateLabeled:
    def test_momentum_blend_then_renormalize(self):
        mem = ProjectionMemory(1, 1, 2, momentum=0.5)
        mem.w[0] = [1.0, 0.0]
        mem.update_labeled(1, np.array([0.0, 1.0]))
        assert mem.w[0] == pytest.approx([0.70711, 0.70711], abs=1e-5)

    def test_fixed_point_of_identical_vectors(self):
        mem = ProjectionMemory(1, 1, 2, momentum=0.5)
        x = unit([3.0, 4.0])
        mem.w[0] = x
        mem.update_labeled(1, x)
        assert mem.w[0] == pytest.approx(x)

    def test_first_write_into_zero_row(self):
        mem = ProjectionMemory(1, 1, 2, momentum=0.5)
        mem.update_labeled(1, np.array([0.0, 1.0]))
        assert mem.w[0] == pytest.approx([0.0, 1.0])

    def test_index_out_of_range(self):
        mem = ProjectionMemory(2, 1, 2)
        with pytest.raises(ValueError):
            mem.update_labeled(0, np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            mem.update_labeled(3, np.array([1.0, 0.0]))

    def test_degenerate_blend_rejected(self):
        mem = ProjectionMemory(1, 1, 2, momentum=0.5)
        mem.w[0] = [1.0, 0.0]
        with pytest.raises(ValueError):
            mem.update_labeled(1, np.array([-1.0, 0.0]))

    def test_unit_norm_after_many_updates(self):
        rng = np.random.default_rng(2)
        mem = ProjectionMemory(3, 2, 5, momentum=0.5)
        for _ in range(200):
            mem.update_labeled(int(rng.integers(1, 4)), unit(rng.normal(size=5)))
        norms = np.linalg.norm(mem.lut, axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-6)

    def test_does_not_touch_queue(self):
        mem = ProjectionMemory(2, 3, 4, momentum=0.5)
        before = mem.queue.copy()
        mem.update_labeled(1, unit(np.ones(4)))
        assert np.array_equal(mem.queue, before)


class TestPushBackground:
    def test_replacement_order(self):
        mem = ProjectionMemory(1, 2, 2)
        a, b, c = unit([1, 0]), unit([0, 1]), unit([1, 1])
        mem.push_background(a)
        mem.push_background(b)
        mem.push_background(c)
        assert mem.queue[0] == pytest.approx(c)
        assert mem.queue[1] == pytest.approx(b)

    def test_head_wraps_after_full_cycle(self):
        mem = ProjectionMemory(1, 3, 2)
        for _ in range(3):
            mem.push_background(unit([1, 1]))
        assert mem.queue_head == 0

    def test_single_write_into_fresh_memory(self):
        mem = ProjectionMemory(2, 2, 2)
        mem.push_background(unit([1, 0]))
        assert mem.w[2] == pytest.approx([1, 0])
        assert not mem.w[[0, 1, 3]].any()

    def test_does_not_touch_lut(self):
        mem = ProjectionMemory(2, 2, 3)
        mem.update_labeled(1, unit([1, 2, 3]))
        before = mem.lut.copy()
        mem.push_background(unit([3, 2, 1]))
        assert np.array_equal(mem.lut, before)

    def test_queue_holds_last_b_vectors(self):
        rng = np.random.default_rng(3)
        mem = ProjectionMemory(1, 4, 3)
        pushed = []
        for _ in range(11):
            v = unit(rng.normal(size=3))
            pushed.append(v)
            mem.push_background(v)
        # after 11 pushes into B=4: head = 11 % 4 = 3; slot i holds the most
        # recent vector written there
        expected = {0: pushed[8], 1: pushed[9], 2: pushed[10], 3: pushed[7]}
        for slot, vec in expected.items():
            assert mem.queue[slot] == pytest.approx(vec)


class TestScriptedReference:
    """Memory semantics against a straight-line reference implementation."""

    def test_matches_reference_on_random_scripts(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            n = int(rng.integers(1, 6))
            b = int(rng.integers(1, 6))
            d = int(rng.integers(2, 8))
            eta = float(rng.uniform(0.1, 0.9))
            mem = ProjectionMemory(n, b, d, momentum=eta)
            ref_lut = [np.zeros(d) for _ in range(n)]
            ref_queue = [np.zeros(d) for _ in range(b)]
            head = 0
            for _ in range(60):
                x = unit(rng.normal(size=d))
                if rng.uniform() < 0.5:
                    k = int(rng.integers(1, n + 1))
                    mem.update_labeled(k, x)
                    blend = eta * ref_lut[k - 1] + (1 - eta) * x
                    ref_lut[k - 1] = blend / np.linalg.norm(blend)
                else:
                    mem.push_background(x)
                    ref_queue[head] = x
                    head = (head + 1) % b
            assert np.array_equal(mem.lut, np.stack(ref_lut))
            assert np.array_equal(mem.queue, np.stack(ref_queue))
            assert mem.queue_head == head


class TestSnapshot:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        mem = ProjectionMemory(3, 2, 4, momentum=0.7, temperature=1 / 30)
        for k in range(1, 4):
            mem.update_labeled(k, unit(rng.normal(size=4)))
        mem.push_background(unit(rng.normal(size=4)))
        path = tmp_path / "mem.csv"
        mem.save(path)
        loaded = ProjectionMemory.load(path)
        assert np.array_equal(loaded.w, mem.w)
        assert loaded.queue_head == mem.queue_head
        assert loaded.momentum == mem.momentum
        assert loaded.temperature == mem.temperature

    def test_load_rejects_truncated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("n_identities,n_background,dim,queue_head,momentum,temperature\n")
        with pytest.raises(ValueError):
            ProjectionMemory.load(path)
