import itertools

import numpy as np
import pytest

from oimtrack.assignment import hungarian


def brute_force_min_cost(cost):
    rows, cols = cost.shape
    k = min(rows, cols)
    best = None
    if rows <= cols:
        for perm in itertools.permutations(range(cols), k):
            total = sum(cost[i, j] for i, j in zip(range(rows), perm))
            best = total if best is None else min(best, total)
    else:
        for perm in itertools.permutations(range(rows), k):
            total = sum(cost[i, j] for i, j in zip(perm, range(cols)))
            best = total if best is None else min(best, total)
    return best


def brute_force_lex_best(cost):
    """Smallest (cost, row-major pair sequence) over all maximal matchings."""
    rows, cols = cost.shape
    k = min(rows, cols)
    best = None
    for row_subset in itertools.combinations(range(rows), k):
        for col_perm in itertools.permutations(range(cols), k):
            total = sum(cost[i, j] for i, j in zip(row_subset, col_perm))
            seq = tuple(sorted(zip(row_subset, col_perm)))
            key = (total, seq)
            if best is None or key < best:
                best = key
    return best


class TestBasics:
    def test_singleton(self):
        assert hungarian(np.array([[0.0]])) == {0: 0}

    def test_two_by_two_hand_case(self):
        assert hungarian(np.array([[1.0, 2.0], [3.0, 1.0]])) == {0: 0, 1: 1}

    def test_all_equal_ties_to_diagonal(self):
        assert hungarian(np.ones((3, 3))) == {0: 0, 1: 1, 2: 2}

    def test_empty(self):
        assert hungarian(np.zeros((0, 4))) == {}
        assert hungarian(np.zeros((3, 0))) == {}

    def test_rectangular_matches_min_side(self):
        cost = np.array([[1.0, 0.0, 2.0], [2.0, 3.0, 0.5]])
        result = hungarian(cost)
        assert len(result) == 2
        assert result == {0: 1, 1: 2}

    def test_more_rows_than_cols(self):
        cost = np.array([[5.0], [1.0], [3.0]])
        assert hungarian(cost) == {1: 0}

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            hungarian(np.array([[np.inf, 1.0], [1.0, 2.0]]))

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            hungarian(np.zeros(3))


class TestBruteForceOracle:
    def test_exact_cost_on_lattice_matrices(self):
        # dyadic-rational costs make sums exact, so equality is exact
        rng = np.random.default_rng(0)
        for _ in range(200):
            rows = int(rng.integers(1, 8))
            cols = int(rng.integers(1, 8))
            cost = rng.integers(0, 6400, size=(rows, cols)).astype(float) / 64.0
            result = hungarian(cost)
            got = sum(cost[i, j] for i, j in result.items())
            assert got == brute_force_min_cost(cost)

    def test_cost_on_continuous_matrices(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            rows = int(rng.integers(1, 7))
            cols = int(rng.integers(1, 7))
            cost = rng.uniform(0, 10, size=(rows, cols))
            result = hungarian(cost)
            got = sum(cost[i, j] for i, j in result.items())
            assert got == pytest.approx(brute_force_min_cost(cost), abs=1e-9)

    def test_lexicographic_tie_break_small_integers(self):
        # small integer costs force many ties; the returned assignment must
        # be the lexicographically smallest optimal one
        rng = np.random.default_rng(2)
        for _ in range(150):
            rows = int(rng.integers(1, 6))
            cols = int(rng.integers(1, 6))
            cost = rng.integers(0, 4, size=(rows, cols)).astype(float)
            result = tuple(sorted(hungarian(cost).items()))
            best_cost, best_seq = brute_force_lex_best(cost)
            assert result == best_seq
            assert sum(cost[i, j] for i, j in result) == best_cost


class TestSentinelConvention:
    def test_sentinel_pairs_can_be_filtered(self):
        sentinel = 1e5
        cost = np.array([[0.1, sentinel], [sentinel, sentinel]])
        result = hungarian(cost)
        kept = {i: j for i, j in result.items() if cost[i, j] < sentinel}
        assert kept == {0: 0}
