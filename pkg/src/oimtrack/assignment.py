"""Minimum-cost bipartite assignment with deterministic tie-breaking.

``hungarian`` matches min(rows, cols) pairs at minimum total cost and,
among all minimum-cost assignments, returns the one whose (row, col) pair
sequence (sorted by row) is lexicographically smallest.  The core solve is
scipy's Jonker-Volgenant implementation; the tie-break is enforced by a
greedy prefix refinement that re-solves subproblems, which is cheap at the
matrix sizes a per-frame tracker sees.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

# Cost slack when testing whether a prefix can still reach the optimum;
# covers float re-association error without conflating genuinely
# different assignments at realistic cost scales.
_COST_TOL = 1e-9


def _min_cost(cost: np.ndarray) -> float:
    if cost.shape[0] == 0 or cost.shape[1] == 0:
        return 0.0
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def hungarian(cost) -> dict[int, int]:
    """Minimum-total-cost assignment as a row -> column map.

    Matches min(rows, cols) pairs; empty matrices give an empty map.  Costs
    must be finite (mask disallowed pairs with a large sentinel before
    calling).  Ties are broken toward the lexicographically smallest
    row-major (row, col) pair sequence.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {cost.shape}")
    if cost.size == 0:
        return {}
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite; pre-mask disallowed pairs")

    n_rows, n_cols = cost.shape
    target = _min_cost(cost)
    tol = _COST_TOL * max(1.0, abs(target))

    remaining_rows = list(range(n_rows))
    remaining_cols = list(range(n_cols))
    assignment: dict[int, int] = {}
    spent = 0.0

    while remaining_rows and remaining_cols:
        r = remaining_rows[0]
        other_rows = remaining_rows[1:]

        # One solve of the remaining block suggests a column for r; only
        # smaller-indexed columns can improve the lexicographic order.
        sub = cost[np.ix_(remaining_rows, remaining_cols)]
        sub_rows, sub_cols = linear_sum_assignment(sub)
        suggested = {remaining_rows[i]: remaining_cols[j] for i, j in zip(sub_rows, sub_cols)}
        upper = suggested.get(r)

        chosen = None
        for c in remaining_cols:
            if upper is not None and c == upper:
                chosen = c
                break
            completion = cost[np.ix_(other_rows, [x for x in remaining_cols if x != c])]
            if spent + cost[r, c] + _min_cost(completion) <= target + tol:
                chosen = c
                break

        if chosen is None:
            # No optimal completion matches r (possible only when more rows
            # than columns remain), so r stays unmatched.
            remaining_rows.pop(0)
            continue

        assignment[r] = chosen
        spent += cost[r, chosen]
        remaining_rows.pop(0)
        remaining_cols.remove(chosen)

    return assignment
