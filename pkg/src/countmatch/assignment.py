"""Exact solver for the rectangular linear assignment problem.

Implements the Jonker-Volgenant shortest-augmenting-path formulation
directly on rectangular cost matrices (no square padding): a column
reduction plus greedy seeding pass, then one Dijkstra-style augmentation
per remaining row, vectorized over columns. Complexity is O(n^2 m) for
an n x m matrix with n <= m; wider-than-tall inputs are solved on the
transpose.

The solver minimizes. Callers that want a maximum-weight matching negate
their weights. Ties are broken deterministically: rows are processed in
increasing index order and among equal-slack columns the lowest index
wins, so identical inputs always produce identical assignments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Assignment:
    """A minimum-cost matching: one (row, col) pair per min-side element.

    ``pairs`` is sorted by row index. ``total_cost`` is the exactly
    rounded sum (math.fsum) of the assigned cost entries.
    """

    pairs: tuple[tuple[int, int], ...]
    total_cost: float

    def __len__(self) -> int:
        return len(self.pairs)


def as_cost_matrix(values) -> np.ndarray:
    """Validate and coerce an array-like into a dense float64 cost matrix."""
    cost = np.asarray(values, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {cost.shape}")
    if cost.size and not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix entries must be finite")
    return cost


def hungarian_solve(cost) -> Assignment:
    """Solve the rectangular assignment problem exactly.

    Parameters
    ----------
    cost : array-like, shape (rows, cols)
        Finite costs. Either dimension may be zero.

    Returns
    -------
    Assignment
        ``min(rows, cols)`` pairs covering the smaller side with minimum
        total cost. An empty matrix yields an empty assignment with cost
        zero (not an error).
    """
    cost = as_cost_matrix(cost)
    n, m = cost.shape
    if n == 0 or m == 0:
        return Assignment(pairs=(), total_cost=0.0)
    if n > m:
        transposed = hungarian_solve(np.ascontiguousarray(cost.T))
        pairs = sorted((r, c) for c, r in transposed.pairs)
        return Assignment(pairs=tuple(pairs), total_cost=transposed.total_cost)

    col_of_row = _solve_rect(cost)
    pairs = tuple((i, int(col_of_row[i])) for i in range(n))
    total = math.fsum(cost[i, j] for i, j in pairs)
    return Assignment(pairs=pairs, total_cost=total)


def _solve_rect(cost: np.ndarray) -> np.ndarray:
    """Core JV loop for n <= m. Returns col_of_row."""
    n, m = cost.shape
    u = np.zeros(n, dtype=np.float64)
    v = np.zeros(m, dtype=np.float64)

    col_of_row = np.full(n, -1, dtype=np.int64)
    row_of_col = np.full(m, -1, dtype=np.int64)

    # Square problems admit a column-reduction warm start: with u = 0 and
    # v the column minima, a pair is dual tight exactly where cost - v is
    # zero, so each row can greedily grab its first free tight column.
    # Rectangular problems cannot (columns left unmatched must keep a
    # non-positive potential), so they start cold.
    if n == m:
        v = cost.min(axis=0).astype(np.float64)
        for i in range(n):
            reduced = cost[i] - v
            for j in np.nonzero(reduced == 0.0)[0]:
                if row_of_col[j] == -1:
                    col_of_row[i] = j
                    row_of_col[j] = int(i)
                    break

    for i in range(n):
        if col_of_row[i] == -1:
            _augment(cost, u, v, col_of_row, row_of_col, i)
    return col_of_row


def _augment(cost: np.ndarray, u: np.ndarray, v: np.ndarray,
             col_of_row: np.ndarray, row_of_col: np.ndarray, start_row: int) -> None:
    """Grow the matching with a shortest augmenting path from one row."""
    m = cost.shape[1]
    minv = np.full(m, np.inf, dtype=np.float64)
    came_from = np.full(m, -1, dtype=np.int64)  # predecessor column; -1 = start row
    in_tree = np.zeros(m, dtype=bool)
    tree_rows = [start_row]
    i0 = start_row  # row most recently added to the alternating tree
    j0 = -1         # column that brought i0 into the tree

    while True:
        cand = cost[i0] - u[i0] - v
        better = (~in_tree) & (cand < minv)
        minv[better] = cand[better]
        came_from[better] = j0

        masked = np.where(in_tree, np.inf, minv)
        j1 = int(np.argmin(masked))
        delta = float(masked[j1])

        u[np.asarray(tree_rows, dtype=np.int64)] += delta
        v[in_tree] -= delta
        minv[~in_tree] -= delta

        in_tree[j1] = True
        j0 = j1
        i0 = int(row_of_col[j1])
        if i0 == -1:
            break
        tree_rows.append(i0)

    # Flip the alternating path back to the start row.
    j = j0
    while j != -1:
        prev = int(came_from[j])
        row = start_row if prev == -1 else int(row_of_col[prev])
        row_of_col[j] = row
        col_of_row[row] = j
        j = prev
