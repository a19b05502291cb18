"""Iterative boundary refinement of a labeled grid.

Each pass finds every pair of opposite-label points within a fixed
radius, inserts the pair midpoints (skipping any that would land closer
than a minimum distance to an existing point), labels the new points
with the criterion, and repeats on the grown grid. New points take part
in the neighbor search only from the next pass onward, so a pass is a
deterministic function of the grid it started from.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import product

import numpy as np

from .criterion import INSIDE, OUTSIDE, LabeledGrid, label
from .errors import InvalidArgumentError, IsolatedPointError
from .grid import Grid

__all__ = ["RefineConfig", "RefineResult", "boundary_pairs", "refine"]


@dataclass(frozen=True)
class RefineConfig:
    """Neighborhood radius, iteration and size caps, and the dedup distance.

    min_insert_distance defaults to 1e-3 * radius; repeated midpoint
    halving would otherwise pile up numerically indistinct points.
    """

    radius: float
    max_iterations: int = 10
    point_budget: int = 100_000
    min_insert_distance: float | None = None

    def __post_init__(self):
        if not self.radius > 0.0:
            raise InvalidArgumentError("radius must be positive")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if self.point_budget < 1:
            raise InvalidArgumentError("point_budget must be >= 1")
        if self.min_insert_distance is None:
            object.__setattr__(self, "min_insert_distance", 1e-3 * self.radius)
        elif not self.min_insert_distance > 0.0:
            raise InvalidArgumentError("min_insert_distance must be positive")


@dataclass(frozen=True)
class RefineResult:
    """Refined grid plus bookkeeping; truncated means the point budget hit."""

    data: LabeledGrid
    truncated: bool
    iterations_run: int
    n_inserted: int


class _SpatialHash:
    """Uniform cells of width `cell`; exact neighbor search within `cell`."""

    def __init__(self, points: np.ndarray, cell: float):
        self.points = points
        self.cell = cell
        self.table: dict[tuple, list[int]] = defaultdict(list)
        self._keys = np.floor(points / cell).astype(np.int64)
        for idx, key in enumerate(self._keys):
            self.table[tuple(key)].append(idx)
        self._offsets = list(product((-1, 0, 1), repeat=points.shape[1]))

    def add(self, idx: int, point: np.ndarray) -> None:
        self.table[tuple(np.floor(point / self.cell).astype(np.int64))].append(idx)

    def candidates(self, point: np.ndarray) -> list[int]:
        base = np.floor(point / self.cell).astype(np.int64)
        out: list[int] = []
        for off in self._offsets:
            out.extend(self.table.get(tuple(base + off), ()))
        return out

    def neighbors_within(self, idx: int, radius: float, points: np.ndarray) -> list[int]:
        p = points[idx]
        cand = self.candidates(p)
        r2 = radius * radius
        return [
            j for j in cand if j != idx and float(np.sum((points[j] - p) ** 2)) <= r2
        ]

    def has_point_within(self, point: np.ndarray, dist: float, points: np.ndarray) -> bool:
        d2 = dist * dist
        return any(
            float(np.sum((points[j] - point) ** 2)) <= d2 for j in self.candidates(point)
        )


def boundary_pairs(data: LabeledGrid, radius: float) -> list[tuple[int, int]]:
    """All unordered index pairs within `radius` carrying opposite labels.

    Lexicographically sorted, so downstream insertion order is deterministic.
    """
    if not radius > 0.0:
        raise InvalidArgumentError("radius must be positive")
    points = data.points
    labels = data.labels
    hash_ = _SpatialHash(points, radius)
    pairs: set[tuple[int, int]] = set()
    for i in range(points.shape[0]):
        for j in hash_.neighbors_within(i, radius, points):
            if labels[i] != labels[j]:
                pairs.add((i, j) if i < j else (j, i))
    return sorted(pairs)


def _check_isolation(points: np.ndarray, radius: float) -> None:
    hash_ = _SpatialHash(points, radius)
    for i in range(points.shape[0]):
        if not hash_.neighbors_within(i, radius, points):
            raise IsolatedPointError(
                f"grid point {i} has no neighbor within radius {radius}; "
                "choose a larger radius"
            )


def refine(data: LabeledGrid, criterion, config: RefineConfig) -> RefineResult:
    """Insert labeled midpoints between opposite-label neighbors until stable.

    Stops at the midpoint fixpoint, the iteration cap, or the point budget,
    whichever comes first; the budget case is flagged truncated. Input
    points and labels are preserved as a prefix of the output.
    """
    data.require_both_classes()
    _check_isolation(data.points, config.radius)

    points = data.points
    labels = data.labels
    min_dist = config.min_insert_distance
    truncated = False
    iterations_run = 0

    for _ in range(config.max_iterations):
        iterations_run += 1
        pairs = boundary_pairs(
            LabeledGrid(
                grid=Grid(box=data.grid.box, kind=data.grid.kind, points=points,
                          validate=False),
                labels=labels,
            ),
            config.radius,
        )
        dedup = _SpatialHash(points, min_dist)
        accepted: list[np.ndarray] = []
        n_existing = points.shape[0]
        for i, j in pairs:
            if n_existing + len(accepted) >= config.point_budget:
                truncated = True
                break
            mid = 0.5 * (points[i] + points[j])
            if dedup.has_point_within(mid, min_dist, points):
                continue
            if any(float(np.sum((a - mid) ** 2)) <= min_dist**2 for a in accepted):
                continue
            accepted.append(mid)
        if not accepted and not truncated:
            break
        if accepted:
            new_pts = np.array(accepted)
            new_labels = np.array([label(criterion, p) for p in new_pts], dtype=np.int64)
            points = np.vstack([points, new_pts])
            labels = np.concatenate([labels, new_labels])
        if truncated:
            break

    refined = LabeledGrid(
        grid=Grid(box=data.grid.box, kind=data.grid.kind, points=points),
        labels=labels,
    )
    return RefineResult(
        data=refined,
        truncated=truncated,
        iterations_run=iterations_run,
        n_inserted=points.shape[0] - data.count,
    )
