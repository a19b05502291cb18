"""Equidistributed point sequences on axis-aligned boxes.

Four sequence families are provided: seeded Monte Carlo (counter-based
Philox, so regenerating a longer run reproduces the shorter one), Sobol
(Joe-Kuo direction numbers, d <= 16), Weyl (fractional parts of
n * sqrt(p_k) with p_k the k-th prime), and Baker (fractional parts of
n * exp(1/(k+1))). All are generated on the unit cube and mapped
affinely into the target box, and all extend by prefix: the first n
points of a longer grid equal the n-point grid exactly.

Weyl and Baker fractional parts are computed with 96-bit fixed-point
integer arithmetic instead of float multiplication, which keeps the
sequence exact far beyond 1e7 terms (naive double products lose digits
there because n * sqrt(p) grows large before reduction mod 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from math import isqrt

import numpy as np
from scipy.spatial import cKDTree

from ._sobol import MAX_DIMENSION, sobol_points
from .errors import (
    DegenerateBoxError,
    DuplicatePointError,
    InvalidArgumentError,
)

__all__ = [
    "Box",
    "SequenceKind",
    "Grid",
    "SOBOL",
    "WEYL",
    "BAKER",
    "monte_carlo",
    "generate",
    "extend",
    "equidistribution_fraction",
    "min_pairwise_distance",
    "smallest_enclosing_box",
    "write_grid_csv",
    "read_grid_csv",
]

_FIXED_BITS = 96
_FIXED_MOD = 1 << _FIXED_BITS
_FIXED_SCALE = float(_FIXED_MOD)


@dataclass(frozen=True)
class Box:
    """Axis-aligned hyperrectangle prod_i [lower_i, upper_i]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        if lower.ndim != 1 or upper.ndim != 1 or lower.size == 0:
            raise InvalidArgumentError("box bounds must be non-empty 1-d vectors")
        if lower.shape != upper.shape:
            raise InvalidArgumentError("box bounds must have equal length")
        if not np.all(lower < upper):
            raise DegenerateBoxError("box requires lower[i] < upper[i] for every i")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains_box(self, other: "Box") -> bool:
        return bool(
            other.dim == self.dim
            and np.all(other.lower >= self.lower)
            and np.all(other.upper <= self.upper)
        )

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def map_from_unit(self, unit: np.ndarray) -> np.ndarray:
        return self.lower + unit * self.widths


@dataclass(frozen=True)
class SequenceKind:
    """Which sequence family generates the grid.

    `seed` is meaningful (and required) only for the Monte Carlo family;
    the other families are fully deterministic.
    """

    name: str
    seed: int | None = None

    _NAMES = ("montecarlo", "sobol", "weyl", "baker")

    def __post_init__(self):
        if self.name not in self._NAMES:
            raise InvalidArgumentError(f"unknown sequence kind {self.name!r}")
        if self.name == "montecarlo":
            if self.seed is None or int(self.seed) < 0:
                raise InvalidArgumentError("Monte Carlo requires a nonnegative seed")
            object.__setattr__(self, "seed", int(self.seed))
        elif self.seed is not None:
            raise InvalidArgumentError(f"{self.name} takes no seed")

    def __str__(self) -> str:
        if self.name == "montecarlo":
            return f"montecarlo:{self.seed}"
        return self.name

    @classmethod
    def parse(cls, text: str) -> "SequenceKind":
        text = text.strip().lower()
        if text.startswith("montecarlo"):
            _, _, seed = text.partition(":")
            if not seed:
                raise InvalidArgumentError("montecarlo kind must carry a seed, e.g. montecarlo:42")
            return cls("montecarlo", int(seed))
        return cls(text)


SOBOL = SequenceKind("sobol")
WEYL = SequenceKind("weyl")
BAKER = SequenceKind("baker")


def monte_carlo(seed: int) -> SequenceKind:
    return SequenceKind("montecarlo", seed)


@dataclass(frozen=True)
class Grid:
    """Ordered points of one sequence on one box.

    Immutable after construction; every point lies inside the box and no
    two points coincide.
    """

    box: Box
    kind: SequenceKind
    points: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidArgumentError("grid needs at least one point")
        if pts.shape[1] != self.box.dim:
            raise InvalidArgumentError("point dimension does not match box")
        if self.validate:
            if not bool(np.all(self.box.contains_points(pts))):
                raise InvalidArgumentError("grid point outside box")
            if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
                raise DuplicatePointError("grid contains duplicate points")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _primes(k: int) -> list[int]:
    out: list[int] = []
    cand = 2
    while len(out) < k:
        if all(cand % p for p in out):
            out.append(cand)
        cand += 1
    return out


def _weyl_multipliers(dim: int) -> list[int]:
    # floor(sqrt(p) * 2^96), exact via integer square root
    return [isqrt(p << (2 * _FIXED_BITS)) for p in _primes(dim)]


def _baker_multipliers(dim: int) -> list[int]:
    # floor(exp(1/(k+1)) * 2^96) for k = 1..dim, via high-precision Decimal
    out = []
    with localcontext() as ctx:
        ctx.prec = 60
        for k in range(1, dim + 1):
            val = (Decimal(1) / Decimal(k + 1)).exp() * (Decimal(2) ** _FIXED_BITS)
            out.append(int(val))
    return out


def _fractional_sequence(multipliers: list[int], count: int) -> np.ndarray:
    unit = np.empty((count, len(multipliers)), dtype=np.float64)
    for j, mult in enumerate(multipliers):
        col = unit[:, j]
        acc = 0
        for n in range(count):
            acc = (acc + mult) % _FIXED_MOD
            col[n] = acc
        col /= _FIXED_SCALE
    return unit


def _unit_points(kind: SequenceKind, count: int, dim: int) -> np.ndarray:
    if kind.name == "montecarlo":
        rng = np.random.Generator(np.random.Philox(key=kind.seed))
        return rng.random((count, dim))
    if kind.name == "sobol":
        return sobol_points(count, dim)
    if kind.name == "weyl":
        return _fractional_sequence(_weyl_multipliers(dim), count)
    if kind.name == "baker":
        return _fractional_sequence(_baker_multipliers(dim), count)
    raise InvalidArgumentError(f"unknown sequence kind {kind.name!r}")


def generate(kind: SequenceKind, box: Box, count: int) -> Grid:
    """First `count` terms of the sequence, mapped affinely into `box`.

    Deterministic for a fixed (kind, box, count); Monte Carlo is fixed by
    its seed. Raises UnsupportedDimensionError for Sobol beyond d=16.
    """
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    unit = _unit_points(kind, count, box.dim)
    return Grid(box=box, kind=kind, points=box.map_from_unit(unit))


def extend(grid: Grid, new_count: int) -> Grid:
    """Re-generate the same sequence with more terms; the old grid is a prefix.

    Only works for grids that actually are sequence prefixes (a refined or
    hand-built grid is rejected because regeneration cannot reproduce it).
    """
    if new_count < grid.count:
        raise InvalidArgumentError("new_count must be >= current count")
    if new_count == grid.count:
        return grid
    bigger = generate(grid.kind, grid.box, new_count)
    if not np.array_equal(bigger.points[: grid.count], grid.points):
        raise InvalidArgumentError(
            "grid is not a prefix of its generating sequence; cannot extend"
        )
    return bigger


def equidistribution_fraction(grid: Grid, subbox: Box) -> float:
    """Fraction of grid points falling inside `subbox` (must lie within the grid box)."""
    if not grid.box.contains_box(subbox):
        raise InvalidArgumentError("subbox must be contained in the grid box")
    return float(np.mean(subbox.contains_points(grid.points)))


def min_pairwise_distance(points: np.ndarray) -> float:
    """Smallest Euclidean distance between any two of the points.

    Raises DuplicatePointError when two points coincide.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < 2:
        raise InvalidArgumentError("need at least 2 points")
    tree = cKDTree(pts)
    dist, _ = tree.query(pts, k=2)
    d = float(dist[:, 1].min())
    if d == 0.0:
        raise DuplicatePointError("two points coincide")
    return d


def smallest_enclosing_box(points: np.ndarray) -> Box:
    """Componentwise min/max box around the points; degenerate dims are an error."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.size == 0:
        raise InvalidArgumentError("point set is empty")
    lower = pts.min(axis=0)
    upper = pts.max(axis=0)
    if np.any(lower == upper):
        raise DegenerateBoxError("points are flat along some dimension")
    return Box(lower=lower, upper=upper)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_grid_csv(grid: Grid, path, labels: np.ndarray | None = None) -> None:
    """Grid CSV: `dim,kind,count` header, box rows, then one point per row.

    With `labels` given, each point row gains a trailing +1/-1 label column.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dim", "kind", "count"])
        w.writerow([grid.dim, str(grid.kind), grid.count])
        w.writerow(["lower"] + [_fmt(v) for v in grid.box.lower])
        w.writerow(["upper"] + [_fmt(v) for v in grid.box.upper])
        if labels is None:
            for p in grid.points:
                w.writerow([_fmt(v) for v in p])
        else:
            for p, lab in zip(grid.points, labels):
                w.writerow([_fmt(v) for v in p] + [f"{int(lab):+d}"])


def read_grid_csv(path) -> tuple[Grid, np.ndarray | None]:
    """Inverse of write_grid_csv; returns (grid, labels-or-None)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 5 or rows[0] != ["dim", "kind", "count"]:
        raise InvalidArgumentError(f"{path}: not a grid CSV")
    dim = int(rows[1][0])
    kind = SequenceKind.parse(rows[1][1])
    count = int(rows[1][2])
    if rows[2][0] != "lower" or rows[3][0] != "upper":
        raise InvalidArgumentError(f"{path}: missing box rows")
    box = Box(
        lower=np.array([float(v) for v in rows[2][1:]]),
        upper=np.array([float(v) for v in rows[3][1:]]),
    )
    body = rows[4:]
    if len(body) != count:
        raise InvalidArgumentError(f"{path}: expected {count} point rows, got {len(body)}")
    widths = {len(r) for r in body}
    if widths == {dim}:
        labels = None
    elif widths == {dim + 1}:
        labels = np.array([int(r[-1]) for r in body], dtype=np.int64)
    else:
        raise InvalidArgumentError(f"{path}: inconsistent row widths")
    points = np.array([[float(v) for v in r[:dim]] for r in body])
    return Grid(box=box, kind=kind, points=points), labels
