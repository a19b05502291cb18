"""Admissible tuning for the classifier.

Two regimes are covered. The perfect-fit regime takes sigma far below
the smallest pairwise distance and C above l0/(l0+l1), which makes the
trained classifier reproduce every training label. The dominance regime
bounds 2*sigma^2 so that the kernel influence of the nearest same-label
grid point beats the combined influence of every opposite-label point,
which is what lets the simplified kernel vote agree with the membership
test point by point.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .criterion import INSIDE, OUTSIDE, LabeledGrid
from .errors import (
    DegenerateTrainingError,
    EmptyIntervalError,
    InvalidArgumentError,
)
from .grid import min_pairwise_distance
from .svm import KernelParams

__all__ = [
    "BoundSource",
    "SigmaBound",
    "NearestPair",
    "c_lower_bound",
    "auto_sigma",
    "nearest_pair",
    "sigma_bound_interior",
    "sigma_bound_exterior",
    "admissible_sigma",
]


class BoundSource(enum.Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class SigmaBound:
    """Open upper bound on 2*sigma^2; math.inf when any bandwidth works."""

    upper_2sigma2: float
    source: BoundSource

    def __post_init__(self):
        if not self.upper_2sigma2 > 0.0:
            raise InvalidArgumentError("bound must be positive")


@dataclass(frozen=True)
class NearestPair:
    """Distances from a point to its nearest +1 and -1 grid points, with class sizes."""

    interior_dist: float
    exterior_dist: float
    n_interior: int
    n_exterior: int

    def __post_init__(self):
        if self.interior_dist < 0.0 or self.exterior_dist < 0.0:
            raise InvalidArgumentError("distances must be nonnegative")
        if self.n_interior < 1 or self.n_exterior < 1:
            raise InvalidArgumentError("both classes need at least one point")


def c_lower_bound(l0: int, l1: int) -> float:
    """Threshold l0/(l0+l1) that C must exceed for the perfect-fit regime."""
    if l0 < 1 or l1 < 1:
        raise InvalidArgumentError("class counts must be >= 1")
    if not l0 > l1 + 1 > 2:
        warnings.warn(
            f"class counts l0={l0}, l1={l1} fall outside the l0 > l1+1 > 2 regime "
            "the perfect-fit result assumes",
            stacklevel=2,
        )
    return l0 / (l0 + l1)


def auto_sigma(data: LabeledGrid) -> KernelParams:
    """Perfect-fit tuning: sigma = 0.1 * min pairwise distance, C = max(10, 2*bound)."""
    data.require_both_classes()
    sigma = 0.1 * min_pairwise_distance(data.points)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bound = c_lower_bound(data.n_outside, data.n_inside)
    return KernelParams(sigma2=sigma * sigma, c=max(10.0, 2.0 * bound))


def nearest_pair(theta: np.ndarray, data: LabeledGrid) -> NearestPair:
    """Distances to the nearest +1 and nearest -1 grid points from theta."""
    data.require_both_classes()
    theta = np.asarray(theta, dtype=np.float64)
    dists = np.linalg.norm(data.points - theta, axis=1)
    inside = data.labels == INSIDE
    return NearestPair(
        interior_dist=float(dists[inside].min()),
        exterior_dist=float(dists[~inside].min()),
        n_interior=int(inside.sum()),
        n_exterior=int((~inside).sum()),
    )


def sigma_bound_interior(pair: NearestPair) -> SigmaBound:
    """Bound 2*sigma^2 < (ext^2 - int^2) / ln(n_exterior) for points inside the set.

    Any bandwidth below the bound makes the nearest interior point's kernel
    value exceed n_exterior times the largest exterior kernel value. A
    single exterior point (ln 1 = 0) is dominated at every bandwidth.
    """
    gap = pair.exterior_dist**2 - pair.interior_dist**2
    if gap <= 0.0:
        raise EmptyIntervalError(
            "no admissible bandwidth: nearest exterior point is not farther "
            "than nearest interior point"
        )
    if pair.n_exterior == 1:
        return SigmaBound(upper_2sigma2=math.inf, source=BoundSource.INTERIOR)
    return SigmaBound(
        upper_2sigma2=gap / math.log(pair.n_exterior), source=BoundSource.INTERIOR
    )


def sigma_bound_exterior(pair: NearestPair) -> SigmaBound:
    """Mirror bound 2*sigma^2 < (int^2 - ext^2) / ln(n_interior) for outside points."""
    gap = pair.interior_dist**2 - pair.exterior_dist**2
    if gap <= 0.0:
        raise EmptyIntervalError(
            "no admissible bandwidth: nearest interior point is not farther "
            "than nearest exterior point"
        )
    if pair.n_interior == 1:
        return SigmaBound(upper_2sigma2=math.inf, source=BoundSource.EXTERIOR)
    return SigmaBound(
        upper_2sigma2=gap / math.log(pair.n_interior), source=BoundSource.EXTERIOR
    )


def admissible_sigma(
    data: LabeledGrid,
    probes: np.ndarray | None = None,
    probe_labels: np.ndarray | None = None,
) -> float:
    """sigma^2 making the simplified kernel vote match every probe's label.

    Takes the tightest per-probe dominance bound (interior form for +1
    probes, exterior form for -1 probes), halves it for floating-point
    head room, and returns the corresponding sigma^2. By default the
    training grid probes itself: each point is its own nearest same-label
    point at distance zero, which is the most permissive configuration
    and reproduces the perfect-fit behavior.

    Returns math.inf when every bound is vacuous (any bandwidth works).
    Raises EmptyIntervalError, carrying the probe, when some probe admits
    no bandwidth at all.
    """
    data.require_both_classes()
    if probes is None:
        probes = data.points
        probe_labels = data.labels
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    if probe_labels is None:
        raise InvalidArgumentError("probe_labels required when probes are given")
    probe_labels = np.asarray(probe_labels)
    if probes.shape[0] == 0:
        raise InvalidArgumentError("need at least one probe")
    if probes.shape[0] != probe_labels.size:
        raise InvalidArgumentError("probes and probe_labels must align")

    tightest = math.inf
    for idx, (theta, lab) in enumerate(zip(probes, probe_labels)):
        pair = nearest_pair(theta, data)
        try:
            if lab == INSIDE:
                bound = sigma_bound_interior(pair)
            else:
                bound = sigma_bound_exterior(pair)
        except EmptyIntervalError as exc:
            raise EmptyIntervalError(
                f"probe {idx} admits no bandwidth: {exc}", probe=theta, index=idx
            ) from exc
        tightest = min(tightest, bound.upper_2sigma2)
    if math.isinf(tightest):
        return math.inf
    # 0.5 safety factor on 2*sigma^2 keeps the strict inequalities strict
    two_sigma2 = 0.5 * tightest
    return two_sigma2 / 2.0
