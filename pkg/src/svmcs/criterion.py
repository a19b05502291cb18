"""Membership tests that label parameter points +1 (inside) or -1 (outside).

Three criteria are provided: the moment-inequality statistic
n * min_{t>=0} (m - t)' V^{-1} (m - t) against a conservative chi-square
cutoff, the OLS confidence ellipsoid, and a synthetic planar region
(circle plus ellipse-minus-diamonds) whose noisy version mimics a
consistent set estimate. Membership is always strict: a point exactly
on the threshold is labeled -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, nnls
from scipy.special import gammainc, ndtri

from .errors import (
    DegenerateTrainingError,
    DuplicatePointError,
    InvalidArgumentError,
    NumericalConditioningError,
    SingularDesignError,
    SolverFailureError,
)
from .grid import Grid, read_grid_csv, write_grid_csv

__all__ = [
    "INSIDE",
    "OUTSIDE",
    "LabeledGrid",
    "MomentCriterion",
    "EllipsoidCriterion",
    "disc_criterion",
    "SyntheticRegion",
    "SyntheticCriterion",
    "DEFAULT_REGION",
    "qhat",
    "critical_value",
    "chi2_quantile",
    "label",
    "label_grid",
    "ols_fit",
    "write_labeled_csv",
    "read_labeled_csv",
]

INSIDE = 1
OUTSIDE = -1


@dataclass(frozen=True)
class LabeledGrid:
    """Grid points together with their +1/-1 labels, in grid order."""

    grid: Grid
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if labels.shape != (self.grid.count,):
            raise InvalidArgumentError("labels must align one-to-one with grid points")
        if not np.all(np.isin(labels, (INSIDE, OUTSIDE))):
            raise InvalidArgumentError("labels must be +1 or -1")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    @property
    def count(self) -> int:
        return self.grid.count

    @property
    def n_inside(self) -> int:
        """l1, the number of +1 examples."""
        return int(np.sum(self.labels == INSIDE))

    @property
    def n_outside(self) -> int:
        """l0, the number of -1 examples."""
        return int(np.sum(self.labels == OUTSIDE))

    def require_both_classes(self) -> None:
        if self.n_inside == 0 or self.n_outside == 0:
            raise DegenerateTrainingError("both classes must be present")


def chi2_quantile(df: int, prob: float) -> float:
    """Inverse chi-square CDF, accurate to ~1e-12.

    Wilson-Hilferty start, then bracketed root finding on the regularized
    incomplete gamma.
    """
    if df < 1:
        raise InvalidArgumentError("df must be >= 1")
    if not 0.0 < prob < 1.0:
        raise InvalidArgumentError("prob must lie strictly in (0, 1)")
    k = float(df)

    def cdf_minus_p(x: float) -> float:
        return gammainc(k / 2.0, x / 2.0) - prob

    z = ndtri(prob)
    x0 = k * (1.0 - 2.0 / (9.0 * k) + z * np.sqrt(2.0 / (9.0 * k))) ** 3
    lo = max(x0, 1e-8)
    hi = max(x0, 1e-8)
    while cdf_minus_p(lo) > 0.0:
        lo /= 2.0
    while cdf_minus_p(hi) < 0.0:
        hi = hi * 2.0 + 1.0
    return float(brentq(cdf_minus_p, lo, hi, xtol=1e-12, rtol=8.9e-16))


def critical_value(p: int, alpha: float) -> float:
    """Conservative cutoff for the moment statistic: the full-df chi-square quantile.

    The statistic's chi-bar-square law is bounded above by chi-square with
    all p degrees of freedom, so coverage is at least 1 - alpha.
    """
    if p < 1:
        raise InvalidArgumentError("p must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie strictly in (0, 1)")
    return chi2_quantile(p, 1.0 - alpha)


def _whiten(moments: np.ndarray, cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cov = np.asarray(cov, dtype=np.float64)
    p = moments.size
    if cov.shape != (p, p):
        raise InvalidArgumentError("covariance shape does not match moment vector")
    scale = np.max(np.abs(cov))
    if scale == 0.0 or np.max(np.abs(cov - cov.T)) > 1e-8 * scale:
        raise NumericalConditioningError("covariance must be symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalConditioningError("covariance is not positive definite") from exc
    # A = L^{-1}, b = L^{-1} m, so ||b - A t||^2 = (m - t)' V^{-1} (m - t)
    a_mat = np.linalg.solve(chol, np.eye(p))
    return a_mat, a_mat @ moments


class MomentCriterion:
    """Moment-inequality test: n*Qhat(theta) < chi-square cutoff.

    moment_fn(theta) returns the p sample moments; covariance_fn(theta)
    their p x p sample covariance; n is the sample size behind them.
    """

    def __init__(self, moment_fn, covariance_fn, n: int, alpha: float):
        if n < 1:
            raise InvalidArgumentError("sample size must be >= 1")
        if not 0.0 < alpha < 1.0:
            raise InvalidArgumentError("alpha must lie strictly in (0, 1)")
        self.moment_fn = moment_fn
        self.covariance_fn = covariance_fn
        self.n = int(n)
        self.alpha = float(alpha)
        self._threshold: float | None = None
        self._p: int | None = None

    @property
    def threshold(self) -> float:
        if self._threshold is None:
            if self._p is None:
                raise InvalidArgumentError(
                    "moment count unknown until the criterion is evaluated once"
                )
            self._threshold = critical_value(self._p, self.alpha)
        return self._threshold

    def statistic(self, theta: np.ndarray) -> float:
        return qhat(self, theta)

    def contains(self, theta: np.ndarray) -> bool:
        return self.statistic(theta) < self.threshold


def qhat(criterion: MomentCriterion, theta: np.ndarray) -> float:
    """n times the minimum over t >= 0 of (m - t)' V^{-1} (m - t) at theta.

    Solved as a nonnegative least squares problem on the Cholesky-whitened
    residual (active-set method, iteration cap 30p). Zero exactly when a
    feasible t absorbs the moments, e.g. whenever all moments are >= 0.
    """
    theta = np.asarray(theta, dtype=np.float64)
    m = np.atleast_1d(np.asarray(criterion.moment_fn(theta), dtype=np.float64))
    if criterion._p is None:
        criterion._p = m.size
    cov = criterion.covariance_fn(theta)
    a_mat, b = _whiten(m, cov)
    if np.all(m >= 0.0):
        return 0.0
    try:
        _, rnorm = nnls(a_mat, b, maxiter=30 * m.size)
    except RuntimeError as exc:
        raise SolverFailureError(f"NNLS did not converge: {exc}") from exc
    return criterion.n * float(rnorm) ** 2


@dataclass(frozen=True)
class EllipsoidCriterion:
    """Quadratic-form membership: (theta - center)' precision (theta - center) < threshold."""

    center: np.ndarray
    precision: np.ndarray
    threshold: float

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=np.float64))
        precision = np.asarray(self.precision, dtype=np.float64)
        if precision.shape != (center.size, center.size):
            raise InvalidArgumentError("precision shape does not match center")
        if np.max(np.abs(precision - precision.T)) > 1e-8 * max(np.max(np.abs(precision)), 1e-300):
            raise NumericalConditioningError("precision must be symmetric")
        try:
            np.linalg.cholesky(precision)
        except np.linalg.LinAlgError as exc:
            raise NumericalConditioningError("precision must be positive definite") from exc
        if not self.threshold > 0.0:
            raise InvalidArgumentError("threshold must be positive")
        center.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "precision", precision)

    def statistic(self, theta: np.ndarray) -> float:
        diff = np.asarray(theta, dtype=np.float64) - self.center
        return float(diff @ self.precision @ diff)

    def statistic_many(self, points: np.ndarray) -> np.ndarray:
        diff = np.atleast_2d(points) - self.center
        return np.einsum("ij,jk,ik->i", diff, self.precision, diff)

    def contains(self, theta: np.ndarray) -> bool:
        return self.statistic(theta) < self.threshold

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        return self.statistic_many(points) < self.threshold


def disc_criterion(center, radius: float) -> EllipsoidCriterion:
    """Euclidean ball of the given radius as an ellipsoid criterion."""
    center = np.atleast_1d(np.asarray(center, dtype=np.float64))
    if not radius > 0.0:
        raise InvalidArgumentError("radius must be positive")
    return EllipsoidCriterion(
        center=center, precision=np.eye(center.size) / radius**2, threshold=1.0
    )


@dataclass(frozen=True)
class SyntheticRegion:
    """Planar region: a circle plus an axis-aligned ellipse minus two diamonds.

    The diamonds are L1 balls carved out of the ellipse, giving a
    disconnected region with holes.
    """

    circle_center: tuple[float, float] = (-2.0, -1.6)
    circle_radius: float = 1.15
    ellipse_center: tuple[float, float] = (1.6, 1.4)
    ellipse_axes: tuple[float, float] = (1.9, 1.05)
    diamond_centers: tuple[tuple[float, float], ...] = ((0.85, 1.4), (2.35, 1.4))
    diamond_radius: float = 0.42
    _boundary: np.ndarray = field(default=None, repr=False, compare=False)

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        cc = np.asarray(self.circle_center)
        in_circle = np.sum((pts - cc) ** 2, axis=1) < self.circle_radius**2
        ec = np.asarray(self.ellipse_center)
        ax = np.asarray(self.ellipse_axes)
        in_ellipse = np.sum(((pts - ec) / ax) ** 2, axis=1) < 1.0
        for dc in self.diamond_centers:
            in_diamond = np.sum(np.abs(pts - np.asarray(dc)), axis=1) <= self.diamond_radius
            in_ellipse &= ~in_diamond
        return in_circle | in_ellipse

    def contains(self, theta) -> bool:
        return bool(self.contains_many(np.atleast_2d(theta))[0])

    def boundary_points(self, per_curve: int = 2048) -> np.ndarray:
        """Dense polyline sample of every component boundary curve."""
        if self._boundary is not None and self._boundary.shape[0] == per_curve * (
            2 + len(self.diamond_centers)
        ):
            return self._boundary
        t = np.linspace(0.0, 2.0 * np.pi, per_curve, endpoint=False)
        circ = np.asarray(self.circle_center) + self.circle_radius * np.stack(
            [np.cos(t), np.sin(t)], axis=1
        )
        ell = np.asarray(self.ellipse_center) + np.asarray(self.ellipse_axes) * np.stack(
            [np.cos(t), np.sin(t)], axis=1
        )
        curves = [circ, ell]
        u = np.linspace(-1.0, 1.0, per_curve // 4, endpoint=False)
        for dc in self.diamond_centers:
            r = self.diamond_radius
            quarters = np.concatenate(
                [
                    np.stack([u * r, (1.0 - np.abs(u)) * r], axis=1),
                    np.stack([u * r, -(1.0 - np.abs(u)) * r], axis=1),
                ]
            )
            curves.append(np.asarray(dc) + quarters)
        boundary = np.concatenate(curves)
        object.__setattr__(self, "_boundary", boundary)
        return boundary

    def boundary_distance_many(self, points: np.ndarray) -> np.ndarray:
        """Distance to the nearest component boundary curve (polyline approximation)."""
        from scipy.spatial import cKDTree

        tree = cKDTree(self.boundary_points())
        dist, _ = tree.query(np.atleast_2d(points))
        return dist

    def diameter(self) -> float:
        bnd = self.boundary_points(per_curve=256)
        from scipy.spatial.distance import pdist

        return float(pdist(bnd).max())


DEFAULT_REGION = SyntheticRegion()


def _perturb_region(region: SyntheticRegion, scale: float, seed: int) -> SyntheticRegion:
    rng = np.random.Generator(np.random.Philox(key=seed))
    z = rng.standard_normal(12)
    cc = np.asarray(region.circle_center) + scale * z[0:2]
    cr = max(region.circle_radius + scale * z[2], 0.05 * region.circle_radius)
    ec = np.asarray(region.ellipse_center) + scale * z[3:5]
    ax = np.maximum(
        np.asarray(region.ellipse_axes) + scale * z[5:7],
        0.05 * np.asarray(region.ellipse_axes),
    )
    dcs = tuple(
        tuple(np.asarray(dc) + scale * z[7 + 2 * i : 9 + 2 * i])
        for i, dc in enumerate(region.diamond_centers)
    )
    dr = max(region.diamond_radius + scale * z[11], 0.05 * region.diamond_radius)
    return SyntheticRegion(
        circle_center=tuple(cc),
        circle_radius=float(cr),
        ellipse_center=tuple(ec),
        ellipse_axes=tuple(ax),
        diamond_centers=dcs,
        diamond_radius=float(dr),
    )


class SyntheticCriterion:
    """Noisy estimate of a known planar region.

    The estimated region perturbs every shape parameter of the true region
    by noise_scale times a seeded standard normal draw; with noise_scale 0
    the estimate coincides with the truth. Labels come from the estimate,
    the exact region stays available for scoring.
    """

    def __init__(self, region: SyntheticRegion = DEFAULT_REGION, noise_scale: float = 0.0,
                 seed: int = 0):
        if noise_scale < 0.0:
            raise InvalidArgumentError("noise_scale must be >= 0")
        self.true_region = region
        self.noise_scale = float(noise_scale)
        self.seed = int(seed)
        if noise_scale == 0.0:
            self.estimated_region = region
        else:
            self.estimated_region = _perturb_region(region, self.noise_scale, self.seed)

    @staticmethod
    def noise_scale_for(n: int, region: SyntheticRegion = DEFAULT_REGION) -> float:
        """Vanishing noise rule 0.2 * diameter / sqrt(n)."""
        if n < 1:
            raise InvalidArgumentError("sample size must be >= 1")
        return 0.2 * region.diameter() / np.sqrt(n)

    def contains(self, theta) -> bool:
        return self.estimated_region.contains(theta)

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        return self.estimated_region.contains_many(points)

    def true_labels(self, points: np.ndarray) -> np.ndarray:
        return np.where(self.true_region.contains_many(points), INSIDE, OUTSIDE)


def label(criterion, theta) -> int:
    """+1 when the criterion's statistic falls strictly below its threshold, else -1."""
    return INSIDE if criterion.contains(theta) else OUTSIDE


def label_grid(criterion, grid: Grid) -> LabeledGrid:
    """Label every grid point; order-stable regardless of evaluation strategy."""
    if hasattr(criterion, "contains_many"):
        labels = np.where(criterion.contains_many(grid.points), INSIDE, OUTSIDE)
        return LabeledGrid(grid=grid, labels=labels)
    labels = np.empty(grid.count, dtype=np.int64)
    for i, theta in enumerate(grid.points):
        try:
            labels[i] = label(criterion, theta)
        except Exception as exc:
            raise type(exc)(f"labeling failed at grid index {i}: {exc}") from exc
    return LabeledGrid(grid=grid, labels=labels)


def ols_fit(x_mat: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients and their covariance s^2 (X'X)^{-1}."""
    x_mat = np.asarray(x_mat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x_mat.ndim != 2 or y.shape != (x_mat.shape[0],):
        raise InvalidArgumentError("X must be n x k and y length n")
    n, k = x_mat.shape
    if n <= k:
        raise InvalidArgumentError("need more observations than regressors")
    beta, _, rank, _ = np.linalg.lstsq(x_mat, y, rcond=None)
    if rank < k:
        raise SingularDesignError("design matrix is rank deficient")
    resid = y - x_mat @ beta
    s2 = float(resid @ resid) / (n - k)
    cov = s2 * np.linalg.inv(x_mat.T @ x_mat)
    return beta, cov


def write_labeled_csv(data: LabeledGrid, path) -> None:
    """LabeledGrid CSV: grid columns plus a trailing +1/-1 label column."""
    write_grid_csv(data.grid, path, labels=data.labels)


def read_labeled_csv(path) -> LabeledGrid:
    grid, labels = read_grid_csv(path)
    if labels is None:
        raise InvalidArgumentError(f"{path}: no label column")
    return LabeledGrid(grid=grid, labels=labels)
