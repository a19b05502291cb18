"""Soft-margin kernel support vector classifier.

Training solves the box-constrained dual

    max  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0

by sequential minimal optimization with second-order working-set
selection. Kernel rows are produced on demand through an LRU cache so
the full Gram matrix never has to fit in memory. The sign convention is
sgn(0) = -1 everywhere, so the classifier is never more liberal than the
strict membership test that produced the labels.
"""

from __future__ import annotations

import json
import time
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .criterion import INSIDE, OUTSIDE, LabeledGrid
from .errors import (
    ClassifierFormatError,
    InvalidArgumentError,
    SolverFailureError,
)
from .grid import Grid

__all__ = [
    "KernelParams",
    "DualSolution",
    "TrainedClassifier",
    "SimplifiedClassifier",
    "rbf_kernel",
    "polynomial_kernel",
    "train",
    "decision_value",
    "predict",
    "simplified_decision",
    "batch_predict",
    "save_classifier",
    "load_classifier",
]

_FORMAT_NAME = "svmcs-classifier"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class KernelParams:
    """RBF bandwidth sigma^2 and soft-margin trade-off C."""

    sigma2: float
    c: float

    def __post_init__(self):
        if not self.sigma2 > 0.0 or not np.isfinite(self.sigma2):
            raise InvalidArgumentError("sigma2 must be positive and finite")
        if not self.c > 0.0:
            raise InvalidArgumentError("C must be positive")


@dataclass(frozen=True)
class DualSolution:
    """Dual weights, bias, and the indices with strictly positive weight."""

    alphas: np.ndarray
    bias: float
    support_indices: np.ndarray
    iterations: int
    converged: bool


def rbf_kernel(u: np.ndarray, v: np.ndarray, sigma2: float) -> float:
    """Gaussian kernel exp(-||u - v||^2 / (2 sigma^2))."""
    if not sigma2 > 0.0:
        raise InvalidArgumentError("sigma2 must be positive")
    diff = np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64)
    return float(np.exp(-np.dot(diff, diff) / (2.0 * sigma2)))


def polynomial_kernel(u: np.ndarray, v: np.ndarray, degree: int = 3) -> float:
    """(u . v + 1)^degree. Not used by the pipeline; kept for completeness."""
    if degree < 1:
        raise InvalidArgumentError("degree must be >= 1")
    return float((np.dot(u, v) + 1.0) ** degree)


def _rbf_cross(points: np.ndarray, others: np.ndarray, sigma2: float) -> np.ndarray:
    """Kernel block K[i, j] = k(points[i], others[j]), computed via one GEMM."""
    p_sq = np.einsum("ij,ij->i", points, points)
    o_sq = np.einsum("ij,ij->i", others, others)
    d2 = p_sq[:, None] + o_sq[None, :] - 2.0 * (points @ others.T)
    np.maximum(d2, 0.0, out=d2)
    d2 *= -1.0 / (2.0 * sigma2)
    return np.exp(d2, out=d2)


class _KernelRowCache:
    """LRU cache of Gram rows, bounded by a byte budget."""

    def __init__(self, points: np.ndarray, sigma2: float, max_bytes: int):
        self.points = points
        self.sq = np.einsum("ij,ij->i", points, points)
        self.inv = 1.0 / (2.0 * sigma2)
        n = points.shape[0]
        self.max_rows = max(2, int(max_bytes // (8 * n)))
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        d2 = self.sq + self.sq[i] - 2.0 * (self.points @ self.points[i])
        np.maximum(d2, 0.0, out=d2)
        d2 *= -self.inv
        row = np.exp(d2, out=d2)
        row[i] = 1.0
        self._rows[i] = row
        if len(self._rows) > self.max_rows:
            self._rows.popitem(last=False)
        return row


def _full_gradient(x: np.ndarray, y: np.ndarray, alpha: np.ndarray, sigma2: float,
                   chunk: int = 8192) -> np.ndarray:
    """Recompute G = Qa - e from scratch using only the nonzero alphas."""
    sv = np.flatnonzero(alpha > 0.0)
    grad = np.full(x.shape[0], -1.0)
    if sv.size == 0:
        return grad
    weights = alpha[sv] * y[sv]
    sv_pts = np.ascontiguousarray(x[sv])
    for start in range(0, x.shape[0], chunk):
        block = x[start : start + chunk]
        grad[start : start + chunk] += y[start : start + chunk] * (
            _rbf_cross(block, sv_pts, sigma2) @ weights
        )
    return grad


def train(
    data: LabeledGrid,
    params: KernelParams,
    *,
    tol: float = 1e-6,
    max_iter: int = 10_000_000,
    cache_mb: int = 256,
    shrink_every: int = 1000,
) -> "TrainedClassifier":
    """Fit the dual RBF classifier on a labeled grid.

    Converges to KKT gap <= tol; raises SolverFailureError if the pair-update
    cap is hit first. Bound variables that cannot re-enter a violating pair
    are periodically shrunk out of the working set; apparent convergence on
    the shrunken set triggers a full-gradient recheck before the solver
    accepts it. The bias is the average of -y * gradient over the margin
    support vectors (0 < alpha < C), the numerically stable choice.
    """
    data.require_both_classes()
    n = data.count
    x = data.points
    y = data.labels.astype(np.float64)
    c = params.c
    cache = _KernelRowCache(x, params.sigma2, cache_mb * (1 << 20))
    tau = 1e-12

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - e'a

    # compact views over the active set
    act = np.arange(n)
    y_a = y.copy()
    alpha_a = alpha.copy()
    grad_a = grad.copy()
    shrunk = False

    def sync_full() -> None:
        alpha[act] = alpha_a
        grad[act] = grad_a

    def recompact(keep: np.ndarray) -> None:
        nonlocal act, y_a, alpha_a, grad_a
        act = act[keep]
        y_a = y_a[keep]
        alpha_a = alpha_a[keep]
        grad_a = grad_a[keep]

    iterations = 0
    converged = False
    while iterations < max_iter:
        pos = y_a > 0
        minus_yg = -y_a * grad_a
        up = np.where(pos, alpha_a < c, alpha_a > 0.0)
        low = np.where(pos, alpha_a > 0.0, alpha_a < c)
        up_vals = np.where(up, minus_yg, -np.inf)
        i = int(np.argmax(up_vals))
        m_up = up_vals[i]
        low_vals = np.where(low, minus_yg, np.inf)
        m_low = float(np.min(low_vals))

        if m_up - m_low <= tol:
            if not shrunk:
                converged = True
                break
            # apparent convergence on the shrunken set: recheck everything
            sync_full()
            grad[:] = _full_gradient(x, y, alpha, params.sigma2)
            act = np.arange(n)
            y_a = y.copy()
            alpha_a = alpha.copy()
            grad_a = grad.copy()
            shrunk = False
            continue

        if iterations % shrink_every == shrink_every - 1 and act.size > 64:
            at_bound = ~(up & low)
            keep = ~(at_bound & ((up & (minus_yg < m_low)) | (low & (minus_yg > m_up))))
            if np.count_nonzero(keep) >= 64 and not np.all(keep):
                sync_full()
                recompact(keep)
                shrunk = True
                continue

        k_i_full = cache.row(int(act[i]))
        k_i = k_i_full[act]
        # second-order choice of j among I_low with -y_j g_j < m_up
        b_vec = m_up - low_vals
        mask = b_vec > 0.0
        if not np.any(mask):
            converged = True
            break
        a_vec = np.maximum(2.0 - 2.0 * k_i, tau)
        score = np.where(mask, -(b_vec * b_vec) / a_vec, np.inf)
        j = int(np.argmin(score))

        k_j_full = cache.row(int(act[j]))
        k_j = k_j_full[act]
        old_ai = alpha_a[i]
        old_aj = alpha_a[j]
        quad = max(2.0 - 2.0 * k_i[j], tau)
        if y_a[i] != y_a[j]:
            delta = (-grad_a[i] - grad_a[j]) / quad
            diff = old_ai - old_aj
            ai = old_ai + delta
            aj = old_aj + delta
            if diff > 0.0:
                if aj < 0.0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0.0:
                    ai = 0.0
                    aj = -diff
            if diff > 0.0:
                if ai > c:
                    ai = c
                    aj = c - diff
            else:
                if aj > c:
                    aj = c
                    ai = c + diff
        else:
            delta = (grad_a[i] - grad_a[j]) / quad
            total = old_ai + old_aj
            ai = old_ai - delta
            aj = old_aj + delta
            if total > c:
                if ai > c:
                    ai = c
                    aj = total - c
            else:
                if aj < 0.0:
                    aj = 0.0
                    ai = total
            if total > c:
                if aj > c:
                    aj = c
                    ai = total - c
            else:
                if ai < 0.0:
                    ai = 0.0
                    aj = total
        alpha_a[i] = ai
        alpha_a[j] = aj

        d_i = (ai - old_ai) * y_a[i]
        d_j = (aj - old_aj) * y_a[j]
        grad_a += (d_i * k_i + d_j * k_j) * y_a
        iterations += 1

    if not converged:
        raise SolverFailureError(
            f"SMO did not reach KKT gap {tol} within {max_iter} pair updates"
        )
    sync_full()
    if shrunk:
        grad[:] = _full_gradient(x, y, alpha, params.sigma2)

    pos = y > 0
    minus_yg = -y * grad
    free = (alpha > 0.0) & (alpha < c)
    if np.any(free):
        bias = float(np.mean(minus_yg[free]))
    else:
        up = np.where(pos, alpha < c, alpha > 0.0)
        low = np.where(pos, alpha > 0.0, alpha < c)
        hi = float(np.max(np.where(up, minus_yg, -np.inf)))
        lo = float(np.min(np.where(low, minus_yg, np.inf)))
        bias = 0.5 * (hi + lo)

    support = np.flatnonzero(alpha > 0.0)
    solution = DualSolution(
        alphas=alpha,
        bias=bias,
        support_indices=support,
        iterations=iterations,
        converged=True,
    )
    return TrainedClassifier(
        params=params,
        bias=bias,
        sv_points=np.ascontiguousarray(x[support]),
        sv_labels=data.labels[support].copy(),
        sv_alphas=alpha[support].copy(),
        n_training=n,
        training=data,
        solution=solution,
    )


@dataclass(frozen=True)
class TrainedClassifier:
    """Decision function sum_i alpha_i y_i K(x_i, .) + b over the support vectors.

    `training` and `solution` carry the full fit for diagnostics; a
    classifier loaded from disk holds only the support vectors.
    """

    params: KernelParams
    bias: float
    sv_points: np.ndarray
    sv_labels: np.ndarray
    sv_alphas: np.ndarray
    n_training: int
    training: LabeledGrid | None = None
    solution: DualSolution | None = None

    @property
    def dim(self) -> int:
        return self.sv_points.shape[1]

    @property
    def n_support(self) -> int:
        return self.sv_points.shape[0]

    def decision_values(self, points: np.ndarray, chunk: int = 8192) -> np.ndarray:
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        if pts.shape[1] != self.dim:
            raise InvalidArgumentError(
                f"points have dimension {pts.shape[1]}, classifier expects {self.dim}"
            )
        weights = self.sv_alphas * self.sv_labels
        out = np.empty(pts.shape[0])
        for start in range(0, pts.shape[0], chunk):
            block = pts[start : start + chunk]
            out[start : start + chunk] = (
                _rbf_cross(block, self.sv_points, self.params.sigma2) @ weights
            )
        out += self.bias
        return out


def decision_value(clf: TrainedClassifier, theta: np.ndarray) -> float:
    """Real-valued decision function at one point, before taking the sign."""
    return float(clf.decision_values(np.atleast_2d(theta))[0])


def _sign_labels(values: np.ndarray) -> np.ndarray:
    # sgn(0) = -1: only strictly positive decision values are inside
    return np.where(values > 0.0, INSIDE, OUTSIDE)


def predict(clf: TrainedClassifier, theta: np.ndarray) -> int:
    return int(_sign_labels(np.array([decision_value(clf, theta)]))[0])


@dataclass(frozen=True)
class SimplifiedClassifier:
    """Kernel-only vote sum_i y_i K(s_i, .) with unit weights and zero bias.

    This is the decision rule whose asymptotics the bandwidth bounds in
    the tuning module control, available without any dual training.
    """

    data: LabeledGrid
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0.0:
            raise InvalidArgumentError("sigma2 must be positive")

    @property
    def dim(self) -> int:
        return self.data.grid.dim

    def decision_values(self, points: np.ndarray, chunk: int = 8192) -> np.ndarray:
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        if pts.shape[1] != self.dim:
            raise InvalidArgumentError(
                f"points have dimension {pts.shape[1]}, classifier expects {self.dim}"
            )
        weights = self.data.labels.astype(np.float64)
        out = np.empty(pts.shape[0])
        for start in range(0, pts.shape[0], chunk):
            block = pts[start : start + chunk]
            out[start : start + chunk] = (
                _rbf_cross(block, self.data.points, self.sigma2) @ weights
            )
        return out


def simplified_decision(data: LabeledGrid, sigma2: float, theta: np.ndarray) -> int:
    """Sign (with sgn(0) = -1) of the unit-weight kernel vote at theta."""
    clf = SimplifiedClassifier(data=data, sigma2=sigma2)
    return int(_sign_labels(clf.decision_values(np.atleast_2d(theta)))[0])


def batch_predict(model, grid: Grid, chunk: int = 8192) -> np.ndarray:
    """Labels for every grid point, in grid order.

    `model` is a TrainedClassifier or SimplifiedClassifier; anything with
    a decision_values method works.
    """
    return _sign_labels(model.decision_values(grid.points, chunk=chunk))


def timed_batch_predict(model, grid: Grid, chunk: int = 8192) -> tuple[np.ndarray, float]:
    """batch_predict plus wall-clock seconds, for throughput reporting."""
    start = time.perf_counter()
    labels = batch_predict(model, grid, chunk=chunk)
    return labels, time.perf_counter() - start


def save_classifier(clf: TrainedClassifier, path) -> None:
    """Versioned JSON with kernel params, support vectors, weights, and bias.

    Floats are written with repr round-trip fidelity, so a reloaded
    classifier reproduces decision values bit for bit.
    """
    payload = {
        "format": _FORMAT_NAME,
        "version": _FORMAT_VERSION,
        "kernel": {"sigma2": clf.params.sigma2, "c": clf.params.c},
        "bias": clf.bias,
        "dim": clf.dim,
        "n_training": clf.n_training,
        "support_points": clf.sv_points.tolist(),
        "support_labels": clf.sv_labels.tolist(),
        "support_alphas": clf.sv_alphas.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_classifier(path) -> TrainedClassifier:
    with open(path) as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != _FORMAT_NAME:
        raise ClassifierFormatError(f"{path}: not a classifier file")
    if payload.get("version") != _FORMAT_VERSION:
        raise ClassifierFormatError(
            f"{path}: unsupported version {payload.get('version')!r}"
        )
    return TrainedClassifier(
        params=KernelParams(
            sigma2=payload["kernel"]["sigma2"], c=payload["kernel"]["c"]
        ),
        bias=float(payload["bias"]),
        sv_points=np.asarray(payload["support_points"], dtype=np.float64),
        sv_labels=np.asarray(payload["support_labels"], dtype=np.int64),
        sv_alphas=np.asarray(payload["support_alphas"], dtype=np.float64),
        n_training=int(payload["n_training"]),
    )
