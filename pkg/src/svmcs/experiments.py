"""End-to-end experiment pipelines and their reports.

Two studies mirror the simulation designs the library targets: labeling a
noisy estimate of a known planar region and checking the classifier
against the exact region, and an OLS confidence ellipsoid in five
dimensions with train/test splits of a Monte Carlo grid. Reports are
plain CSV, reproducible byte for byte from (config, seed) apart from the
timing columns; 2-D runs also emit a deterministic SVG scatter.
"""

from __future__ import annotations

import csv
import enum
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .criterion import (
    DEFAULT_REGION,
    INSIDE,
    EllipsoidCriterion,
    LabeledGrid,
    SyntheticCriterion,
    SyntheticRegion,
    chi2_quantile,
    label_grid,
    ols_fit,
    write_labeled_csv,
)
from .errors import DegenerateBoxError, InvalidArgumentError
from .grid import (
    Box,
    Grid,
    SequenceKind,
    generate,
    monte_carlo,
    smallest_enclosing_box,
)
from .svm import (
    KernelParams,
    TrainedClassifier,
    batch_predict,
    train,
)
from .tuning import auto_sigma

__all__ = [
    "GridSizeRule",
    "grid_size_rule",
    "RunReport",
    "SyntheticConfig",
    "OlsConfig",
    "run_synthetic",
    "run_ols",
    "DenseReport",
    "classify_dense",
    "spacing_sigma2",
]


class GridSizeRule(enum.Enum):
    LOG_LINEAR = "log-linear"
    LOG_EXPONENTIAL = "log-exponential"


def grid_size_rule(rule: GridSizeRule, n: int) -> int:
    """Grid cardinality as a function of sample size.

    LOG_LINEAR is round(500 * ln n); LOG_EXPONENTIAL is round(6^(ln n)).
    Rounding is to the nearest integer, halves away from zero.
    """
    if n < 2:
        raise InvalidArgumentError("sample size must be >= 2")
    if rule is GridSizeRule.LOG_LINEAR:
        value = 500.0 * math.log(n)
    elif rule is GridSizeRule.LOG_EXPONENTIAL:
        value = 6.0 ** math.log(n)
    else:
        raise InvalidArgumentError(f"unknown rule {rule!r}")
    return int(math.floor(value + 0.5))


def spacing_sigma2(box: Box, count: int, factor: float = 1.0) -> float:
    """Bandwidth rule sigma = factor * (volume / count)^(1/d), returned as sigma^2."""
    sigma = factor * (box.volume / count) ** (1.0 / box.dim)
    return sigma * sigma


@dataclass(frozen=True)
class RunReport:
    """One pipeline run: sizes, accuracy, capture, timings, inside box."""

    training_size: int
    test_size: int
    test_accuracy: float
    capture_rate: float | None
    train_seconds: float
    predict_seconds: float
    inside_lower: tuple[float, ...] | None
    inside_upper: tuple[float, ...] | None
    train_accuracy: float | None = None

    HEADER = (
        "training_size,test_size,test_accuracy,capture_rate,train_accuracy,"
        "inside_lower,inside_upper,train_seconds,predict_seconds"
    )

    def to_row(self) -> list[str]:
        def vec(v):
            return "" if v is None else " ".join(format(x, ".17g") for x in v)

        def num(v):
            return "" if v is None else format(v, ".17g")

        return [
            str(self.training_size),
            str(self.test_size),
            format(self.test_accuracy, ".17g"),
            num(self.capture_rate),
            num(self.train_accuracy),
            vec(self.inside_lower),
            vec(self.inside_upper),
            format(self.train_seconds, ".6f"),
            format(self.predict_seconds, ".6f"),
        ]


def _inside_box(points: np.ndarray, predicted: np.ndarray):
    inside_pts = points[predicted == INSIDE]
    if inside_pts.shape[0] == 0:
        return None, None
    try:
        box = smallest_enclosing_box(inside_pts)
    except DegenerateBoxError:
        lo = inside_pts.min(axis=0)
        return tuple(lo), tuple(inside_pts.max(axis=0))
    return tuple(box.lower), tuple(box.upper)


def _write_report_csv(path, reports: list[RunReport]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(RunReport.HEADER + "\n")
        writer = csv.writer(fh)
        for rep in reports:
            writer.writerow(rep.to_row())


@dataclass(frozen=True)
class SyntheticConfig:
    """Region-estimation study configuration.

    noise_scale None applies the vanishing rule 0.2 * diameter / sqrt(n);
    sigma2 None applies the grid-spacing bandwidth rule unless auto_tune
    picks the perfect-fit tuning instead.
    """

    n: int = 1000
    seed: int = 0
    kind: SequenceKind | None = None
    box: Box = field(default_factory=lambda: Box(np.array([-4.0, -4.0]), np.array([4.0, 4.0])))
    region: SyntheticRegion = DEFAULT_REGION
    grid_count: int | None = None
    noise_scale: float | None = None
    sigma2: float | None = None
    c: float = 10.0
    auto_tune: bool = False
    out_dir: str | Path | None = None
    svg: bool = True


ERROR_CLASSES = ("inside-correct", "outside-correct", "red-cross", "blue-cross")


def _error_classes(predicted: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """red-cross: predicted inside but truly outside; blue-cross: the reverse miss."""
    out = np.empty(predicted.shape[0], dtype=object)
    out[(predicted == INSIDE) & (truth == INSIDE)] = "inside-correct"
    out[(predicted != INSIDE) & (truth != INSIDE)] = "outside-correct"
    out[(predicted == INSIDE) & (truth != INSIDE)] = "red-cross"
    out[(predicted != INSIDE) & (truth == INSIDE)] = "blue-cross"
    return out


def run_synthetic(config: SyntheticConfig):
    """Label a noisy region estimate on a grid, train, score against the truth.

    Returns (report, criterion, classifier, point_table); when out_dir is
    set, writes points.csv, report.csv and (2-D only) scatter.svg.
    """
    kind = config.kind if config.kind is not None else monte_carlo(config.seed)
    count = (
        config.grid_count
        if config.grid_count is not None
        else grid_size_rule(GridSizeRule.LOG_LINEAR, config.n)
    )
    noise = (
        config.noise_scale
        if config.noise_scale is not None
        else SyntheticCriterion.noise_scale_for(config.n, config.region)
    )
    criterion = SyntheticCriterion(region=config.region, noise_scale=noise, seed=config.seed)
    grid = generate(kind, config.box, count)
    data = label_grid(criterion, grid)
    data.require_both_classes()

    if config.auto_tune:
        params = auto_sigma(data)
    else:
        sigma2 = (
            config.sigma2
            if config.sigma2 is not None
            else spacing_sigma2(config.box, count)
        )
        params = KernelParams(sigma2=sigma2, c=config.c)

    t0 = time.perf_counter()
    clf = train(data, params)
    train_seconds = time.perf_counter() - t0
    t0 = time.perf_counter()
    predicted = batch_predict(clf, grid)
    predict_seconds = time.perf_counter() - t0

    truth = criterion.true_labels(grid.points)
    marks = _error_classes(predicted, truth)
    lo, hi = _inside_box(grid.points, predicted)
    report = RunReport(
        training_size=count,
        test_size=count,
        test_accuracy=float(np.mean(predicted == truth)),
        capture_rate=None,
        train_seconds=train_seconds,
        predict_seconds=predict_seconds,
        inside_lower=lo,
        inside_upper=hi,
        train_accuracy=float(np.mean(predicted == data.labels)),
    )

    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_point_table(out / "points.csv", grid.points, data.labels, truth, predicted, marks)
        _write_report_csv(out / "report.csv", [report])
        if grid.dim == 2 and config.svg:
            _write_scatter_svg(out / "scatter.svg", config.box, grid.points, marks)
    return report, criterion, clf, marks


def _write_point_table(path, points, estimated, truth, predicted, marks) -> None:
    dim = points.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [f"x{i}" for i in range(dim)]
            + ["estimated_label", "true_label", "predicted_label", "error_class"]
        )
        for p, est, tru, pred, mark in zip(points, estimated, truth, predicted, marks):
            writer.writerow(
                [format(v, ".17g") for v in p]
                + [f"{int(est):+d}", f"{int(tru):+d}", f"{int(pred):+d}", mark]
            )


@dataclass(frozen=True)
class OlsConfig:
    """OLS ellipsoid study configuration.

    The paper-scale grid comes from the log-exponential rule (68,534 at
    n=500); the default here is a desk-scale 8,000-point grid. Splits are
    training fractions of the labeled grid; each iteration re-splits at a
    fresh seed while data, grid, and tuning stay fixed.
    """

    n: int = 500
    k: int = 5
    splits: tuple[float, ...] = (0.05, 0.2, 0.5, 0.8)
    iterations: int = 100
    seed: int = 0
    grid_count: int | None = 8000
    box_halfwidth_se: float = 7.0
    sigma2: float | None = None
    sigma_factor: float = 1.0
    c: float = 10.0
    out_dir: str | Path | None = None

    def __post_init__(self):
        if not all(0.0 < f < 1.0 for f in self.splits):
            raise InvalidArgumentError("split fractions must lie strictly in (0, 1)")
        if self.iterations < 1:
            raise InvalidArgumentError("iteration count must be >= 1")


def _stratified_split(rng, labels: np.ndarray, fraction: float):
    """Training indices holding the label proportions (at least one per class)."""
    train_idx = []
    for value in (INSIDE, -INSIDE):
        cls = np.flatnonzero(labels == value)
        take = max(1, int(round(fraction * cls.size)))
        train_idx.append(rng.permutation(cls)[:take])
    mask = np.zeros(labels.size, dtype=bool)
    mask[np.concatenate(train_idx)] = True
    return mask


def run_ols(config: OlsConfig) -> list[RunReport]:
    """Simulate the regression, label the grid by the ellipsoid, sweep the splits.

    One data draw fixes the criterion and the grid; every iteration
    re-splits train/test, fits, and records test accuracy and whether the
    true coefficient vector is predicted inside. Returns one aggregated
    report per split fraction and writes a table-shaped CSV when out_dir
    is set.
    """
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    k = config.k
    beta0 = rng.standard_normal(k)
    x_mat = np.column_stack([np.ones(config.n), rng.standard_normal((config.n, k - 1))])
    y = x_mat @ beta0 + rng.standard_normal(config.n)
    beta_hat, cov = ols_fit(x_mat, y)
    criterion = EllipsoidCriterion(
        center=beta_hat,
        precision=np.linalg.inv(cov),
        threshold=chi2_quantile(k, 0.95),
    )

    se = np.sqrt(np.diag(cov))
    box = Box(
        lower=beta_hat - config.box_halfwidth_se * se,
        upper=beta_hat + config.box_halfwidth_se * se,
    )
    count = (
        config.grid_count
        if config.grid_count is not None
        else grid_size_rule(GridSizeRule.LOG_EXPONENTIAL, config.n)
    )
    grid = generate(monte_carlo(config.seed + 1), box, count)
    data = label_grid(criterion, grid)
    data.require_both_classes()

    sigma2 = (
        config.sigma2
        if config.sigma2 is not None
        else spacing_sigma2(box, count, config.sigma_factor)
    )
    params = KernelParams(sigma2=sigma2, c=config.c)

    split_rng = np.random.Generator(np.random.Philox(key=config.seed + 2))
    reports = []
    for fraction in config.splits:
        accuracies = np.empty(config.iterations)
        captured = np.empty(config.iterations)
        train_time = 0.0
        predict_time = 0.0
        train_sizes = np.empty(config.iterations, dtype=np.int64)
        inside_lo = None
        inside_hi = None
        for it in range(config.iterations):
            mask = _stratified_split(split_rng, data.labels, fraction)
            sub = LabeledGrid(
                grid=Grid(box=box, kind=grid.kind, points=grid.points[mask], validate=False),
                labels=data.labels[mask],
            )
            t0 = time.perf_counter()
            clf = train(sub, params)
            train_time += time.perf_counter() - t0
            t0 = time.perf_counter()
            test_pred = batch_predict(
                clf,
                Grid(box=box, kind=grid.kind, points=grid.points[~mask], validate=False),
            )
            predict_time += time.perf_counter() - t0
            accuracies[it] = np.mean(test_pred == data.labels[~mask])
            captured[it] = float(clf.decision_values(beta0[None, :])[0] > 0.0)
            train_sizes[it] = int(mask.sum())
            if it == 0:
                inside_lo, inside_hi = _inside_box(grid.points[~mask], test_pred)
        reports.append(
            RunReport(
                training_size=int(np.round(train_sizes.mean())),
                test_size=count - int(np.round(train_sizes.mean())),
                test_accuracy=float(accuracies.mean()),
                capture_rate=float(captured.mean()),
                train_seconds=train_time / config.iterations,
                predict_seconds=predict_time / config.iterations,
                inside_lower=inside_lo,
                inside_upper=inside_hi,
            )
        )

    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_report_csv(out / "ols_table.csv", reports)
    return reports


@dataclass(frozen=True)
class DenseReport:
    """Dense-grid classification summary."""

    n_points: int
    n_inside: int
    inside_lower: tuple[float, ...] | None
    inside_upper: tuple[float, ...] | None
    predict_seconds: float
    extrapolation: bool

    @property
    def per_point_seconds(self) -> float:
        return self.predict_seconds / self.n_points


def classify_dense(clf: TrainedClassifier, grid: Grid, out_path=None) -> tuple[np.ndarray, DenseReport]:
    """Batch-predict a dense grid; report the inside bounding box and timing.

    Flags extrapolation when no grid point falls inside the support
    vectors' enclosing box (kernel values vanish there, so predictions
    degenerate to the sign of the bias).
    """
    if grid.dim != clf.dim:
        raise InvalidArgumentError(
            f"grid dimension {grid.dim} does not match classifier dimension {clf.dim}"
        )
    t0 = time.perf_counter()
    predicted = batch_predict(clf, grid)
    predict_seconds = time.perf_counter() - t0
    lo, hi = _inside_box(grid.points, predicted)
    try:
        sv_box = smallest_enclosing_box(clf.sv_points)
        extrapolation = not bool(np.any(sv_box.contains_points(grid.points)))
    except DegenerateBoxError:
        extrapolation = False
    report = DenseReport(
        n_points=grid.count,
        n_inside=int(np.sum(predicted == INSIDE)),
        inside_lower=lo,
        inside_upper=hi,
        predict_seconds=predict_seconds,
        extrapolation=extrapolation,
    )
    if out_path is not None:
        write_labeled_csv(LabeledGrid(grid=grid, labels=predicted), out_path)
    return predicted, report


def _write_scatter_svg(path, box: Box, points: np.ndarray, marks: np.ndarray,
                       size: int = 640) -> None:
    """Deterministic scatter: red/blue dots for correct points, crosses for errors."""
    span = box.widths
    pad = 0.02 * size

    def sx(x):
        return pad + (x - box.lower[0]) / span[0] * (size - 2 * pad)

    def sy(y):
        return size - pad - (y - box.lower[1]) / span[1] * (size - 2 * pad)

    style = {
        "inside-correct": ("#d62728", "dot"),
        "outside-correct": ("#1f77b4", "dot"),
        "red-cross": ("#d62728", "cross"),
        "blue-cross": ("#1f77b4", "cross"),
    }
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    r_dot, r_cross = 1.6, 3.2
    for mark, (color, shape) in style.items():
        sel = points[marks == mark]
        if sel.shape[0] == 0:
            continue
        if shape == "dot":
            body = "".join(
                f'<circle cx="{sx(p[0]):.2f}" cy="{sy(p[1]):.2f}" r="{r_dot}"/>'
                for p in sel
            )
            parts.append(f'<g fill="{color}">{body}</g>')
        else:
            segs = "".join(
                f"M{sx(p[0]) - r_cross:.2f} {sy(p[1]) - r_cross:.2f}"
                f"L{sx(p[0]) + r_cross:.2f} {sy(p[1]) + r_cross:.2f}"
                f"M{sx(p[0]) - r_cross:.2f} {sy(p[1]) + r_cross:.2f}"
                f"L{sx(p[0]) + r_cross:.2f} {sy(p[1]) - r_cross:.2f}"
                for p in sel
            )
            parts.append(
                f'<path stroke="{color}" stroke-width="1.2" fill="none" d="{segs}"/>'
            )
    parts.append("</svg>")
    Path(path).write_text("".join(parts))
