"""Command-line front end.

Verbs: generate, label, train, predict, refine, experiment synthetic,
experiment ols. Grids and labels travel as CSV, classifiers as versioned
JSON, experiment outputs as CSV (plus SVG in 2-D). Exit codes: 0 on
success, 2 for invalid configuration or arguments, 3 for solver
failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .criterion import (
    EllipsoidCriterion,
    SyntheticCriterion,
    disc_criterion,
    label_grid,
    read_labeled_csv,
    write_labeled_csv,
)
from .errors import (
    InvalidArgumentError,
    NumericalConditioningError,
    SolverFailureError,
)
from .experiments import (
    DenseReport,
    OlsConfig,
    SyntheticConfig,
    classify_dense,
    run_ols,
    run_synthetic,
)
from .grid import Box, SequenceKind, generate, read_grid_csv, write_grid_csv
from .refine import RefineConfig, refine
from .svm import KernelParams, load_classifier, save_classifier, train
from .tuning import auto_sigma

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _parse_box(text: str) -> Box:
    """Box flag format: one `lo:hi` pair per dimension, comma separated."""
    lows, highs = [], []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise InvalidArgumentError(
                f"bad box {text!r}; expected lo:hi pairs like '-2:2,-2:2'"
            )
        lows.append(float(lo))
        highs.append(float(hi))
    return Box(lower=np.array(lows), upper=np.array(highs))


def _parse_criterion_file(path: str):
    """Key-value criterion config: `type = ...` plus type-specific parameters.

    Supported types: `disc` (center, radius), `ellipsoid` (center,
    precision rows separated by ';', threshold), `synthetic` (noise_scale,
    seed). Moment criteria need callables and are API-only.
    """
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise InvalidArgumentError(f"{path}: bad line {raw!r}")
        values[key.strip().lower()] = val.strip()
    kind = values.get("type")
    if kind == "disc":
        return disc_criterion(
            center=np.array([float(v) for v in values["center"].split()]),
            radius=float(values["radius"]),
        )
    if kind == "ellipsoid":
        rows = [
            [float(v) for v in row.split()]
            for row in values["precision"].split(";")
        ]
        return EllipsoidCriterion(
            center=np.array([float(v) for v in values["center"].split()]),
            precision=np.array(rows),
            threshold=float(values["threshold"]),
        )
    if kind == "synthetic":
        return SyntheticCriterion(
            noise_scale=float(values.get("noise_scale", "0")),
            seed=int(values.get("seed", "0")),
        )
    raise InvalidArgumentError(
        f"{path}: unknown criterion type {kind!r} (expected disc, ellipsoid, or synthetic)"
    )


def _cmd_generate(args) -> int:
    kind = SequenceKind.parse(
        f"montecarlo:{args.seed}" if args.kind == "montecarlo" else args.kind
    )
    grid = generate(kind, _parse_box(args.box), args.count)
    write_grid_csv(grid, args.out)
    print(f"wrote {grid.count} {kind} points in d={grid.dim} to {args.out}")
    return EXIT_OK


def _cmd_label(args) -> int:
    grid, _ = read_grid_csv(args.grid)
    criterion = _parse_criterion_file(args.criterion)
    data = label_grid(criterion, grid)
    write_labeled_csv(data, args.out)
    print(
        f"labeled {data.count} points: {data.n_inside} inside, "
        f"{data.n_outside} outside -> {args.out}"
    )
    return EXIT_OK


def _cmd_train(args) -> int:
    data = read_labeled_csv(args.data)
    if args.auto_tune:
        params = auto_sigma(data)
    elif args.sigma2 is not None:
        params = KernelParams(sigma2=args.sigma2, c=args.c)
    else:
        raise InvalidArgumentError("pass --sigma2 or --auto-tune")
    clf = train(data, params)
    save_classifier(clf, args.out)
    print(
        f"trained on {data.count} points: {clf.n_support} support vectors, "
        f"sigma2={params.sigma2:.6g}, C={params.c:.6g} -> {args.out}"
    )
    return EXIT_OK


def _cmd_predict(args) -> int:
    clf = load_classifier(args.classifier)
    grid, _ = read_grid_csv(args.grid)
    _, report = classify_dense(clf, grid, out_path=args.out)
    print(f"classified {report.n_points} points -> {args.out}")
    print(f"predicted inside: {report.n_inside}")
    if report.inside_lower is not None:
        lo = " ".join(format(v, ".6g") for v in report.inside_lower)
        hi = " ".join(format(v, ".6g") for v in report.inside_upper)
        print(f"inside bounding box: lower [{lo}] upper [{hi}]")
    print(
        f"prediction time: {report.predict_seconds:.3f} s total, "
        f"{report.per_point_seconds * 1e6:.2f} us/point"
    )
    if report.extrapolation:
        print(
            "warning: grid lies outside the support vectors' box; "
            "predictions reduce to the bias sign",
            file=sys.stderr,
        )
    return EXIT_OK


def _cmd_refine(args) -> int:
    data = read_labeled_csv(args.data)
    criterion = _parse_criterion_file(args.criterion)
    config = RefineConfig(
        radius=args.radius,
        max_iterations=args.max_iterations,
        point_budget=args.point_budget,
        min_insert_distance=args.min_insert_distance,
    )
    result = refine(data, criterion, config)
    write_labeled_csv(result.data, args.out)
    note = " (truncated by point budget)" if result.truncated else ""
    print(
        f"refined {data.count} -> {result.data.count} points in "
        f"{result.iterations_run} iterations{note} -> {args.out}"
    )
    return EXIT_OK


def _cmd_experiment_synthetic(args) -> int:
    kind = None
    if args.kind is not None:
        kind = SequenceKind.parse(
            f"montecarlo:{args.seed}" if args.kind == "montecarlo" else args.kind
        )
    config = SyntheticConfig(
        n=args.n,
        seed=args.seed,
        kind=kind,
        grid_count=args.count,
        noise_scale=args.noise_scale,
        sigma2=args.sigma2,
        c=args.c,
        auto_tune=args.auto_tune,
        out_dir=args.out,
        svg=not args.no_svg,
    )
    report, _, _, _ = run_synthetic(config)
    print(
        f"grid {report.training_size}, training accuracy "
        f"{report.train_accuracy:.4f}, accuracy vs true region "
        f"{report.test_accuracy:.4f} -> {args.out}"
    )
    return EXIT_OK


def _cmd_experiment_ols(args) -> int:
    config = OlsConfig(
        n=args.n,
        splits=tuple(float(s) for s in args.split.split(",")),
        iterations=args.iters,
        seed=args.seed,
        grid_count=args.count,
        sigma2=args.sigma2,
        c=args.c,
        out_dir=args.out,
    )
    reports = run_ols(config)
    print("training,test,test_accuracy,capture_rate")
    for rep in reports:
        print(
            f"{rep.training_size},{rep.test_size},"
            f"{rep.test_accuracy:.4f},{rep.capture_rate:.4f}"
        )
    print(f"table written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svmcs",
        description="Confidence-set grids, labeling, and SVM classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an equidistributed grid CSV")
    p.add_argument("--kind", default="sobol",
                   choices=["sobol", "weyl", "baker", "montecarlo"])
    p.add_argument("--box", required=True, help="per-dimension lo:hi pairs, e.g. '-2:2,-2:2'")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("label", help="label a grid CSV with a criterion config")
    p.add_argument("--grid", required=True)
    p.add_argument("--criterion", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("train", help="train a classifier on a labeled CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--sigma2", type=float, default=None)
    p.add_argument("--c", type=float, default=10.0)
    p.add_argument("--auto-tune", action="store_true",
                   help="perfect-fit tuning from the training data")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="classify a dense grid with a saved classifier")
    p.add_argument("--classifier", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("refine", help="insert labeled midpoints along the boundary")
    p.add_argument("--data", required=True)
    p.add_argument("--criterion", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--max-iterations", type=int, default=10)
    p.add_argument("--point-budget", type=int, default=100_000)
    p.add_argument("--min-insert-distance", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_refine)

    exp = sub.add_parser("experiment", help="run a simulation study")
    exp_sub = exp.add_subparsers(dest="experiment", required=True)

    p = exp_sub.add_parser("synthetic", help="planar region estimation study")
    p.add_argument("--n", type=int, default=1000, help="sample size driving grid and noise")
    p.add_argument("--kind", default=None,
                   choices=["sobol", "weyl", "baker", "montecarlo"])
    p.add_argument("--count", type=int, default=None, help="override the grid-size rule")
    p.add_argument("--noise-scale", type=float, default=None)
    p.add_argument("--sigma2", type=float, default=None)
    p.add_argument("--c", type=float, default=10.0)
    p.add_argument("--auto-tune", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-svg", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_experiment_synthetic)

    p = exp_sub.add_parser("ols", help="OLS confidence ellipsoid study")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--count", type=int, default=8000,
                   help="grid cardinality (paper scale comes from the log-exponential rule)")
    p.add_argument("--split", default="0.05,0.2,0.5,0.8",
                   help="comma-separated training fractions")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--sigma2", type=float, default=None)
    p.add_argument("--c", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_experiment_ols)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidArgumentError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverFailureError, NumericalConditioningError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
