"""Command-line front door.

Four subcommands: `explain` fits one local surrogate at a point,
`stability` repeats it and scores the two indices, `sweep` runs a parameter
grid into a plot-ready table, `generate-data` rebuilds the bundled synthetic
dataset. Machine-readable reports go to --out (or stdout); human summaries
go to stderr, so stdout stays parseable.

Reports deliberately contain no wall-clock values: identical flags plus a
built-in predictor must reproduce a report byte for byte. Timings are
printed on stderr instead.

Exit codes: 0 report written, 2 configuration error, 3 data error,
4 predictor error, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .blackbox import (
    PredictorError,
    builtin_catalog,
    make_predictor,
    predict,
)
from .core import (
    ConfigError,
    DataError,
    Dataset,
    ExplainerConfig,
    FeatureStats,
    load_dataset,
    save_dataset,
    validate_config_for_features,
)
from .datagen import DEFAULT_ROWS, DEFAULT_SEED, generate
from .explainer import Explanation, explain_once, stability_run
from .feature_selection import SelectionError
from .locality import default_kernel_width
from .sampling import derive_repeat_seeds, infer_feature_stats
from .stability import CsiUndefinedError
from .wridge import NumericError, conf_int

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PREDICTOR = 4
EXIT_NUMERIC = 5

SCHEMA_VERSION = 1


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad float list: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list: {text!r}") from None


def _add_point_flags(parser: argparse.ArgumentParser, required: bool) -> None:
    parser.add_argument("--data", required=required, help="training CSV with header row")
    parser.add_argument("--target-col", help="column to split out as the target")
    where = parser.add_mutually_exclusive_group()
    where.add_argument("--row", type=int, help="index of the data row to explain")
    where.add_argument("--point", help="comma-separated feature values to explain")


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--predictor",
        required=True,
        help="builtin:<spec> or cmd:<argv>; builtins: " + ", ".join(sorted(builtin_catalog())),
    )
    parser.add_argument("--predictor-timeout", type=float, default=60.0)
    parser.add_argument("--num-samples", type=_positive_int, default=5000)
    parser.add_argument("--num-features", type=_positive_int, default=7)
    parser.add_argument(
        "--kernel-width",
        type=float,
        default=None,
        help="locality bandwidth in standardized units (default 0.75*sqrt(P))",
    )
    parser.add_argument("--ridge-penalty", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--include-query-point", action="store_true")
    parser.add_argument("--unweighted-selection", action="store_true")
    parser.add_argument("--output", choices=("json", "csv"), default="json")
    parser.add_argument("--out", help="report path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="limestab",
        description="Local surrogate explanations with stability diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"limestab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_explain = sub.add_parser("explain", help="explain one point once")
    _add_point_flags(p_explain, required=True)
    _add_model_flags(p_explain)
    p_explain.set_defaults(func=cmd_explain)

    p_stab = sub.add_parser("stability", help="repeat explanations and score stability")
    _add_point_flags(p_stab, required=True)
    _add_model_flags(p_stab)
    p_stab.add_argument("--repeats", type=_positive_int, default=10)
    p_stab.add_argument("--jobs", type=_positive_int, default=1)
    p_stab.add_argument(
        "--per-repeat-process",
        action="store_true",
        help="spawn a fresh external predictor per repeat instead of sharing one",
    )
    p_stab.set_defaults(func=cmd_stability)

    p_sweep = sub.add_parser("sweep", help="stability over a parameter grid")
    _add_point_flags(p_sweep, required=False)
    _add_model_flags(p_sweep)
    p_sweep.add_argument("--repeats", type=_positive_int, default=10)
    p_sweep.add_argument("--jobs", type=_positive_int, default=1)
    p_sweep.add_argument("--kernel-widths", type=_float_list, default=None)
    p_sweep.add_argument("--ridge-penalties", type=_float_list, default=None)
    p_sweep.add_argument("--num-samples-grid", type=_int_list, default=None)
    p_sweep.add_argument(
        "--dim-grid",
        type=_int_list,
        default=None,
        help="feature-count grid; without --data, cells use standard-normal "
        "features and explain the origin",
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_gen = sub.add_parser("generate-data", help="write the synthetic dataset CSV")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--rows", type=_positive_int, default=DEFAULT_ROWS)
    p_gen.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_gen.set_defaults(func=cmd_generate_data)
    return parser


def _say(text: str) -> None:
    print(text, file=sys.stderr)


def _resolve_point(args: argparse.Namespace, dataset: Dataset) -> np.ndarray:
    P = dataset.num_features
    if args.point is not None:
        try:
            values = [float(v) for v in args.point.split(",")]
        except ValueError:
            raise ConfigError(f"--point must be comma-separated floats, got {args.point!r}")
        if len(values) != P:
            raise ConfigError(f"--point has {len(values)} values, dataset has {P} features")
        return np.array(values, dtype=np.float64)
    if args.row is not None:
        if not 0 <= args.row < dataset.num_rows:
            raise ConfigError(
                f"--row {args.row} out of range [0, {dataset.num_rows - 1}]"
            )
        return np.array(dataset.rows[args.row])
    raise ConfigError("one of --row or --point is required")


def _build_config(args: argparse.Namespace, P: int, repeats: int) -> ExplainerConfig:
    width = args.kernel_width if args.kernel_width is not None else default_kernel_width(P)
    config = ExplainerConfig(
        num_samples=args.num_samples,
        num_features=args.num_features,
        kernel_width=width,
        ridge_penalty=args.ridge_penalty,
        repeats=repeats,
        master_seed=args.seed,
    )
    return validate_config_for_features(config, P)


def _file_sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _config_dict(config: ExplainerConfig) -> dict:
    return {
        "num_samples": config.num_samples,
        "num_features": config.num_features,
        "kernel_width": float(config.kernel_width),
        "ridge_penalty": float(config.ridge_penalty),
        "repeats": config.repeats,
        "master_seed": config.master_seed,
    }


def _manifest(
    args: argparse.Namespace,
    dataset: Dataset | None,
    config: ExplainerConfig,
    x: np.ndarray | None,
) -> dict:
    entry: dict = {
        "tool": f"limestab {__version__}",
        "predictor": args.predictor,
        "config": _config_dict(config),
        "flags": {
            "include_query_point": bool(args.include_query_point),
            "unweighted_selection": bool(args.unweighted_selection),
        },
    }
    if dataset is not None and args.data is not None:
        entry["dataset"] = {
            "path": args.data,
            "sha256": _file_sha256(args.data),
            "rows": dataset.num_rows,
            "features": dataset.num_features,
            "target_column": dataset.target_name,
        }
    else:
        entry["dataset"] = None
    entry["query_point"] = [float(v) for v in x] if x is not None else None
    entry["row"] = args.row if getattr(args, "row", None) is not None else None
    return entry


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _csv_text(rows: Sequence[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def _named(mapping: Mapping[int, float], names: Sequence[str]) -> dict[str, float]:
    return {names[idx]: float(value) for idx, value in sorted(mapping.items())}


def _raw_scale(
    explanation: Explanation, stats: FeatureStats, names: Sequence[str]
) -> tuple[dict[str, float], float]:
    # Undo standardization: coefficient per original unit, and the matching
    # intercept, so the surrogate can be read against raw feature values.
    model = explanation.local_model
    raw: dict[str, float] = {}
    intercept = model.intercept
    for idx in sorted(model.coefficients):
        std = stats.stds[idx]
        if std > 0:
            coef = model.coefficients[idx] / std
            intercept -= model.coefficients[idx] * stats.means[idx] / std
        else:
            coef = 0.0
        raw[names[idx]] = float(coef)
    return raw, float(intercept)


def cmd_explain(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data, args.target_col)
    names = dataset.feature_names
    stats = infer_feature_stats(dataset)
    x = _resolve_point(args, dataset)
    config = _build_config(args, dataset.num_features, repeats=2)
    with make_predictor(
        args.predictor, dataset.num_features, timeout=args.predictor_timeout
    ) as predictor:
        explanation = explain_once(
            predictor,
            stats,
            x,
            config,
            seed=config.master_seed,
            feature_names=names,
            include_query_point=args.include_query_point,
            unweighted_selection=args.unweighted_selection,
        )
        black_box = float(predict(predictor, x.reshape(1, -1))[0])

    model = explanation.local_model
    intervals = {
        names[idx]: conf_int(model.coefficients[idx], model.coef_variances[idx])
        for idx in sorted(model.coefficients)
    }
    raw_coefs, raw_intercept = _raw_scale(explanation, stats, names)
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "explain",
        "manifest": _manifest(args, dataset, config, x),
        "selected_features": [names[idx] for idx in sorted(model.coefficients)],
        "coefficients": _named(model.coefficients, names),
        "coef_variances": _named(model.coef_variances, names),
        "confidence_intervals": {
            name: [ci.lower, ci.upper] for name, ci in intervals.items()
        },
        "contributions": {
            name: float(v) for name, v in explanation.feature_contributions.items()
        },
        "intercept": float(model.intercept),
        "raw_coefficients": raw_coefs,
        "raw_intercept": raw_intercept,
        "sigma2_hat": float(model.sigma2_hat),
        "lime_prediction": float(explanation.lime_prediction),
        "black_box_prediction": black_box,
    }

    if args.output == "json":
        _emit(_json_report(report), args.out)
    else:
        rows: list[list[object]] = [
            [
                "feature",
                "coefficient",
                "variance",
                "ci_lower",
                "ci_upper",
                "contribution",
                "raw_coefficient",
            ]
        ]
        for idx in sorted(model.coefficients):
            name = names[idx]
            ci = intervals[name]
            rows.append(
                [
                    name,
                    model.coefficients[idx],
                    model.coef_variances[idx],
                    ci.lower,
                    ci.upper,
                    report["contributions"][name],
                    raw_coefs[name],
                ]
            )
        for label, value in (
            ("(intercept)", model.intercept),
            ("(raw_intercept)", raw_intercept),
            ("(sigma2_hat)", model.sigma2_hat),
            ("(lime_prediction)", explanation.lime_prediction),
            ("(black_box_prediction)", black_box),
        ):
            rows.append([label, value, "", "", "", "", ""])
        _emit(_csv_text(rows), args.out)

    _say(f"black-box prediction: {black_box:.6g}")
    _say(
        f"surrogate prediction: {explanation.lime_prediction:.6g}"
        f"   intercept: {model.intercept:.6g}"
    )
    _say(f"{'feature':<26} {'coefficient':>12} {'contribution':>13}  95% interval")
    ordered = sorted(
        explanation.feature_contributions.items(), key=lambda kv: -abs(kv[1])
    )
    for name, contribution in ordered:
        idx = names.index(name)
        ci = intervals[name]
        _say(
            f"{name:<26} {model.coefficients[idx]:>12.6f} {contribution:>13.6f}"
            f"  [{ci.lower:.6f}, {ci.upper:.6f}]"
        )
    return EXIT_OK


def _stability_report_dict(
    args: argparse.Namespace,
    dataset: Dataset | None,
    config: ExplainerConfig,
    x: np.ndarray,
    names: Sequence[str],
    report,
    seeds: Sequence[int],
) -> dict:
    models = []
    for model, seed in zip(report.models, seeds):
        intervals = {
            names[idx]: conf_int(model.coefficients[idx], model.coef_variances[idx])
            for idx in sorted(model.coefficients)
        }
        models.append(
            {
                "seed": int(seed),
                "coefficients": _named(model.coefficients, names),
                "coef_variances": _named(model.coef_variances, names),
                "confidence_intervals": {
                    name: [ci.lower, ci.upper] for name, ci in intervals.items()
                },
                "intercept": float(model.intercept),
                "sigma2_hat": float(model.sigma2_hat),
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "stability",
        "manifest": _manifest(args, dataset, config, x),
        "vsi": float(report.vsi),
        "csi": float(report.csi),
        "par": _named(report.par, names),
        "excluded_features": [names[idx] for idx in report.excluded_features],
        "models": models,
    }


def _print_stability_summary(report, names: Sequence[str]) -> None:
    counts: dict[int, int] = {}
    for model in report.models:
        for idx in model.support:
            counts[idx] = counts.get(idx, 0) + 1
    _say(
        f"repeats: {len(report.models)}   retained features: {report.models[0].p_used}"
    )
    _say(
        f"VSI: {report.vsi:.2f}   CSI: {report.csi:.2f}"
        f"   wall time: {report.wall_time_seconds:.2f} s"
    )
    _say(f"{'feature':<26} {'runs':>5} {'par':>7}")
    for idx in sorted(report.par):
        _say(f"{names[idx]:<26} {counts[idx]:>5} {report.par[idx]:>7.3f}")
    if report.excluded_features:
        seen_once = ", ".join(names[idx] for idx in report.excluded_features)
        _say(f"excluded (seen once): {seen_once}")


def cmd_stability(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data, args.target_col)
    names = dataset.feature_names
    stats = infer_feature_stats(dataset)
    x = _resolve_point(args, dataset)
    config = _build_config(args, dataset.num_features, repeats=args.repeats)
    factory = None
    if args.per_repeat_process:
        def factory() -> object:
            return make_predictor(
                args.predictor, dataset.num_features, timeout=args.predictor_timeout
            )
    with make_predictor(
        args.predictor, dataset.num_features, timeout=args.predictor_timeout
    ) as predictor:
        report = stability_run(
            predictor,
            stats,
            x,
            config,
            feature_names=names,
            include_query_point=args.include_query_point,
            unweighted_selection=args.unweighted_selection,
            jobs=args.jobs,
            predictor_factory=factory,
        )
    seeds = derive_repeat_seeds(config.master_seed, config.repeats)
    payload = _stability_report_dict(args, dataset, config, x, names, report, seeds)

    if args.output == "json":
        _emit(_json_report(payload), args.out)
    else:
        rows: list[list[object]] = [["metric", "feature", "value"]]
        rows.append(["vsi", "", report.vsi])
        rows.append(["csi", "", report.csi])
        for idx in sorted(report.par):
            rows.append(["par", names[idx], report.par[idx]])
        for idx in report.excluded_features:
            rows.append(["excluded", names[idx], ""])
        _emit(_csv_text(rows), args.out)

    _print_stability_summary(report, names)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.data is not None:
        dataset = load_dataset(args.data, args.target_col)
        base_stats = infer_feature_stats(dataset)
        x_full = _resolve_point(args, dataset)
        max_P = dataset.num_features
    else:
        dataset = None
        base_stats = None
        x_full = None
        if args.dim_grid is None:
            raise ConfigError("sweep without --data requires --dim-grid")
        max_P = max(args.dim_grid)

    dims = args.dim_grid if args.dim_grid is not None else [max_P]
    samples_grid = (
        args.num_samples_grid if args.num_samples_grid is not None else [args.num_samples]
    )
    widths = args.kernel_widths if args.kernel_widths is not None else [args.kernel_width]
    penalties = (
        args.ridge_penalties if args.ridge_penalties is not None else [args.ridge_penalty]
    )
    if not dims or not samples_grid or not widths or not penalties:
        raise ConfigError("sweep grid is empty")
    for P in dims:
        if P < 1 or P > max_P:
            raise ConfigError(f"--dim-grid entry {P} out of range [1, {max_P}]")

    cells = list(product(dims, samples_grid, widths, penalties))
    configs = []
    for P, n, width, penalty in cells:
        resolved = width if width is not None else default_kernel_width(P)
        config = ExplainerConfig(
            num_samples=n,
            num_features=args.num_features,
            kernel_width=resolved,
            ridge_penalty=penalty,
            repeats=args.repeats,
            master_seed=args.seed,
        )
        configs.append(validate_config_for_features(config, P))

    def run_cell(index: int):
        P, n, _, _ = cells[index]
        config = configs[index]
        if base_stats is not None:
            stats = FeatureStats(means=base_stats.means[:P], stds=base_stats.stds[:P])
            x = np.array(x_full[:P])
            names: Sequence[str] = dataset.feature_names[:P]
        else:
            stats = FeatureStats(means=np.zeros(P), stds=np.ones(P))
            x = np.zeros(P)
            names = tuple(f"f{j}" for j in range(P))
        with make_predictor(args.predictor, P, timeout=args.predictor_timeout) as pred:
            report = stability_run(
                pred,
                stats,
                x,
                config,
                feature_names=names,
                include_query_point=args.include_query_point,
                unweighted_selection=args.unweighted_selection,
            )
        return report

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(run_cell, range(len(cells))))
    else:
        reports = [run_cell(i) for i in range(len(cells))]

    header = [
        "num_features_total",
        "num_samples",
        "kernel_width",
        "ridge_penalty",
        "vsi",
        "csi",
    ]
    table: list[list[object]] = [header]
    for (P, n, _, _), config, report in zip(cells, configs, reports):
        table.append(
            [P, n, config.kernel_width, config.ridge_penalty, report.vsi, report.csi]
        )

    if args.output == "csv":
        _emit(_csv_text(table), args.out)
    else:
        base_config = ExplainerConfig(
            num_samples=args.num_samples,
            num_features=args.num_features,
            kernel_width=widths[0] if widths[0] is not None else default_kernel_width(max_P),
            ridge_penalty=penalties[0],
            repeats=args.repeats,
            master_seed=args.seed,
        )
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": "sweep",
            "manifest": _manifest(args, dataset, base_config, x_full),
            "cells": [
                dict(zip(header, row, strict=True)) for row in table[1:]
            ],
        }
        _emit(_json_report(payload), args.out)

    for row in table[1:]:
        _say(
            f"P={row[0]} n={row[1]} kw={row[2]:.4g} lam={row[3]:.4g}"
            f" -> VSI {row[4]:.2f} CSI {row[5]:.2f}"
        )
    return EXIT_OK


def cmd_generate_data(args: argparse.Namespace) -> int:
    dataset = generate(num_rows=args.rows, seed=args.seed)
    save_dataset(dataset, args.out)
    _say(
        f"wrote {dataset.num_rows} rows x {dataset.num_features} features"
        f" + target to {args.out}"
    )
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    except DataError as exc:
        return _fail(exc, EXIT_DATA)
    except PredictorError as exc:
        return _fail(exc, EXIT_PREDICTOR)
    except (NumericError, SelectionError, CsiUndefinedError) as exc:
        return _fail(exc, EXIT_NUMERIC)
    except ValueError as exc:
        return _fail(exc, EXIT_CONFIG)


def _fail(exc: Exception, code: int) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code
