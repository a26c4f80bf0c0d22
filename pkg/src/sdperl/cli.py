"""Command-line entry point: ``sdperl <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .code_metrics import extract_corpus, write_corpus_csv
from .dataset import DataError, load_feature_matrix, save_feature_matrix
from .embedder import build_embeddings, save_embeddings
from .report import emit_report, emit_sweep, read_best_score
from .runner import ConfigError, ExperimentConfig, compare_settings, run_experiment, \
    sweep_feature_count
from .synthetic import make_version_pair

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4

# CLI flag -> config key
_OVERRIDES = {
    "mode": "mode",
    "pheromone": "pheromone_mode",
    "timesteps": "timesteps",
    "m": "M",
    "seed": "seed",
    "train": "train_path",
    "test": "test_path",
    "out": "output_dir",
}


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Flat YAML or JSON mapping; non-None ``overrides`` win over file values."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            values = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from None
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: expected a key-value mapping")
    values = dict(values)
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    try:
        return ExperimentConfig.from_mapping(values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _add_run_flags(p: argparse.ArgumentParser, single_m: bool = True) -> None:
    p.add_argument("--config", help="YAML or JSON file of ExperimentConfig fields")
    p.add_argument("--mode", choices=["custom", "simple"])
    p.add_argument("--pheromone", choices=["vanilla", "pheromone", "best-action"])
    p.add_argument("--timesteps", type=int)
    if single_m:
        p.add_argument("--m", type=int, dest="m")
    p.add_argument("--seed", type=int)
    p.add_argument("--train", help="earlier-version feature CSV")
    p.add_argument("--test", help="later-version feature CSV")
    p.add_argument("--out", help="output directory")
    p.add_argument("--svg", action="store_true", help="also write SVG charts")


def _run_config(args) -> ExperimentConfig:
    overrides = {key: getattr(args, flag) for flag, key in _OVERRIDES.items()}
    return load_config(args.config, overrides)


def cmd_extract(args) -> int:
    matrix = extract_corpus(args.root, args.labels)
    write_corpus_csv(matrix, args.out, args.label_column)
    print(f"wrote {matrix.n_rows} rows x {matrix.n_features} metrics to {args.out}")
    return EXIT_OK


def cmd_embed(args) -> int:
    data = load_feature_matrix(args.input, args.label_column)
    if not 2 <= args.k_start <= args.k_end:
        raise ConfigError("need 2 <= k-start <= k-end")
    table = build_embeddings(data, args.k_start, args.k_end, args.seed)
    manifest = save_embeddings(table, data.feature_names, args.out)
    print(f"wrote {table.n_features} x {table.dim} embeddings to {args.out} ({manifest.name})")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _run_config(args)
    if cfg.output_dir is None:
        raise ConfigError("no output directory: pass --out or set output_dir")
    report = run_experiment(cfg, resume=args.resume)
    emit_report(report, cfg.output_dir, svg=args.svg)
    m = report.test_metrics
    auc = "n/a" if m.auc is None else f"{m.auc:.4f}"
    print(f"best eval {cfg.metric} {report.best_score:.4f}; test F1 {m.f1:.4f} AUC {auc}; "
          f"report in {cfg.output_dir}")
    return EXIT_OK


def cmd_compare(args) -> int:
    a = [read_best_score(d) for d in args.a]
    b = [read_best_score(d) for d in args.b]
    res = compare_settings(a, b)
    print(f"t = {res.t_statistic:.4f}  p = {res.p_value:.4g}  d = {res.cohens_d:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        m_values = [int(v) for v in args.m_values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--m expects comma-separated integers, got {args.m_values!r}") from None
    if not m_values:
        raise ConfigError("--m needs at least one value")
    # validate against a sweep point, not the file's single M
    args.m = min(m_values)
    cfg = _run_config(args)
    if cfg.output_dir is None:
        raise ConfigError("no output directory: pass --out or set output_dir")
    rows = sweep_feature_count(cfg, m_values)
    emit_sweep(rows, cfg.output_dir, svg=args.svg)
    for row in rows:
        print(f"M={row['M']:3d}  F1 {row['f1']:.4f}")
    return EXIT_OK


def cmd_synthetic(args) -> int:
    earlier, later, informative = make_version_pair(seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_feature_matrix(earlier, out / "train.csv")
    save_feature_matrix(later, out / "test.csv")
    (out / "informative.txt").write_text(
        "\n".join(earlier.feature_names[i] for i in informative) + "\n", encoding="utf-8")
    print(f"wrote synthetic version pair to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdperl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-metrics", help="static metrics for a labeled Java corpus")
    p.add_argument("--root", required=True, help="corpus root directory")
    p.add_argument("--labels", required=True, help="CSV of relative path and 0/1 label")
    p.add_argument("--out", required=True)
    p.add_argument("--label-column", default="Bug")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("embed", help="build feature embeddings from a feature CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--k-start", type=int, default=5)
    p.add_argument("--k-end", type=int, default=14)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--label-column", default="Bug")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="run one experiment and write its report")
    _add_run_flags(p)
    p.add_argument("--resume", help="agent checkpoint to start from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="t-test between two groups of run directories")
    p.add_argument("--a", nargs="+", required=True, metavar="RUN_DIR")
    p.add_argument("--b", nargs="+", required=True, metavar="RUN_DIR")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="one run per subset size M")
    _add_run_flags(p, single_m=False)
    p.set_defaults(func=cmd_sweep, m=None)
    p.add_argument("--m", dest="m_values", required=True, help="comma-separated sizes, e.g. 5,10,15")

    p = sub.add_parser("make-synthetic", help="write a planted-signal train/test pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthetic)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RuntimeError, FloatingPointError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
