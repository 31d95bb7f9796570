"""Command-line front end: ``cbfs solve | sweep | check | validate | gen``.

Exit codes: 0 success (consistent), 2 best result inconsistent or no
solution, 1 input or usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import ConsistencyMode, classify_features, is_consistent, sample_centroids
from .dataset import (
    LabeledDataset,
    generate_planted,
    load_dataset,
    save_labels,
    save_matrix,
)
from .errors import CbfsError, InputError, NoSolutionError
from .evaluation import classify_validation, margin_report
from .heuristic import HeuristicConfig, RunOutcome, run

RESULT_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INCONSISTENT = 2

log = logging.getLogger("cbfs.cli")


class UsageError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def read_selection(path, matrix) -> np.ndarray:
    """One feature name per line; blank lines and ``#`` comments are ignored."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read selection file {path}: {exc.strerror}") from exc
    names = [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    x = np.zeros(matrix.m)
    x[matrix.feature_index(names)] = 1.0
    return x


def write_selection(path, matrix, x) -> None:
    names = [name for name, xi in zip(matrix.feature_names, x) if xi]
    _write(path, "".join(f"{name}\n" for name in names))


def _mode_from_args(args) -> ConsistencyMode:
    if getattr(args, "alpha", None) is not None:
        return ConsistencyMode.alpha(args.alpha)
    if getattr(args, "beta", None) is not None:
        return ConsistencyMode.beta(args.beta)
    return ConsistencyMode.plain()


def _config_from_args(args, mode) -> HeuristicConfig:
    try:
        return HeuristicConfig(
            starting_range=args.starting_range, max_range=args.max_range,
            range_growth=args.range_growth, restarts=args.restarts, seed=args.seed,
            mode=mode, strict_margin=args.strict_margin,
            perturb_retry_cap=args.perturb_retry_cap)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def result_document(outcome: RunOutcome, dataset: LabeledDataset, config: HeuristicConfig) -> dict:
    """JSON-ready result; contains no paths or timestamps so reruns are byte-identical."""
    best = outcome.best
    names = dataset.matrix.feature_names
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "tool_version": __version__,
        "mode": {"kind": config.mode.kind, "value": config.mode.value},
        "config": config.to_dict(),
        "num_features": dataset.matrix.m,
        "num_samples": dataset.matrix.n,
        "k": dataset.labels.k,
        "selected_count": best.selected_count,
        "consistent": best.consistent,
        "g": best.g_value,
        "y": [float(v) for v in best.y],
        "iterations": best.iterations,
        "restart_index": best.restart_index,
        "seed": best.seed,
        "selected_features": [n for n, xi in zip(names, best.x) if xi],
        "restarts": [
            {"restart_index": r.restart_index, "seed": r.seed, "selected_count": r.selected_count,
             "consistent": r.consistent, "g": r.g_value, "iterations": r.iterations,
             "error": r.error}
            for r in outcome.results
        ],
    }


def manifest_document(matrix_path, labels_path, config, out) -> dict:
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool_version": __version__,
        "command": "solve",
        "matrix": str(matrix_path),
        "labels": str(labels_path),
        "config": config.to_dict(),
        "out": None if out is None else str(out),
    }


def manifest_path_for(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".manifest.json")


def _table(headers, rows, markdown: bool) -> str:
    if markdown:
        lines = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
        lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(headers)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_solve(args) -> int:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        matrix_path, labels_path = manifest["matrix"], manifest["labels"]
        config = HeuristicConfig.from_dict(manifest["config"])
        out = args.out or manifest.get("out")
    else:
        if not args.matrix or not args.labels:
            raise UsageError("solve needs MATRIX and LABELS (or --manifest)")
        matrix_path, labels_path = args.matrix, args.labels
        config = _config_from_args(args, _mode_from_args(args))
        out = args.out
    dataset = load_dataset(matrix_path, labels_path)
    try:
        outcome = run(dataset.matrix, dataset.labels, config, workers=args.workers)
    except NoSolutionError as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    doc = result_document(outcome, dataset, config)
    if out:
        _write(out, _dumps(doc))
        _write(manifest_path_for(out), _dumps(manifest_document(matrix_path, labels_path, config, out)))
    if args.selection_out:
        write_selection(args.selection_out, dataset.matrix, outcome.best.x)
    value = "-" if config.mode.kind == "plain" else f"{config.mode.value:g}"
    print(_table(["mode", "value", "f(x)", "of", "consistent", "g", "iterations", "restart"],
                 [[config.mode.kind, value, doc["selected_count"], doc["num_features"],
                   doc["consistent"], f"{doc['g']:.6g}", doc["iterations"], doc["restart_index"]]],
                 markdown=True), end="")
    return EXIT_OK if outcome.best.consistent else EXIT_INCONSISTENT


def cmd_sweep(args) -> int:
    if not args.values:
        raise UsageError("sweep needs at least one value")
    if list(args.values) != sorted(args.values):
        raise UsageError("sweep values must be sorted ascending")
    if (args.validation_matrix is None) != (args.validation_labels is None):
        raise UsageError("--validation-matrix and --validation-labels go together")
    dataset = load_dataset(args.matrix, args.labels)
    validation = None
    if args.validation_matrix:
        validation = load_dataset(args.validation_matrix, args.validation_labels, role="validation")
    f = classify_features(sample_centroids(dataset.matrix, dataset.labels), allow_ties=True)
    headers = [args.mode, "f(x)", "consistent"] + (["err"] if validation else [])
    rows = []
    for value in args.values:
        try:
            mode = ConsistencyMode(args.mode, value)
            config = _config_from_args(args, mode)
            best = run(dataset.matrix, dataset.labels, config, workers=args.workers).best
            row = [f"{value:g}", best.selected_count, best.consistent]
            if validation:
                row.append(classify_validation(dataset, f, best.x, validation).err)
        except (CbfsError, ValueError) as exc:
            log.warning("value %g failed: %s", value, exc)
            row = [f"{value:g}", "failed", False] + (["-"] if validation else [])
        rows.append(row)
    if args.out:
        _write(args.out, _table(headers, rows, markdown=False))
    print(_table(headers, rows, markdown=True), end="")
    return EXIT_OK


def cmd_check(args) -> int:
    dataset = load_dataset(args.matrix, args.labels)
    x = read_selection(args.selection, dataset.matrix)
    mode = _mode_from_args(args)
    report = is_consistent(dataset.matrix, dataset.labels, x, mode)
    names = dataset.matrix.sample_names
    labels = dataset.labels
    print(f"verdict: {'consistent' if report.consistent else 'inconsistent'} "
          f"({mode}, {int(x.sum())} of {dataset.matrix.m} features)")
    for v in report.violations:
        print(f"violation sample={names[v.sample]} class={labels.name_of(v.cluster)} "
              f"rival={labels.name_of(v.other)} margin={v.margin:.12g}")
    for i in report.feature_ties:
        print(f"tie feature={dataset.matrix.feature_names[i]}")
    for j in report.sample_ties:
        print(f"tie sample={names[j]}")
    print(f"min constraint margin: {report.min_margin:.12g}")
    print(margin_report(dataset.matrix, dataset.labels, args.epsilon).summary())
    return EXIT_OK if report.consistent else EXIT_INCONSISTENT


def cmd_validate(args) -> int:
    train = load_dataset(args.train_matrix, args.train_labels)
    validation = load_dataset(args.validation_matrix, args.validation_labels, role="validation")
    x = read_selection(args.selection, train.matrix)
    f = classify_features(sample_centroids(train.matrix, train.labels), allow_ties=True)
    report = classify_validation(train, f, x, validation)
    if args.out:
        _write(f"{args.out}.json", report.to_json())
        _write(f"{args.out}.csv", report.to_csv())
    print(f"err={report.err} of {len(report.per_sample)} validation samples")
    return EXIT_OK


def cmd_gen(args) -> int:
    dataset = generate_planted(args.m, args.n, args.k, args.signal, args.noise_features,
                               args.seed, args.jitter)
    out = Path(args.out_dir)
    prefix = args.prefix
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(dataset.matrix, out / f"{prefix}matrix.csv")
    save_labels(dataset, out / f"{prefix}labels.csv")
    names = dataset.matrix.feature_names
    truth = {
        "schema_version": 1,
        "tool_version": __version__,
        "parameters": {"m": args.m, "n": args.n, "k": args.k, "signal": args.signal,
                       "noise_features": args.noise_features, "seed": args.seed,
                       "jitter": args.jitter},
        "planted": {name: (None if r < 0 else dataset.labels.name_of(int(r)))
                    for name, r in zip(names, dataset.planted)},
        "consistent_features": [name for name, r in zip(names, dataset.planted) if r >= 0],
    }
    _write(out / f"{prefix}truth.json", _dumps(truth))
    print(f"wrote {out / (prefix + 'matrix.csv')}, {out / (prefix + 'labels.csv')}, "
          f"{out / (prefix + 'truth.json')}")
    return EXIT_OK


def _add_mode_flags(p):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--alpha", type=float, help="additive consistency margin")
    group.add_argument("--beta", type=float, help="multiplicative consistency margin")


def _add_config_flags(p):
    d = HeuristicConfig()
    p.add_argument("--restarts", type=int, default=d.restarts)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--starting-range", type=float, default=d.starting_range)
    p.add_argument("--max-range", type=float, default=d.max_range)
    p.add_argument("--range-growth", type=float, default=d.range_growth)
    p.add_argument("--strict-margin", type=float, default=d.strict_margin)
    p.add_argument("--perturb-retry-cap", type=int, default=d.perturb_retry_cap)
    p.add_argument("--workers", type=int, default=1, help="restarts run in parallel threads")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cbfs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cbfs {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="no progress log on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="select a maximal consistent feature set")
    p.add_argument("matrix", nargs="?")
    p.add_argument("labels", nargs="?")
    _add_mode_flags(p)
    _add_config_flags(p)
    p.add_argument("--out", help="result JSON path; a .manifest.json is written next to it")
    p.add_argument("--selection-out", help="also write the selected feature names here")
    p.add_argument("--manifest", help="re-run a previous solve from its manifest")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve over a list of alpha or beta values")
    p.add_argument("matrix")
    p.add_argument("labels")
    p.add_argument("--mode", choices=("alpha", "beta"), required=True)
    p.add_argument("--values", type=float, nargs="*", default=[])
    p.add_argument("--validation-matrix")
    p.add_argument("--validation-labels")
    _add_config_flags(p)
    p.add_argument("--out", help="CSV table path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="check a feature selection for consistency")
    p.add_argument("matrix")
    p.add_argument("labels")
    p.add_argument("selection")
    _add_mode_flags(p)
    p.add_argument("--epsilon", type=float, default=None,
                   help="count features whose centroid margin is at most this")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("validate", help="misclassifications of a validation set")
    p.add_argument("train_matrix")
    p.add_argument("train_labels")
    p.add_argument("selection")
    p.add_argument("validation_matrix")
    p.add_argument("validation_labels")
    p.add_argument("--out", help="output prefix for <prefix>.json and <prefix>.csv")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="write a synthetic planted dataset")
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--signal", type=float, default=10.0)
    p.add_argument("--noise-features", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=0.1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--prefix", default="")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"cbfs: usage error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    root = logging.getLogger("cbfs")
    handler = None
    if not args.quiet:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(handler)
        root.setLevel(logging.INFO)
    try:
        return args.func(args)
    except (InputError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"cbfs: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        if handler is not None:
            root.removeHandler(handler)
