"""Command-line entry point: ingest, rank, sweep, synth, report.

Every stage reads and writes plain files so each one can be rerun on its own.
Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, evalkit, learners, plots
from .errors import DataError, UsageError
from .ranking import METHODS, read_ranking, write_ranking
from .table import format_histogram, read_table, write_table

logger = logging.getLogger("fundusrank")

OUTPUT_ENV = "FUNDUSRANK_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_ks(text: str | None, L: int) -> list[int]:
    """``None`` -> 1..L; ``a:b`` or ``a:b:step`` -> inclusive range; else a comma list."""
    if text is None:
        return list(range(1, L + 1))
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] < 1):
                raise ValueError
            ks = list(range(parts[0], parts[1] + 1, parts[2] if len(parts) == 3 else 1))
        else:
            ks = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse --ks {text!r}; use e.g. 1:66, 1:98:5 or 10,20,40") from None
    bad = [k for k in ks if not 1 <= k <= L]
    if not ks or bad:
        raise UsageError(f"--ks values must lie in [1, {L}], got {bad or ks}")
    return ks


def _value(text: str):
    low = text.lower()
    if low in ("none", "null"):
        return None
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_params(items) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--param expects name=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = _value(value.strip())
    return params


def output_dir(args) -> Path:
    """``--output-dir`` if given, else $FUNDUSRANK_OUTPUT_DIR, else the working directory."""
    chosen = args.output_dir or os.environ.get(OUTPUT_ENV) or "."
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _classifier_params(args, kind: str) -> dict:
    params = parse_params(args.param)
    if args.class_weight:
        params["class_weight"] = "balanced"
    if args.classifier.upper() == "AUTO" or kind == "KNN":
        # under AUTO each override reaches only the kinds that know it
        params = {k: v for k, v in params.items() if k in learners.DEFAULTS[kind]}
    return params


def _resolve_classifier(args, table, plan) -> str:
    kind = args.classifier.upper()
    if kind != "AUTO":
        return kind
    train = table.take(plan.train_idx)
    folds = [(np.searchsorted(plan.train_idx, a), np.searchsorted(plan.train_idx, b)) for a, b in plan.folds]
    cands = [(k, _classifier_params(args, k)) for k in learners.KINDS]
    best, errors = learners.select_classifier(cands, train, folds, args.seed, return_errors=True)
    for (k, _), err in zip(cands, errors):
        print(f"  {k:<4} mean validation error {err:.4f}")
    print(f"selected classifier: {best}")
    return best


def cmd_ingest(args) -> int:
    from .pipeline import ingest

    out = Path(args.out) if args.out else output_dir(args) / "features.csv"
    dump = Path(args.region_dump) if args.region_dump else None
    table = ingest(args.config, args.profile, dump)
    write_table(table, out)
    print(f"{table.n} samples x {table.L} features ({table.meta.get('profile')}) -> {out}")
    print(format_histogram(table.labels, table.meta.get("class_names")))
    return 0


def cmd_rank(args) -> int:
    table = read_table(args.table)
    method = args.method.upper()
    plan = evalkit.make_split(table, args.seed)
    kind = _resolve_classifier(args, table, plan)
    k = args.validate_k
    if k is not None and not 1 <= k <= table.L:
        raise UsageError(f"--validate-k must lie in [1, {table.L}]")
    result = evalkit.run_protocol(table, method, kind, args.seed, bins=args.bins,
                                  params=_classifier_params(args, kind), k=k, plan=plan)
    out = Path(args.out) if args.out else output_dir(args) / f"ranking_{method.lower()}.csv"
    write_ranking(result.consensus, table.feature_names, out)
    log = {
        "method": method, "classifier": kind, "seed": args.seed, "bins": args.bins,
        "fold_validation_error": result.fold_errors, "mean_validation_error": result.mean_error,
        "n_train": int(len(plan.train_idx)), "n_test": int(len(plan.test_idx)),
    }
    out.with_suffix(".json").write_text(json.dumps(log, indent=2, sort_keys=True) + "\n")
    print(f"{method} consensus ranking over {len(result.fold_rankings)} folds -> {out}")
    print(f"{kind} mean validation error {result.mean_error:.4f}")
    for pos, idx in enumerate(result.consensus.top(min(10, table.L)), 1):
        print(f"  {pos:>3}  {table.feature_names[idx]}")
    return 0


def _positive(args, table):
    if args.positive is None:
        return None
    if args.positive not in table.classes:
        raise UsageError(f"--positive {args.positive} is not a class of the table {table.classes.tolist()}")
    return args.positive


def cmd_sweep(args) -> int:
    table = read_table(args.table)
    ranking, names = read_ranking(args.ranking)
    if ranking.L != table.L or names != table.feature_names:
        raise DataError(f"{args.ranking} does not describe the columns of {args.table}")
    ks = parse_ks(args.ks, table.L)
    plan = evalkit.make_split(table, args.seed)
    kind = _resolve_classifier(args, table, plan)
    reports = evalkit.sweep_topk(table, ranking.order, kind, ks, args.seed,
                                 _classifier_params(args, kind), ranking.method, plan,
                                 _positive(args, table))
    out = output_dir(args)
    evalkit.write_summary(reports, out / "summary.csv")
    curves = {}
    for rep in reports:
        if rep.roc_points.size:
            evalkit.write_roc(rep, out / f"roc_k{rep.k:03d}.csv")
    label = f"{ranking.method}/{kind}"
    plots.accuracy_curve({label: reports}, out / "accuracy.svg")
    shown = sorted({ks[0], ks[-1], *[k for k in (10, 40) if k in ks]})
    for rep in reports:
        if rep.k in shown and rep.roc_points.size:
            curves[f"top-{rep.k}"] = (rep.roc_points, rep.auc)
    if curves:
        plots.roc_chart(curves, out / "roc.svg", title=f"ROC, {label}")
    best = max(reports, key=lambda r: r.accuracy)
    print(f"{len(reports)} sweep points -> {out / 'summary.csv'}")
    print(f"best accuracy {best.accuracy:.4f} at k={best.k}; all-features accuracy "
          f"{reports[-1].accuracy:.4f} at k={reports[-1].k}")
    return 0


def cmd_synth(args) -> int:
    from .synth import write_synthetic

    if args.n < 1 or args.informative < 0 or args.noise < 0 or args.informative + args.noise < 1:
        raise UsageError("need n >= 1 and at least one feature")
    out = Path(args.out) if args.out else output_dir(args) / "synthetic.csv"
    table, informative = write_synthetic(out, args.n, args.informative, args.noise,
                                         args.classes, args.effect, args.seed)
    print(f"{table.n} samples x {table.L} features, informative columns {informative.tolist()} -> {out}")
    return 0


def _compare(table, methods, kind, k, seed, params, bins, positive=None):
    """Per method: consensus ranking, then top-k vs all-feature test evaluation."""
    plan = evalkit.make_split(table, seed)
    rows = []
    full = evalkit.evaluate_subset(table, np.arange(table.L), kind, seed, params, plan, positive)
    for method in methods:
        result = evalkit.run_protocol(table, method, kind, seed, bins=bins, params=params, plan=plan)
        top = evalkit.evaluate_subset(table, result.consensus.top(k), kind, seed, params, plan, positive)
        top.method = method
        rows.append((method, result, top))
    return full, rows


def cmd_report(args) -> int:
    table = read_table(args.table)
    methods = [m.strip().upper() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(f"unknown ranking method(s) {unknown}; expected some of {METHODS}")
    if not 1 <= args.k <= table.L:
        raise UsageError(f"-k must lie in [1, {table.L}]")
    kind = args.classifier.upper()
    params = _classifier_params(args, kind)
    out = output_dir(args)

    full, rows = _compare(table, methods, kind, args.k, args.seed, params, args.bins)
    lines = ["method,k,accuracy,wall_time_s,accuracy_all,wall_time_all_s,mean_validation_error"]
    print(f"{'method':<8} {'k':>4} {'accuracy':>9} {'time_s':>9}   all: {full.accuracy:.4f} "
          f"({full.wall_time_s:.3f}s, L={table.L})")
    for method, result, top in rows:
        lines.append(f"{method},{args.k},{top.accuracy!r},{top.wall_time_s!r},{full.accuracy!r},"
                     f"{full.wall_time_s!r},{result.mean_error!r}")
        print(f"{method:<8} {args.k:>4} {top.accuracy:>9.4f} {top.wall_time_s:>9.3f}")
    (out / "comparison.csv").write_text("\n".join(lines) + "\n")

    curves = {}
    for spec in args.subtask or []:
        try:
            classes = [int(c) for c in spec.split(",")]
        except ValueError:
            raise UsageError(f"--subtask expects comma-separated class ids, got {spec!r}") from None
        if len(classes) != 2:
            raise UsageError(f"--subtask needs exactly two class ids, got {spec!r}")
        sub = table.restrict_classes(classes)
        if set(sub.classes.tolist()) != set(classes):
            raise DataError(f"sub-task {spec}: table has no rows for some of classes {classes}")
        k = min(args.k, sub.L)
        sfull, srows = _compare(sub, methods[:1], kind, k, args.seed, params, args.bins, positive=classes[1])
        _, _, stop = srows[0]
        tag = f"{classes[0]}v{classes[1]}"
        for name, rep in ((f"{tag}_top{k}", stop), (f"{tag}_all", sfull)):
            if rep.roc_points.size:
                evalkit.write_roc(rep, out / f"roc_{name}.csv")
                curves[f"{tag} top-{rep.k}" if rep is stop else f"{tag} all"] = (rep.roc_points, rep.auc)
        print(f"sub-task {tag} ({methods[0]} top-{k}): AUC {stop.auc}, all features AUC {sfull.auc}")
    if table.classes.size == 2 and not curves:
        for method, _, top in rows:
            if top.roc_points.size:
                evalkit.write_roc(top, out / f"roc_{method.lower()}_top{args.k}.csv")
                curves[f"{method} top-{args.k}"] = (top.roc_points, top.auc)
        if full.roc_points.size:
            evalkit.write_roc(full, out / "roc_all.csv")
            curves["all features"] = (full.roc_points, full.auc)
    if curves:
        plots.roc_chart(curves, out / "roc.svg", title=f"ROC, {kind}")
    print(f"comparison -> {out / 'comparison.csv'}")
    return 0


def _add_common(p, seed=True):
    p.add_argument("--output-dir", help=f"output directory (default: ${OUTPUT_ENV} or the working directory)")
    if seed:
        p.add_argument("--seed", type=int, required=True, help="seed for splits, folds and training")


def _add_classifier(p, allow_auto=True):
    choices = [*learners.KINDS, "AUTO"] if allow_auto else list(learners.KINDS)
    p.add_argument("--classifier", default="BDT", type=str.upper, choices=choices,
                   help="classifier kind; AUTO picks the lowest mean validation error")
    p.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="classifier hyperparameter override (repeatable)")
    p.add_argument("--class-weight", action="store_true", help="inverse class-frequency sample weights")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fundusrank", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="images + masks -> feature table")
    p.add_argument("config", help="dataset config (key = value lines)")
    p.add_argument("--profile", type=str.upper, choices=["REGION66", "FULL98"])
    p.add_argument("--out", help="feature table path (default: <output-dir>/features.csv)")
    p.add_argument("--region-dump", help="directory for per-image candidate region listings")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("rank", help="consensus feature ranking over the 5-fold protocol")
    p.add_argument("table")
    p.add_argument("--method", type=str.upper, choices=list(METHODS), required=True)
    p.add_argument("--bins", type=int, default=10, help="equal-frequency bins for mutual information")
    p.add_argument("--validate-k", type=int, help="validate folds on the top-k features (default: all)")
    p.add_argument("--out", help="ranking path (default: <output-dir>/ranking_<method>.csv)")
    _add_classifier(p)
    _add_common(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("sweep", help="test accuracy for each top-k subset of a ranking")
    p.add_argument("table")
    p.add_argument("ranking")
    p.add_argument("--ks", help="subset sizes: 1:66, 1:98:5 or 10,20,40 (default: 1..L)")
    p.add_argument("--positive", type=int, help="positive class for sensitivity/specificity/ROC")
    _add_classifier(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="synthetic Gaussian-blob table with known informative columns")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--informative", type=int, default=10)
    p.add_argument("--noise", type=int, default=40)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--effect", type=float, default=1.0, help="class mean shift in standard deviations")
    p.add_argument("--out", help="table path (default: <output-dir>/synthetic.csv)")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="top-k vs all-feature comparison per ranking method, plus ROC")
    p.add_argument("table")
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("-k", type=int, default=40, help="subset size compared with the full set")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--subtask", action="append", metavar="A,B",
                   help="binary sub-task over two class ids (B positive) for ROC (repeatable)")
    _add_classifier(p, allow_auto=False)
    _add_common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fundusrank: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError) as exc:
        print(f"fundusrank: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
