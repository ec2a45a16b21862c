"""``convwatt`` command-line front end.

Data goes to standard output or ``--out``; diagnostics and a reproducibility
footer (version, seed, input digests) go to standard error. Exit status is 0
on success, 1 on invalid input and 2 on I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import os
import sys
import tempfile
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bundled import data_dir
from .energy_trace import (
    breakdown_from_trace,
    integrate_energy,
    layer_type_breakdown,
    load_annotations,
    load_energy_dataset,
    load_power_trace,
    per_layer_energy,
    total_energy,
)
from .evaluation import DEFAULT_SEED, Metric, SplitPlan, cross_validate, feature_recipe, mean_std, relative_accuracy, rmspe_accuracy
from .features import BASE_FEATURES, MAC_SUM, OP_SUM, aggregate_kind, layer_feature_vector, polynomial_names, polynomial_values
from .model_ir import infer_shapes, load_model
from .predictor import bundle_to_json, layer_type_recipe, load_bundle, network_aggregates, predict_total, train_bundle
from .regression import select_features

SEED_ENV = "CONVWATT_SEED"


class _Run:
    """Per-invocation state: the resolved seed and every input file read."""

    def __init__(self, seed: int) -> None:
        self.seed = seed
        self.inputs: list[Path] = []

    def path(self, value: str | os.PathLike) -> Path:
        p = Path(value)
        self.inputs.append(p)
        return p

    def footer(self) -> str:
        lines = [f"# convwatt {__version__} seed={self.seed}"]
        for p in self.inputs:
            try:
                digest = hashlib.sha256(p.read_bytes()).hexdigest()
            except OSError:
                digest = "unreadable"
            lines.append(f"# input {p} sha256={digest}")
        return "\n".join(lines) + "\n"


def resolve_seed(flag: int | None) -> int:
    """``--seed`` wins, then ``CONVWATT_SEED``, then 42."""
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def write_output(text: str, out: str | None) -> None:
    """Write to stdout, or atomically to ``out`` via a temp file and rename."""
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(out)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _csv(rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _names(value: str | None) -> tuple[str, ...] | None:
    if not value:
        return None
    return tuple(v.strip() for v in value.split(",") if v.strip())


# ---------------------------------------------------------------------------
# Subcommands


def cmd_features(args, run: _Run) -> str:
    model = infer_shapes(load_model(run.path(args.model)))
    names = polynomial_names(BASE_FEATURES, args.degree)
    rows: list[list[object]] = [["row_type", "name", "kind", *names, MAC_SUM, OP_SUM]]
    blank = [""] * len(names)
    for layer in model.layers:
        if aggregate_kind(layer) in ("Conv", "Fc"):
            vec = layer_feature_vector(layer, args.degree)
            rows.append(["layer", layer.name, layer.kind, *vec.values, "", ""])
    for kind, vec in network_aggregates(model).items():
        mac, ops = (vec.values[0], "") if vec.names[0] == MAC_SUM else ("", vec.values[0])
        rows.append(["aggregate", model.name, kind, *blank, mac, ops])
    return _csv(rows)


def cmd_integrate(args, run: _Run) -> str:
    trace = load_power_trace(run.path(args.trace))
    if args.annotations:
        result = per_layer_energy(trace, load_annotations(run.path(args.annotations)))
        if result.skipped:
            print(f"warning: {result.skipped} annotation(s) outside the trace were skipped", file=sys.stderr)
        if args.summary:
            rows = [["layer_name", "layer_kind", "runs", "mean_energy_mj", "std_energy_mj", "mean_time_s", "std_time_s"]]
            rows += [
                [s.layer_name, s.layer_kind, s.runs, repr(s.mean_energy_mj), repr(s.std_energy_mj), repr(s.mean_time_s), repr(s.std_time_s)]
                for s in result.summary()
            ]
        else:
            rows = [["layer_name", "layer_kind", "run_id", "begin_us", "end_us", "time_s", "energy_mj"]]
            rows += [
                [m.layer_name, m.layer_kind, m.run_id, f"{m.begin_us:g}", f"{m.end_us:g}", repr(m.time_s), repr(m.energy_mj)]
                for m in result.measurements
            ]
        return _csv(rows)
    if (args.begin is None) != (args.end is None):
        raise ValueError("--begin and --end must be given together")
    if args.begin is None:
        begin, end, energy = trace.start, trace.end, total_energy(trace)
    else:
        begin, end = args.begin, args.end
        energy = integrate_energy(trace, begin, end)
    return _csv([["begin_us", "end_us", "energy_mj"], [repr(float(begin)), repr(float(end)), repr(energy)]])


def _table_breakdown(path: Path, provenance: str | None):
    rows: dict[str, list[tuple[str, float, float]]] = {}
    totals: dict[str, tuple[float, float]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            try:
                e, t = float(rec["energy_mj"]), float(rec["time_s"])
                prov, kind = rec["provenance"], rec["layer_kind"]
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: malformed breakdown row {rec}: {exc}") from None
            if kind == "Total":
                totals[prov] = (e, t)
            else:
                rows.setdefault(prov, []).append((kind, e, t))
    if provenance is None:
        if len(rows) != 1:
            raise ValueError(f"{path} holds several provenances {sorted(rows)}; pass --provenance")
        provenance = next(iter(rows))
    if provenance not in rows:
        raise ValueError(f"provenance {provenance!r} not in {path}; have {sorted(rows)}")
    total_e, total_t = totals.get(provenance, (None, None))
    return layer_type_breakdown(rows[provenance], total_e, total_t)


def _breakdown_csv(b, provenance: str | None = None) -> str:
    lead = ["provenance"] if provenance is not None else []
    rows: list[list[object]] = [lead + ["layer_kind", "energy_mj", "time_s", "energy_pct", "time_pct"]]
    pre = [provenance] if provenance is not None else []
    for r in b.rows:
        rows.append(pre + [r.kind, f"{r.energy_mj:.4f}", f"{r.time_s:.6f}", f"{r.energy_pct:.4f}", f"{r.time_pct:.4f}"])
    rows.append(pre + ["Total", f"{b.total_energy_mj:.4f}", f"{b.total_time_s:.6f}", "100.0000", "100.0000"])
    return _csv(rows)


def cmd_breakdown(args, run: _Run) -> str:
    if args.table:
        return _breakdown_csv(_table_breakdown(run.path(args.table), args.provenance))
    if not (args.trace and args.annotations):
        raise ValueError("breakdown needs --trace and --annotations, or --table")
    trace = load_power_trace(run.path(args.trace))
    return _breakdown_csv(breakdown_from_trace(trace, load_annotations(run.path(args.annotations))))


def cmd_train(args, run: _Run) -> str:
    dataset = load_energy_dataset(run.path(args.dataset), args.provenance)
    bundle = train_bundle(dataset, _names(args.kinds), provenance=args.provenance, seed=run.seed)
    for kind, m in sorted(bundle.models.items()):
        print(
            f"{kind}: energy = {m.intercept:.6g} + {m.coefficients[0]:.6g} * {m.feature_names[0]} (n={m.n_train})",
            file=sys.stderr,
        )
    return bundle_to_json(bundle)


def cmd_predict(args, run: _Run) -> str:
    bundle = load_bundle(run.path(args.bundle))
    model = infer_shapes(load_model(run.path(args.model)))
    return predict_total(bundle, model, args.provenance).to_csv()


def _candidate_matrix(dataset, names: tuple[str, ...], degree: int) -> tuple[np.ndarray, tuple[str, ...]]:
    X = dataset.matrix(names)
    return polynomial_values(X, degree), polynomial_names(names, degree)


def cmd_select(args, run: _Run) -> str:
    dataset = load_energy_dataset(run.path(args.dataset))
    if args.kind:
        dataset = dataset.of_kind(args.kind)
    if len(dataset) == 0:
        raise ValueError("no rows to select features on")
    base = _names(args.features) or tuple(n for n in BASE_FEATURES if n in dataset.feature_names)
    if not base:
        raise ValueError("dataset has none of the base feature columns; pass --features")
    X, names = _candidate_matrix(dataset, base, args.degree)
    path = select_features(X, dataset.energies, names, args.method, args.max_size)
    best = path.selected
    print(f"{path.method}: selected {best.size} feature(s) {list(best.features)} bic={best.bic:.4f}", file=sys.stderr)
    return path.to_csv()


def _eval_plan(args, seed: int) -> SplitPlan:
    if args.split == "random":
        return SplitPlan.random_layers(args.ratio, args.repeats, seed)
    return SplitPlan.leave_networks_out(args.networks_per_fold, args.folds, seed, _names(args.test_networks))


def cmd_evaluate(args, run: _Run) -> str:
    dataset = load_energy_dataset(run.path(args.dataset))
    plan = _eval_plan(args, run.seed)
    if args.recipe == "features":
        names = _names(args.features) or tuple(n for n in BASE_FEATURES if n in dataset.feature_names)
        recipe = feature_recipe(names)
    else:
        recipe = layer_type_recipe(_names(args.kinds))
    metrics = [Metric.REL_ACC, Metric.RMSPE_ACC] if args.metric == "both" else [Metric(args.metric)]
    parts = []
    for i, metric in enumerate(metrics):
        report = cross_validate(dataset, plan, recipe, metric)
        print(report.format_table(), file=sys.stderr)
        text = report.to_csv()
        parts.append(text if i == 0 else text.split("\n", 1)[1])
    return "".join(parts)


def cmd_report(args, run: _Run) -> str:
    data = Path(args.data_dir) if args.data_dir else data_dir()
    rows: list[list[object]] = [["table", "provenance", "row", "column", "value"]]

    breakdowns = run.path(data / "googlenet_breakdowns.csv")
    with breakdowns.open(newline="", encoding="utf-8") as fh:
        provs = list(dict.fromkeys(rec["provenance"] for rec in csv.DictReader(fh)))
    for prov in provs:
        b = _table_breakdown(breakdowns, prov)
        for r in b.rows:
            rows.append(["breakdown", prov, r.kind, "energy_pct", f"{r.energy_pct:.4f}"])
            rows.append(["breakdown", prov, r.kind, "time_pct", f"{r.time_pct:.4f}"])

    totals: dict[str, dict[str, list[float]]] = {}
    with run.path(data / "table8_predictions.csv").open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            acc = totals.setdefault(rec["provenance"], {}).setdefault(rec["network"], [0.0, 0.0])
            acc[0] += float(rec["predicted_mj"])
            acc[1] += float(rec["measured_mj"])
    for prov, nets in totals.items():
        pairs = [(p, m) for p, m in nets.values()]
        for net, (p, m) in nets.items():
            rows.append(["aggregate", prov, net, "predicted_mj", f"{p:.4f}"])
            rows.append(["aggregate", prov, net, "measured_mj", f"{m:.4f}"])
            rows.append(["aggregate", prov, net, "rel_accuracy_pct", f"{relative_accuracy(p, m):.4f}"])
        mean, std = mean_std([relative_accuracy(p, m) for p, m in pairs])
        rows.append(["aggregate", prov, "all", "rel_accuracy_mean", f"{mean:.4f}"])
        rows.append(["aggregate", prov, "all", "rel_accuracy_std", f"{std:.4f}"])
        rows.append(["aggregate", prov, "all", "rmspe_accuracy", f"{rmspe_accuracy(pairs):.4f}"])
    return _csv(rows)


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convwatt", description="ConvNet energy features, traces and models.")
    parser.add_argument("--version", action="version", version=f"convwatt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", help="write data here instead of standard output")
        p.add_argument("--seed", type=int, help=f"random seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
        return p

    p = add("features", cmd_features, "per-layer features and layer-type aggregates of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--degree", type=int, choices=(1, 2), default=1)

    p = add("integrate", cmd_integrate, "integrate a power trace over windows or annotations")
    p.add_argument("--trace", required=True)
    p.add_argument("--annotations")
    p.add_argument("--begin", type=float, help="window start (microseconds)")
    p.add_argument("--end", type=float, help="window end (microseconds)")
    p.add_argument("--summary", action="store_true", help="mean and std over runs per layer")

    p = add("breakdown", cmd_breakdown, "per-layer-kind energy and time shares")
    p.add_argument("--trace")
    p.add_argument("--annotations")
    p.add_argument("--table", help="CSV of provenance,layer_kind,energy_mj,time_s rows")
    p.add_argument("--provenance")

    p = add("train", cmd_train, "fit layer-type models and write a bundle")
    p.add_argument("--dataset", required=True)
    p.add_argument("--provenance")
    p.add_argument("--kinds", help="comma-separated kinds (default: all present)")

    p = add("predict", cmd_predict, "whole-network energy estimate from a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--provenance")

    p = add("select-features", cmd_select, "BIC subset selection path")
    p.add_argument("--dataset", required=True)
    p.add_argument("--degree", type=int, choices=(1, 2), default=1)
    p.add_argument("--method", choices=("auto", "exhaustive", "stepwise"), default="auto")
    p.add_argument("--features", help="comma-separated base features (default: the 12 base features)")
    p.add_argument("--kind", help="only rows of this layer kind")
    p.add_argument("--max-size", type=int)

    p = add("evaluate", cmd_evaluate, "cross-validated accuracy")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=("random", "networks"), default="random")
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--networks-per-fold", type=int, default=3)
    p.add_argument("--folds", type=int)
    p.add_argument("--test-networks", help="comma-separated networks forming the single test fold")
    p.add_argument("--metric", choices=("relacc", "rmspe", "both"), default="relacc")
    p.add_argument("--recipe", choices=("layer-type", "features"), default="layer-type")
    p.add_argument("--features", help="comma-separated features for --recipe features")
    p.add_argument("--kinds", help="comma-separated kinds for --recipe layer-type")

    p = add("report", cmd_report, "regenerate the bundled breakdown and accuracy tables")
    p.add_argument("--data-dir", help="directory with the bundled CSVs (default: package data)")
    return parser


def _show_warning(message, category, *_args, **_kwargs) -> None:
    print(f"warning: {category.__name__}: {message}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    run: _Run | None = None
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        warnings.showwarning = _show_warning
        try:
            run = _Run(resolve_seed(args.seed))
            write_output(args.func(args, run), args.out)
            return 0
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        finally:
            if run is not None:
                sys.stderr.write(run.footer())


if __name__ == "__main__":
    sys.exit(main())
