"""Command-line interface: discover / simulate / pairs / metrics."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, apply_overrides, parse_config
from .engine import EngineError, discover
from .graphs import Dag
from .harness import ExperimentPlan, run_and_write
from .metrics import confusion, direction_accuracy, metrics
from .simulate import Dataset

log = logging.getLogger("resque")


class InputError(Exception):
    """User-facing problem with an input file or argument."""


def read_dataset(path: str | Path) -> Dataset:
    """Parse a delimited text file with a header row into a dataset.

    The delimiter is sniffed among comma, tab, and semicolon. Constant
    columns produce a warning but are kept; any non-numeric cell is an
    error naming its line and column.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise InputError(f"cannot read {path}: {err}") from err
    if not text.strip():
        raise InputError(f"{path}: file is empty")
    try:
        dialect = csv.Sniffer().sniff(text.splitlines()[0], delimiters=",\t;")
    except csv.Error:
        dialect = csv.excel
    rows = list(csv.reader(io_lines(text), dialect))
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one data row")
    names = tuple(name.strip() for name in rows[0])
    width = len(names)
    values = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise InputError(f"{path}: line {i} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            try:
                values[i - 2, j] = float(cell)
            except ValueError:
                raise InputError(
                    f"{path}: line {i}, column {j + 1}: non-numeric cell {cell.strip()!r}"
                ) from None
    if not np.all(np.isfinite(values)):
        i, j = np.argwhere(~np.isfinite(values))[0]
        raise InputError(f"{path}: line {int(i) + 2}, column {int(j) + 1}: non-finite value")
    for j in range(width):
        if np.all(values[:, j] == values[0, j]):
            log.warning("%s: column %r is constant", path, names[j])
    return Dataset(values=values, names=names)


def io_lines(text: str) -> list[str]:
    return [line for line in text.splitlines() if line.strip()]


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = parse_config(Path(args.config).read_text(), base=cfg)
    if getattr(args, "set", None):
        cfg = apply_overrides(cfg, args.set)
    return cfg


def cmd_discover(args) -> int:
    cfg = load_config(args)
    if args.method:
        cfg = apply_overrides(cfg, [f"edge_method={args.method}"])
    data = read_dataset(args.dataset)
    try:
        result = discover(data, cfg)
    except EngineError as err:
        print(f"discovery aborted: {err}", file=sys.stderr)
        diag = {"error": str(err), "rounds_completed": len(err.records)}
        if args.diagnostics:
            Path(args.diagnostics).write_text(json.dumps(diag, indent=2) + "\n")
        return 2
    edges_path = Path(args.edges) if args.edges else Path(args.dataset).with_suffix(".edges")
    edges_path.write_text(result.graph.to_edgelist())
    if args.order:
        Path(args.order).write_text(
            json.dumps({"order": list(result.order), "names": list(data.names)}) + "\n"
        )
    if args.diagnostics:
        Path(args.diagnostics).write_text(
            json.dumps(result.to_diagnostics(), indent=2, sort_keys=True) + "\n"
        )
    print(f"estimated {result.graph.num_edges} edges over {data.p} nodes -> {edges_path}")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    plan = ExperimentPlan(
        graphs=tuple(args.graphs.split(",")),
        ps=tuple(int(v) for v in args.p.split(",")),
        errors=tuple(args.errors.split(",")),
        n=args.n,
        reps=args.reps,
        base_seed=args.seed,
        outdir=args.outdir,
    )
    metrics_path, summary_path = run_and_write(
        plan, cfg, plan.outdir, workers=args.workers
    )
    print(f"wrote {metrics_path} and {summary_path}")
    return 0


def cmd_pairs(args) -> int:
    cfg = load_config(args)
    directory = Path(args.directory)
    files = sorted(directory.glob("*.csv")) if directory.is_dir() else []
    if not files:
        print(f"no CSV files found in {args.directory}", file=sys.stderr)
        return 1
    verdicts = []
    records = []
    skipped = 0
    for f in files:
        truth_path = f.with_suffix(".truth")
        try:
            data = read_dataset(f)
            if data.p != 2:
                raise InputError(f"{f}: expected exactly two columns, got {data.p}")
            truth = Dag.from_edgelist(truth_path.read_text(), p=2)
            if truth.num_edges != 1:
                raise InputError(f"{truth_path}: expected exactly one edge")
            result = discover(data, cfg)
        except (InputError, OSError, EngineError, ValueError) as err:
            log.warning("skipping %s: %s", f.name, err)
            skipped += 1
            continue
        est_edge = (result.order[0], result.order[1])
        true_edge = next(iter(truth.edges))
        verdicts.append((true_edge, est_edge))
        records.append(
            {
                "file": f.name,
                "truth": f"{true_edge[0]}->{true_edge[1]}",
                "estimate": f"{est_edge[0]}->{est_edge[1]}",
                "correct": est_edge == true_edge,
            }
        )
    if not verdicts:
        print("no scorable pairs", file=sys.stderr)
        return 1
    accuracy = direction_accuracy(verdicts)
    report = {
        "n_pairs": len(verdicts),
        "n_skipped": skipped,
        "accuracy": accuracy,
        "pairs": records,
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    else:
        print(text, end="")
    print(f"direction accuracy {accuracy:.3f} over {len(verdicts)} pairs", file=sys.stderr)
    return 0


def cmd_metrics(args) -> int:
    truth = Dag.from_edgelist(Path(args.truth).read_text(), p=args.p)
    est = Dag.from_edgelist(Path(args.est).read_text(), p=args.p)
    scores = metrics(confusion(truth, est))
    line = ",".join(f"{k}={scores[k]!r}" for k in ("fdr", "fpr", "tpr", "shd"))
    print(line)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["fdr", "fpr", "tpr", "shd"])
            writer.writerow([repr(scores[k]) for k in ("fdr", "fpr", "tpr", "shd")])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resque",
        description="Causal DAG discovery for location-scale noise data "
        "via sink peeling with composite quantile regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_disc = sub.add_parser("discover", help="estimate order and graph from a CSV dataset")
    p_disc.add_argument("dataset")
    p_disc.add_argument("--config", help="flat key=value config file")
    p_disc.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
    p_disc.add_argument("--edges", help="output edge-list path (default: <dataset>.edges)")
    p_disc.add_argument("--order", help="output order JSON path")
    p_disc.add_argument("--diagnostics", help="output per-round diagnostics JSON path")
    p_disc.add_argument("--method", choices=("concave", "threshold"))
    p_disc.set_defaults(func=cmd_discover)

    p_sim = sub.add_parser("simulate", help="run the synthetic benchmark grid")
    p_sim.add_argument("--graphs", default="random", help="comma list: random,tree,sf")
    p_sim.add_argument("--p", default="10", help="comma list of node counts")
    p_sim.add_argument("--errors", default="uniform", help="comma list: uniform,beta,gaussian")
    p_sim.add_argument("--n", type=int, default=200)
    p_sim.add_argument("--reps", type=int, default=20)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--outdir", default="results")
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--config")
    p_sim.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_sim.set_defaults(func=cmd_simulate)

    p_pairs = sub.add_parser("pairs", help="score cause-effect direction on two-column CSVs")
    p_pairs.add_argument("directory", help="folder of <name>.csv with <name>.truth sidecars")
    p_pairs.add_argument("--report", help="write JSON report here instead of stdout")
    p_pairs.add_argument("--config")
    p_pairs.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_pairs.set_defaults(func=cmd_pairs)

    p_met = sub.add_parser("metrics", help="score an estimated edge list against truth")
    p_met.add_argument("--truth", required=True)
    p_met.add_argument("--est", required=True)
    p_met.add_argument("--p", type=int, required=True)
    p_met.add_argument("--csv", help="also write a one-row CSV")
    p_met.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
