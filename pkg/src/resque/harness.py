"""Batch simulation harness: scenario grid, replications, metric tables.

Each (scenario, replication) task owns an independently derived RNG, so
results are identical for any worker-pool width; rows are sorted before
writing and floats serialized with ``repr``, which makes the output
files byte-reproducible for a fixed configuration and seed.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .config import RunConfig
from .engine import EngineError, discover
from .metrics import confusion, metrics
from .simulate import (
    ERROR_FAMILIES,
    gen_random_dag,
    gen_scale_free_dag,
    gen_tree_dag,
    sample_data,
    sample_sem_params,
)

log = logging.getLogger(__name__)

GRAPH_KINDS = ("random", "tree", "sf")

ROW_FIELDS = (
    "scenario",
    "graph",
    "p",
    "n",
    "errors",
    "rep",
    "method",
    "status",
    "fdr",
    "fpr",
    "tpr",
    "shd",
)

SUMMARY_FIELDS = (
    "scenario",
    "graph",
    "p",
    "n",
    "errors",
    "method",
    "rep_count",
    "failed_count",
    "mean_fdr",
    "mean_fpr",
    "mean_tpr",
    "mean_shd",
)


@dataclass(frozen=True)
class ExperimentPlan:
    """Scenario grid (graph kind x p x error family) with replications."""

    graphs: tuple[str, ...] = ("random",)
    ps: tuple[int, ...] = (10,)
    errors: tuple[str, ...] = ("uniform",)
    n: int = 200
    reps: int = 20
    base_seed: int = 0
    outdir: str = "results"

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        for g in self.graphs:
            if g not in GRAPH_KINDS:
                raise ValueError(f"unknown graph kind {g!r}")
        for e in self.errors:
            if e not in ERROR_FAMILIES:
                raise ValueError(f"unknown error family {e!r}")
        if any(p < 1 for p in self.ps):
            raise ValueError("p must be >= 1")

    def cells(self) -> list[tuple[str, int, str]]:
        return [
            (g, p, e) for g in self.graphs for p in self.ps for e in self.errors
        ]


def generate_truth(kind: str, p: int, rng: np.random.Generator):
    """Paper-mirroring generator settings per graph kind and size."""
    if kind == "random":
        return gen_random_dag(p, 1.0 / p, rng)
    if kind == "tree":
        return gen_tree_dag(p, 2 if p <= 20 else 3, rng)
    if kind == "sf":
        return gen_scale_free_dag(p, 1, rng)
    raise ValueError(f"unknown graph kind {kind!r}")


def _rep_rng(plan: ExperimentPlan, cell_index: int, rep: int) -> np.random.Generator:
    seq = np.random.SeedSequence(plan.base_seed, spawn_key=(cell_index, rep))
    return np.random.default_rng(seq)


def run_replication(plan: ExperimentPlan, cfg: RunConfig, cell_index: int, rep: int) -> dict:
    kind, p, errors = plan.cells()[cell_index]
    rng = _rep_rng(plan, cell_index, rep)
    truth = generate_truth(kind, p, rng)
    spec = sample_sem_params(truth, rng, errors=errors)
    data = sample_data(spec, plan.n, rng)
    row = {
        "scenario": f"{kind}-p{p}-{errors}",
        "graph": kind,
        "p": p,
        "n": plan.n,
        "errors": errors,
        "rep": rep,
        "method": cfg.edge_method,
    }
    try:
        result = discover(data, cfg)
    except EngineError as err:
        log.warning("replication failed (%s rep %s): %s", row["scenario"], rep, err)
        row.update(status="failed", fdr="", fpr="", tpr="", shd="")
        return row
    scores = metrics(confusion(truth, result.graph))
    row.update(
        status="ok",
        fdr=repr(scores["fdr"]),
        fpr=repr(scores["fpr"]),
        tpr=repr(scores["tpr"]),
        shd=repr(scores["shd"]),
    )
    return row


def _task(args):
    plan, cfg, cell_index, rep = args
    return run_replication(plan, cfg, cell_index, rep)


def run_plan(plan: ExperimentPlan, cfg: RunConfig, workers: int = 1) -> list[dict]:
    """All (cell, rep) tasks; output order is schedule-independent."""
    tasks = [
        (plan, cfg, ci, rep)
        for ci in range(len(plan.cells()))
        for rep in range(plan.reps)
    ]
    if workers > 1:
        with get_context("fork").Pool(workers) as pool:
            rows = pool.map(_task, tasks)
    else:
        rows = [_task(t) for t in tasks]
    rows.sort(key=lambda r: (r["scenario"], r["rep"]))
    return rows


def summarize(rows: list[dict]) -> list[dict]:
    """Per-scenario means over successful replications."""
    cells: dict[str, list[dict]] = {}
    for row in rows:
        cells.setdefault(row["scenario"], []).append(row)
    out = []
    for scenario in sorted(cells):
        block = cells[scenario]
        ok = [r for r in block if r["status"] == "ok"]
        summary = {
            "scenario": scenario,
            "graph": block[0]["graph"],
            "p": block[0]["p"],
            "n": block[0]["n"],
            "errors": block[0]["errors"],
            "method": block[0]["method"],
            "rep_count": len(block),
            "failed_count": len(block) - len(ok),
        }
        for name in ("fdr", "fpr", "tpr", "shd"):
            vals = [float(r[name]) for r in ok]
            summary[f"mean_{name}"] = repr(float(np.mean(vals))) if vals else ""
        out.append(summary)
    return out


def _write_csv(path: Path, rows: list[dict], fields: tuple[str, ...]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in fields})
    path.write_text(buf.getvalue())


def run_and_write(
    plan: ExperimentPlan, cfg: RunConfig, outdir: str | Path, workers: int = 1
) -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = run_plan(plan, cfg, workers=workers)
    metrics_path = outdir / "metrics.csv"
    summary_path = outdir / "summary.csv"
    _write_csv(metrics_path, rows, ROW_FIELDS)
    _write_csv(summary_path, summarize(rows), SUMMARY_FIELDS)
    return metrics_path, summary_path
