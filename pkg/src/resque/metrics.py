"""Graph-recovery scores: edge confusion counts, FDR/FPR/TPR/SHD, accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .graphs import Dag


@dataclass(frozen=True)
class EdgeConfusion:
    """Directed and skeleton-level agreement counts between two graphs.

    tp: estimated edges with the correct direction
    re: estimated edges whose reversal is a true edge
    fp: estimated edges absent from the true skeleton
    pe: total estimated edges (= tp + re + fp)
    tn: unordered pairs absent from both skeletons
    fn: true-skeleton pairs absent from the estimated skeleton
    """

    tp: int
    re: int
    fp: int
    pe: int
    tn: int
    fn: int


def confusion(truth: Dag, est: Dag) -> EdgeConfusion:
    if truth.p != est.p:
        raise ValueError(f"node count mismatch: {truth.p} vs {est.p}")
    truth_skel = {frozenset(e) for e in truth.edges}
    est_skel = {frozenset(e) for e in est.edges}
    tp = re = fp = 0
    for i, j in est.edges:
        if (i, j) in truth.edges:
            tp += 1
        elif (j, i) in truth.edges:
            re += 1
        else:
            fp += 1
    fn = len(truth_skel - est_skel)
    n_pairs = truth.p * (truth.p - 1) // 2
    tn = n_pairs - len(truth_skel | est_skel)
    return EdgeConfusion(tp=tp, re=re, fp=fp, pe=len(est.edges), tn=tn, fn=fn)


def metrics(c: EdgeConfusion) -> dict[str, float]:
    """FDR, FPR, TPR, and SHD from a confusion record.

    Degenerate denominators: an empty estimate scores FDR 0, an edgeless
    truth scores TPR 1, and a complete skeleton union scores FPR 0. FPR
    is reported exactly as defined (reversals count in the numerator
    only), so it can exceed 1.
    """
    fdr = (c.re + c.fp) / c.pe if c.pe > 0 else 0.0
    fpr = (c.re + c.fp) / (c.fp + c.tn) if (c.fp + c.tn) > 0 else 0.0
    tpr = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else 1.0
    shd = c.fp + c.fn + c.re
    return {"fdr": fdr, "fpr": fpr, "tpr": tpr, "shd": float(shd)}


def direction_accuracy(results: Sequence[tuple] | Iterable[tuple]) -> float:
    """Fraction of (truth, estimate) direction pairs that agree."""
    results = list(results)
    if not results:
        raise ValueError("no direction verdicts to score")
    return sum(1 for truth, est in results if truth == est) / len(results)
