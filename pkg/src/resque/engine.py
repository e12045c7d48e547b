"""Iterative sink detection and graph recovery.

Each round regresses every active node on the others (mean stage, then
composite quantile stage on the log-absolute residuals), flags nodes
whose quantile coefficients collapse to a common vector, peels those
off as sinks, and recovers their incoming edges from the same round's
fits. Peeling repeats until no nodes remain; the layers come out
sinks-first and reverse-concatenate into a topological order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .config import RunConfig
from .features import ColumnScaler, FeatureMap
from .graphs import Dag, TopoLayers
from .lasso import LogResiduals, lambda1_default, lasso_fit, log_abs_residuals
from .quantile import FoldedPenalty, cqr_init, cqr_lla, lambda23_default


class EngineError(RuntimeError):
    """Raised when a round cannot select a sink; carries partial records."""

    def __init__(self, message: str, records: list | None = None):
        super().__init__(message)
        self.records = records if records is not None else []


@dataclass
class NodeFit:
    """Both regression stages for one node within one peeling round.

    Coefficients are on the standardized design scale; ``design`` lists
    the candidate regressor nodes (ascending) that own the basis blocks.
    """

    node: int
    design: tuple[int, ...]
    beta: np.ndarray
    intercept: float
    beta_refit: np.ndarray
    intercept_refit: float
    gamma: np.ndarray
    b: np.ndarray
    discrepancy: float
    collapsed: bool
    flagged: bool
    flags: tuple[str, ...]
    clip_count: int
    lasso_iters: int
    cqr_iters: int
    fused_weights: np.ndarray | None


@dataclass
class IterationRecord:
    """Audit trail for one peeling round."""

    active: tuple[int, ...]
    lambda1: float
    lambda2: float
    lambda3: float
    fits: dict[int, NodeFit]
    sinks: tuple[int, ...]


@dataclass
class DiscoveryResult:
    layers: TopoLayers
    order: tuple[int, ...]
    graph: Dag
    records: list[IterationRecord]

    def to_diagnostics(self) -> dict:
        rounds = []
        for rec in self.records:
            nodes = {}
            for j, fit in sorted(rec.fits.items()):
                nodes[str(j)] = {
                    "discrepancy": fit.discrepancy,
                    "collapsed": fit.collapsed,
                    "flagged": fit.flagged,
                    "flags": list(fit.flags),
                    "clip_count": fit.clip_count,
                    "lasso_iters": fit.lasso_iters,
                    "cqr_iters": fit.cqr_iters,
                }
            rounds.append(
                {
                    "active": list(rec.active),
                    "lambda1": rec.lambda1,
                    "lambda2": rec.lambda2,
                    "lambda3": rec.lambda3,
                    "sinks": list(rec.sinks),
                    "nodes": nodes,
                }
            )
        return {
            "backend": _kernels.BACKEND,
            "order": list(self.order),
            "layers": [list(layer) for layer in self.layers.layers],
            "rounds": rounds,
        }


def _node_design(X: np.ndarray, S: tuple[int, ...], j: int, cfg: RunConfig):
    """Expanded and optionally standardized designs for node j within S."""
    others = tuple(i for i in S if i != j)
    n = X.shape[0]
    if not others:
        empty = np.zeros((n, 0))
        return others, empty, empty
    sub = X[:, others]
    phi = FeatureMap(cfg.mean_degree).expand(sub)
    psi = FeatureMap(cfg.scale_degree).expand(sub)
    if cfg.standardize:
        phi = ColumnScaler().fit_transform(phi)
        psi = ColumnScaler().fit_transform(psi)
    return others, phi, psi


def _round_lambdas(n: int, p_active: int, cfg: RunConfig):
    lam1 = lambda1_default(n, p_active, cfg.lambda1_C)
    d_scale = cfg.scale_degree * max(p_active - 1, 1)
    lam2, lam3 = lambda23_default(
        n, p_active, cfg.s1(n), cfg.s2(n, d_scale), cfg.lambda2_C, cfg.lambda3_C
    )
    return lam1, lam2, lam3


def fit_node(
    X: np.ndarray,
    S: tuple[int, ...],
    j: int,
    cfg: RunConfig,
    lam1: float,
    lam2: float,
    lam3: float,
) -> NodeFit:
    others, phi, psi = _node_design(X, S, j, cfg)
    y = X[:, j]
    flags: list[str] = []

    mean_fit = lasso_fit(
        phi, y, lam1, tol=cfg.lasso_tol, max_iter=cfg.lasso_max_iter
    )
    if not mean_fit.converged:
        flags.append("lasso_not_converged")
    # unpenalized refit on the selected support: shrinkage bias in the
    # residuals would leak location structure into the quantile stage
    support = np.nonzero(mean_fit.beta)[0]
    beta_refit = np.zeros_like(mean_fit.beta)
    if support.size:
        refit = lasso_fit(
            phi[:, support], y, 0.0, tol=cfg.lasso_tol, max_iter=cfg.lasso_max_iter
        )
        beta_refit[support] = refit.beta
        intercept_refit = refit.intercept
        logres = log_abs_residuals(
            refit, phi[:, support], y, clip_floor=cfg.clip_floor
        )
    else:
        intercept_refit = float(y.mean())
        resid = np.abs(y - intercept_refit)
        clip = int((resid < cfg.clip_floor).sum())
        logres = LogResiduals(
            y_hat=np.log(np.maximum(resid, cfg.clip_floor)), clip_count=clip
        )

    grid = cfg.grid()
    solver = dict(
        rho=cfg.admm_rho,
        alpha=cfg.admm_alpha,
        tol=cfg.admm_tol,
        max_iter=cfg.admm_max_iter,
        collapse_tol_base=cfg.collapse_tol,
    )
    fit = cqr_init(psi, logres.y_hat, grid, lam2, **solver)
    cqr_iters = fit.n_iter
    penalty = FoldedPenalty(cfg.penalty_family, lam3, cfg.penalty_a)
    for _ in range(cfg.lla_steps):
        fit = cqr_lla(psi, logres.y_hat, grid, lam2, penalty, fit, **solver)
        cqr_iters += fit.n_iter
    flags.extend(fit.flags)

    return NodeFit(
        node=j,
        design=others,
        beta=mean_fit.beta,
        intercept=mean_fit.intercept,
        beta_refit=beta_refit,
        intercept_refit=intercept_refit,
        gamma=fit.gamma,
        b=fit.b,
        discrepancy=fit.discrepancy,
        collapsed=fit.collapsed,
        flagged=bool(flags),
        flags=tuple(flags),
        clip_count=logres.clip_count,
        lasso_iters=mean_fit.n_iter,
        cqr_iters=cqr_iters,
        fused_weights=fit.fused_weights,
    )


def fit_all_nodes(
    data, S, cfg: RunConfig = RunConfig()
) -> dict[int, NodeFit]:
    """Fit every node in the active set against the rest of it.

    Node fits only read shared data, so they run on a thread pool when
    ``cfg.workers > 1``; results are keyed by node and do not depend on
    the schedule.
    """
    X = np.asarray(getattr(data, "values", data), dtype=np.float64)
    S = tuple(sorted(int(j) for j in S))
    if not S:
        raise ValueError("active set must be nonempty")
    n = X.shape[0]
    lam1, lam2, lam3 = _round_lambdas(n, len(S), cfg)
    if cfg.workers > 1 and len(S) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {
                j: pool.submit(fit_node, X, S, j, cfg, lam1, lam2, lam3)
                for j in S
            }
            return {j: fut.result() for j, fut in futures.items()}
    return {j: fit_node(X, S, j, cfg, lam1, lam2, lam3) for j in S}


def select_sinks(fits: dict[int, NodeFit], cfg: RunConfig = RunConfig()):
    """Collapsed nodes win; otherwise the smallest-discrepancy node.

    Flagged fits are never selected. Raises EngineError when every fit
    in the round is flagged.
    """
    if not fits:
        raise ValueError("no fits supplied")
    usable = {j: f for j, f in fits.items() if not f.flagged}
    if not usable:
        detail = "; ".join(
            f"{j}:{','.join(f.flags)}" for j, f in sorted(fits.items())
        )
        raise EngineError(f"all node fits flagged this round ({detail})")
    collapsed = sorted(j for j, f in usable.items() if f.collapsed)
    if collapsed:
        return collapsed
    best = min(usable.items(), key=lambda kv: (kv[1].discrepancy, kv[0]))
    return [best[0]]


def _selection_lambdas(n: int, p_active: int, cfg: RunConfig):
    logterm = math.log(max(n, p_active))
    s1 = cfg.s1(n)
    s2 = cfg.s2(n, cfg.scale_degree * max(p_active - 1, 1))
    lam1c = cfg.lambda1c_C * math.sqrt(s1 * logterm / n)
    lam2c = cfg.lambda2c_C * math.sqrt(s1 * s2 * logterm / n)
    return lam1c, lam2c


def _coords_to_nodes(
    support: np.ndarray, design: tuple[int, ...], degree: int
) -> set[int]:
    fmap = FeatureMap(degree)
    return {design[fmap.source_of(int(q), len(design))] for q in support}


def recover_edges_concave(
    X: np.ndarray,
    S: tuple[int, ...],
    allowed: set[int],
    fit: NodeFit,
    cfg: RunConfig,
) -> set[int]:
    """Reweighted selection: refit both stages with concave-derivative
    weights frozen at the round's initial estimates, then read node
    support off nonzero coordinates."""
    others, phi, psi = _node_design(X, S, fit.node, cfg)
    if not others:
        return set()
    n = X.shape[0]
    y = X[:, fit.node]
    lam1c, lam2c = _selection_lambdas(n, len(S), cfg)

    pen_b = FoldedPenalty(cfg.penalty_family, lam1c, cfg.penalty_a)
    w_b = np.asarray(pen_b.derivative(np.abs(fit.beta)), dtype=np.float64)
    refit = lasso_fit(
        phi,
        y,
        lam1c,
        tol=cfg.lasso_tol,
        max_iter=cfg.lasso_max_iter,
        coord_penalty=w_b,
    )
    support = np.nonzero(refit.beta)[0]
    parents = _coords_to_nodes(support, others, cfg.mean_degree)

    resid = y - fit.intercept_refit - (
        phi @ fit.beta_refit if phi.shape[1] else 0.0
    )
    yhat = np.log(np.maximum(np.abs(resid), cfg.clip_floor))
    pen_g = FoldedPenalty(cfg.penalty_family, lam2c, cfg.penalty_a)
    w_g = np.asarray(pen_g.derivative(np.abs(fit.gamma[0])), dtype=np.float64)
    gamma_c, _, _, _ = _kernels.qr_admm(
        psi,
        yhat,
        cfg.taus[0],
        w_g,
        cfg.admm_rho / n,
        cfg.admm_alpha,
        cfg.admm_tol,
        cfg.admm_max_iter,
    )
    support_g = np.nonzero(gamma_c)[0]
    parents |= _coords_to_nodes(support_g, others, cfg.scale_degree)
    return parents & allowed


def recover_edges_threshold(
    fit: NodeFit,
    S: tuple[int, ...],
    allowed: set[int],
    cfg: RunConfig,
    n: int,
) -> set[int]:
    """Keep coordinates whose standardized coefficients clear the
    level-scaled thresholds; deterministic, no extra solves."""
    if not fit.design:
        return set()
    lam1c, lam2c = _selection_lambdas(n, len(S), cfg)
    t_beta = cfg.t_beta_mult * lam1c * math.sqrt(cfg.s1(n))
    t_gamma = cfg.t_gamma_mult * lam2c
    support = np.nonzero(np.abs(fit.beta) >= t_beta)[0]
    parents = _coords_to_nodes(support, fit.design, cfg.mean_degree)
    support_g = np.nonzero(np.abs(fit.gamma[0]) >= t_gamma)[0]
    parents |= _coords_to_nodes(support_g, fit.design, cfg.scale_degree)
    return parents & allowed


def _round_edges(
    X: np.ndarray,
    rec: IterationRecord,
    cfg: RunConfig,
    method: str,
) -> list[tuple[int, int]]:
    allowed = set(rec.active) - set(rec.sinks)
    edges = []
    for j in rec.sinks:
        fit = rec.fits[j]
        if method == "concave":
            parents = recover_edges_concave(X, rec.active, allowed, fit, cfg)
        else:
            parents = recover_edges_threshold(
                fit, rec.active, allowed, cfg, X.shape[0]
            )
        edges.extend((i, j) for i in sorted(parents))
    return edges


def recover_graph(data, records, cfg: RunConfig, method: str | None = None) -> Dag:
    """Re-run edge recovery over stored round records (either branch)."""
    X = np.asarray(getattr(data, "values", data), dtype=np.float64)
    method = method or cfg.edge_method
    if method not in ("concave", "threshold"):
        raise ValueError("method must be 'concave' or 'threshold'")
    edges: list[tuple[int, int]] = []
    p = X.shape[1]
    for rec in records:
        edges.extend(_round_edges(X, rec, cfg, method))
    return Dag(p, edges)


def discover(data, cfg: RunConfig = RunConfig()) -> DiscoveryResult:
    """Full pipeline: peel sinks until the active set empties.

    Raises EngineError (with partial records attached) if some round
    cannot produce a sink. The active set shrinks by at least one node
    per round, so at most p rounds run.
    """
    X = np.asarray(getattr(data, "values", data), dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise ValueError("data must be an n x p matrix with n >= 2, p >= 1")
    if not np.all(np.isfinite(X)):
        raise ValueError("data must be finite")
    p = X.shape[1]
    n = X.shape[0]
    S: tuple[int, ...] = tuple(range(p))
    records: list[IterationRecord] = []
    layers: list[tuple[int, ...]] = []
    edges: list[tuple[int, int]] = []
    while S:
        lam1, lam2, lam3 = _round_lambdas(n, len(S), cfg)
        fits = fit_all_nodes(X, S, cfg)
        try:
            sinks = select_sinks(fits, cfg)
        except EngineError as err:
            err.records = records
            raise
        rec = IterationRecord(
            active=S,
            lambda1=lam1,
            lambda2=lam2,
            lambda3=lam3,
            fits=fits,
            sinks=tuple(sinks),
        )
        edges.extend(_round_edges(X, rec, cfg, cfg.edge_method))
        records.append(rec)
        layers.append(tuple(sinks))
        S = tuple(i for i in S if i not in set(sinks))
    topo = TopoLayers(tuple(layers))
    return DiscoveryResult(
        layers=topo,
        order=topo.order(),
        graph=Dag(p, edges),
        records=records,
    )
