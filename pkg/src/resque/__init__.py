"""Causal DAG discovery from heteroscedastic data.

Two-stage sink peeling: a penalized mean regression builds log-absolute
residuals per node, a composite quantile regression with fused-level
shrinkage tests whether the scale coefficients are invariant across
quantile levels, and nodes that pass peel off as sinks. Edges are then
recovered per sink via reweighted concave selection or hard
thresholding.
"""

from ._kernels import BACKEND
from .config import RunConfig, apply_overrides, format_config, parse_config
from .engine import DiscoveryResult, EngineError, discover, recover_graph
from .graphs import Dag, TopoLayers, ancestors, order_respects_dag, topological_layers
from .harness import ExperimentPlan, run_and_write, run_plan, summarize
from .metrics import EdgeConfusion, confusion, direction_accuracy, metrics
from .quantile import FoldedPenalty, QuantileGrid, check_loss, cqr_init, cqr_lla
from .simulate import (
    Dataset,
    SemSpec,
    gen_random_dag,
    gen_scale_free_dag,
    gen_tree_dag,
    sample_data,
    sample_sem_params,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Dag",
    "Dataset",
    "DiscoveryResult",
    "EdgeConfusion",
    "EngineError",
    "ExperimentPlan",
    "FoldedPenalty",
    "QuantileGrid",
    "RunConfig",
    "SemSpec",
    "TopoLayers",
    "ancestors",
    "apply_overrides",
    "check_loss",
    "confusion",
    "cqr_init",
    "cqr_lla",
    "direction_accuracy",
    "discover",
    "format_config",
    "gen_random_dag",
    "gen_scale_free_dag",
    "gen_tree_dag",
    "metrics",
    "order_respects_dag",
    "parse_config",
    "recover_graph",
    "run_and_write",
    "run_plan",
    "sample_data",
    "sample_sem_params",
    "summarize",
    "topological_layers",
]
