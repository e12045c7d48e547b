"""Run configuration: every tunable of the discovery pipeline in one place.

The file format is flat ``key = value`` text; tuples are comma-separated.
Every key has a default, so an empty config is valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .quantile import DEFAULT_TAUS, FoldedPenalty, QuantileGrid


@dataclass(frozen=True)
class RunConfig:
    # quantile grid
    taus: tuple[float, ...] = DEFAULT_TAUS
    tau0: float = 0.05
    # penalty scaling constants
    lambda1_C: float = 1.0
    lambda2_C: float = 0.16
    lambda3_C: float = 0.16
    # concave edge-selection stage
    lambda1c_C: float = 1.0
    lambda2c_C: float = 1.0
    # folded concave penalty
    penalty_family: str = "scad"
    penalty_a: float = 3.7
    # sparsity proxies; s1: 0 means max(1, round(log n)) at run time,
    # s2: 0 means the scale-design width (group-size scaling for the
    # fused penalty)
    s1_proxy: float = 1.0
    s2_proxy: float = 0.0
    # feature maps
    mean_degree: int = 1
    scale_degree: int = 1
    standardize: bool = True
    # first stage
    clip_floor: float = 1e-10
    lasso_tol: float = 1e-7
    lasso_max_iter: int = 10000
    # quantile stage solver
    admm_rho: float = 2.0
    admm_alpha: float = 1.8
    admm_tol: float = 1e-5
    admm_max_iter: int = 20000
    collapse_tol: float = 1e-6
    # edge recovery
    edge_method: str = "concave"
    t_beta_mult: float = 1.0
    t_gamma_mult: float = 1.0
    # iterated reweighting (1 = single step)
    lla_steps: int = 1
    # execution
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        QuantileGrid(self.taus, self.tau0)  # validates levels
        FoldedPenalty(self.penalty_family, 1.0, self.penalty_a)
        for name in ("lasso_tol", "admm_tol", "collapse_tol", "clip_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in (
            "lambda1_C",
            "lambda2_C",
            "lambda3_C",
            "lambda1c_C",
            "lambda2c_C",
            "t_beta_mult",
            "t_gamma_mult",
            "s1_proxy",
            "s2_proxy",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.edge_method not in ("concave", "threshold"):
            raise ValueError("edge_method must be 'concave' or 'threshold'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.lla_steps < 1:
            raise ValueError("lla_steps must be >= 1")
        if not 1 <= self.mean_degree <= 3 or not 1 <= self.scale_degree <= 3:
            raise ValueError("feature degrees must be in 1..3")

    def grid(self) -> QuantileGrid:
        return QuantileGrid(self.taus, self.tau0)

    def s1(self, n: int) -> float:
        return self.s1_proxy if self.s1_proxy > 0 else max(1.0, round(math.log(n)))

    def s2(self, n: int, d_scale: int = 1) -> float:
        return self.s2_proxy if self.s2_proxy > 0 else max(1.0, float(d_scale))


_BOOL_KEYS = {"standardize"}
_TUPLE_KEYS = {"taus"}
_INT_KEYS = {
    "lasso_max_iter",
    "admm_max_iter",
    "mean_degree",
    "scale_degree",
    "lla_steps",
    "seed",
    "workers",
}
_STR_KEYS = {"penalty_family", "edge_method"}


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if f.name in _TUPLE_KEYS:
            text = ",".join(repr(v) for v in val)
        elif f.name in _BOOL_KEYS:
            text = "true" if val else "false"
        else:
            text = repr(val) if isinstance(val, float) else str(val)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def _parse_value(key: str, text: str):
    text = text.strip()
    if key in _TUPLE_KEYS:
        return tuple(float(v) for v in text.split(",") if v.strip())
    if key in _BOOL_KEYS:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean for {key}: {text!r}")
    if key in _INT_KEYS:
        return int(text)
    if key in _STR_KEYS:
        return text
    return float(text)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines on top of ``base`` (or the defaults)."""
    cfg = base or RunConfig()
    known = {f.name for f in fields(cfg)}
    overrides = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {ln}: unknown config key {key!r}")
        overrides[key] = _parse_value(key, val)
    return replace(cfg, **overrides)


def apply_overrides(cfg: RunConfig, pairs: list[str]) -> RunConfig:
    """Apply ``key=value`` strings (command-line style) to a config."""
    overrides = {}
    known = {f.name for f in fields(cfg)}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override must look like key=value, got {pair!r}")
        key, val = (part.strip() for part in pair.split("=", 1))
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        overrides[key] = _parse_value(key, val)
    return replace(cfg, **overrides)
