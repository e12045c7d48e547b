"""Synthetic ground truth: random/tree/scale-free DAGs and SEM sampling.

Data follow a linear location, log-linear scale model: each node equals
a linear combination of its parents plus ``exp(linear scale term)``
times an independent error. Coefficient supports reproduce the weak
heterogeneity regime (mean weights in ``+/-[0.5, 1]``, scale weights in
``+/-[1/6, 1/4]``) unless overridden.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import Dag, topological_layers

ERROR_FAMILIES = ("uniform", "beta", "gaussian")

BETA_SHAPE = (2.0, 3.0)
BETA_MEAN = BETA_SHAPE[0] / (BETA_SHAPE[0] + BETA_SHAPE[1])


@dataclass(frozen=True)
class SemSpec:
    """Sampled structural equation model: graph plus per-node weights."""

    dag: Dag
    beta: tuple[np.ndarray, ...]
    gamma: tuple[np.ndarray, ...]
    errors: str = "uniform"

    def __post_init__(self):
        if self.errors not in ERROR_FAMILIES:
            raise ValueError(f"unknown error family {self.errors!r}")
        for j in range(self.dag.p):
            k = len(self.dag.parents(j))
            if len(self.beta[j]) != k or len(self.gamma[j]) != k:
                raise ValueError(f"coefficient length mismatch at node {j}")


@dataclass(frozen=True)
class Dataset:
    """An n x p observation matrix with column names."""

    values: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValueError("dataset must be a nonempty 2-d matrix")
        if not np.all(np.isfinite(values)):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "values", values)
        names = self.names or tuple(f"x{j}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise ValueError("column name count mismatch")
        object.__setattr__(self, "names", tuple(names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def gen_random_dag(p: int, s: float, rng: np.random.Generator) -> Dag:
    """Upper-triangular Bernoulli(s) adjacency: each i < j edge i -> j."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("edge probability must lie in [0, 1]")
    u = rng.random((p, p))
    edges = [(i, j) for i in range(p) for j in range(i + 1, p) if u[i, j] < s]
    return Dag(p, edges)


def gen_tree_dag(p: int, k: int, rng: np.random.Generator) -> Dag:
    """Complete k-ary tree with uniformly relabelled nodes, root -> leaves."""
    if k < 1:
        raise ValueError("k must be >= 1")
    labels = rng.permutation(p)
    # position m's parent in a level-order complete k-ary tree is (m-1)//k
    edges = [(labels[(m - 1) // k], labels[m]) for m in range(1, p)]
    return Dag(p, edges)


def gen_scale_free_dag(p: int, k: int, rng: np.random.Generator) -> Dag:
    """Preferential attachment, edges oriented old node -> new node.

    Each arriving node connects to ``min(k, #existing)`` distinct
    existing vertices chosen with probability proportional to degree
    (uniform while all degrees are zero). Orienting into the newcomer
    makes the result acyclic by construction.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if p < 1:
        raise ValueError("p must be >= 1")
    degree = np.zeros(p, dtype=np.float64)
    edges: list[tuple[int, int]] = []
    for new in range(1, p):
        m = min(k, new)
        weights = degree[:new].copy()
        chosen: list[int] = []
        for _ in range(m):
            total = weights.sum()
            if total <= 0:
                probs = np.full(new, 1.0 / new)
                probs[chosen] = 0.0
                probs /= probs.sum()
            else:
                probs = weights / total
            pick = int(rng.choice(new, p=probs))
            chosen.append(pick)
            weights[pick] = 0.0
        for old in chosen:
            edges.append((old, new))
            degree[old] += 1
            degree[new] += 1
    return Dag(p, edges)


def _signed_uniform(
    rng: np.random.Generator, lo: float, hi: float, size: int
) -> np.ndarray:
    mag = rng.uniform(lo, hi, size=size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return mag * sign


def sample_sem_params(
    dag: Dag,
    rng: np.random.Generator,
    errors: str = "uniform",
    beta_range: tuple[float, float] = (0.5, 1.0),
    gamma_range: tuple[float, float] = (1.0 / 6.0, 1.0 / 4.0),
) -> SemSpec:
    """Draw mean/scale weights with equiprobable signs on the given supports."""
    beta = []
    gamma = []
    for j in range(dag.p):
        npar = len(dag.parents(j))
        beta.append(_signed_uniform(rng, *beta_range, size=npar))
        gamma.append(_signed_uniform(rng, *gamma_range, size=npar))
    return SemSpec(dag=dag, beta=tuple(beta), gamma=tuple(gamma), errors=errors)


def _sample_errors(
    family: str, n: int, p: int, rng: np.random.Generator
) -> np.ndarray:
    if family == "uniform":
        return rng.uniform(-1.0, 1.0, size=(n, p))
    if family == "beta":
        return rng.beta(*BETA_SHAPE, size=(n, p)) - BETA_MEAN
    if family == "gaussian":
        return rng.standard_normal(size=(n, p))
    raise ValueError(f"unknown error family {family!r}")


def sample_data(spec: SemSpec, n: int, rng: np.random.Generator) -> Dataset:
    """Evaluate the SEM in topological order on i.i.d. errors."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = spec.dag.p
    eps = _sample_errors(spec.errors, n, p, rng)
    X = np.zeros((n, p), dtype=np.float64)
    for j in topological_layers(spec.dag).order():
        pa = list(spec.dag.parents(j))
        if pa:
            loc = X[:, pa] @ spec.beta[j]
            scale = np.exp(X[:, pa] @ spec.gamma[j])
        else:
            loc, scale = 0.0, 1.0
        X[:, j] = loc + scale * eps[:, j]
    return Dataset(values=X)
