"""Directed acyclic graphs, topological layers, and causal-order checks.

Nodes are dense integer indices ``0..p-1``; an edge ``(i, j)`` means
``i -> j`` (``i`` is a parent of ``j``). Graphs are immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence


class CycleError(ValueError):
    """Raised when an edge set contains a directed cycle."""


class Dag:
    """Immutable directed acyclic graph over ``p`` integer-labelled nodes."""

    __slots__ = ("p", "edges", "_parents", "_children")

    def __init__(self, p: int, edges: Iterable[tuple[int, int]] = ()):
        p = int(p)
        if p < 0:
            raise ValueError("node count must be nonnegative")
        edge_set = frozenset((int(i), int(j)) for i, j in edges)
        for i, j in edge_set:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < p and 0 <= j < p):
                raise ValueError(f"edge ({i}, {j}) out of range for p={p}")
        self.p = p
        self.edges = edge_set
        parents: list[list[int]] = [[] for _ in range(p)]
        children: list[list[int]] = [[] for _ in range(p)]
        for i, j in sorted(edge_set):
            parents[j].append(i)
            children[i].append(j)
        self._parents = tuple(tuple(v) for v in parents)
        self._children = tuple(tuple(v) for v in children)
        if topological_layers(self, _validate=False) is None:
            raise CycleError("edge set contains a directed cycle")

    def parents(self, j: int) -> tuple[int, ...]:
        return self._parents[j]

    def children(self, i: int) -> tuple[int, ...]:
        return self._children[i]

    def is_sink(self, j: int) -> bool:
        return not self._children[j]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def relabel(self, mapping: Sequence[int]) -> "Dag":
        """Return a copy with node ``i`` renamed to ``mapping[i]``."""
        return Dag(self.p, ((mapping[i], mapping[j]) for i, j in self.edges))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dag) and self.p == other.p and self.edges == other.edges
        )

    def __hash__(self) -> int:
        return hash((self.p, self.edges))

    def __repr__(self) -> str:
        return f"Dag(p={self.p}, edges={sorted(self.edges)})"

    def to_json(self) -> str:
        return json.dumps(
            {"p": self.p, "edges": [list(e) for e in sorted(self.edges)]}
        )

    @classmethod
    def from_json(cls, text: str) -> "Dag":
        obj = json.loads(text)
        return cls(obj["p"], [tuple(e) for e in obj["edges"]])

    def to_edgelist(self) -> str:
        """One ``i j`` pair per line, zero-based, sorted."""
        return "".join(f"{i} {j}\n" for i, j in sorted(self.edges))

    @classmethod
    def from_edgelist(cls, text: str, p: int | None = None) -> "Dag":
        """Parse the ``i j`` per-line format; p defaults to max index + 1."""
        edges = []
        for ln, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {ln}: expected 'i j', got {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
        if p is None:
            p = 1 + max((max(i, j) for i, j in edges), default=-1)
        return cls(p, edges)


@dataclass(frozen=True)
class TopoLayers:
    """Ordered partition of nodes into successive sink sets (sinks first)."""

    layers: tuple[tuple[int, ...], ...]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def order(self) -> tuple[int, ...]:
        """Reverse-concatenated layers: a valid topological order."""
        out: list[int] = []
        for layer in reversed(self.layers):
            out.extend(layer)
        return tuple(out)


def topological_layers(g: Dag, _validate: bool = True) -> TopoLayers | None:
    """Peel successive sink sets off ``g``.

    Layer l is the sink set of the graph restricted to the nodes that
    remain after removing layers 1..l-1. Returns None instead of raising
    when ``_validate`` is false (used for the constructor's cycle check).
    """
    child_count = [len(g.children(j)) for j in range(g.p)]
    remaining = g.p
    active = [True] * g.p
    layers: list[tuple[int, ...]] = []
    while remaining > 0:
        layer = [j for j in range(g.p) if active[j] and child_count[j] == 0]
        if not layer:
            if _validate:
                raise CycleError("graph contains a directed cycle")
            return None
        for j in layer:
            active[j] = False
            for i in g.parents(j):
                child_count[i] -= 1
        remaining -= len(layer)
        layers.append(tuple(layer))
    return TopoLayers(tuple(layers))


def order_respects_dag(order: Sequence[int], g: Dag) -> bool:
    """True iff no node appears before any of its strict ancestors.

    ``order`` lists node indices from most-upstream to most-downstream;
    every edge must point from an earlier to a later position.
    """
    if sorted(order) != list(range(g.p)):
        raise ValueError("order is not a permutation of the node indices")
    pos = {node: k for k, node in enumerate(order)}
    return all(pos[i] < pos[j] for i, j in g.edges)


def ancestors(g: Dag, j: int) -> frozenset[int]:
    """Strict ancestors of ``j`` by breadth-first search over parents."""
    if not 0 <= j < g.p:
        raise ValueError(f"node {j} out of range")
    seen: set[int] = set()
    frontier = list(g.parents(j))
    while frontier:
        i = frontier.pop()
        if i not in seen:
            seen.add(i)
            frontier.extend(g.parents(i))
    return frozenset(seen)
