"""Task-relationship graph: construction, pruning, clustering and export."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .linalg import incidence_matrix, laplacian_from_edges


@dataclass(frozen=True, eq=False)
class TaskGraph:
    """Weighted undirected graph over ``n_tasks`` nodes.

    ``edges`` is an (m, 2) integer array with ``i < j`` in every row, sorted
    lexicographically; ``weights`` holds one value in [0, 1] per edge.
    """

    n_tasks: int
    edges: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if edges.shape[0] != weights.shape[0]:
            raise ValueError("one weight per edge required")
        if np.any(edges[:, 0] >= edges[:, 1]):
            raise ValueError("edges must satisfy i < j (no self-loops)")
        if edges.size and (edges.min() < 0 or edges.max() >= self.n_tasks):
            raise ValueError("edge index out of range")
        if np.any(weights < 0) or np.any(weights > 1) or not np.all(np.isfinite(weights)):
            raise ValueError("edge weights must lie in [0, 1]")
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges, weights = edges[order], weights[order]
        if len(edges) > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
            raise ValueError("duplicate edge")
        edges.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def with_weights(self, weights) -> "TaskGraph":
        return TaskGraph(self.n_tasks, self.edges, weights)

    def incidence(self):
        return incidence_matrix(self.n_tasks, self.edges)

    def laplacian(self, weights=None):
        w = self.weights if weights is None else weights
        return laplacian_from_edges(self.incidence(), w)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_tasks, self.n_tasks))
        if self.n_edges:
            i, j = self.edges.T
            a[i, j] = self.weights
            a[j, i] = self.weights
        return a

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_tasks)

    def __eq__(self, other):
        if not isinstance(other, TaskGraph):
            return NotImplemented
        return (
            self.n_tasks == other.n_tasks
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.weights, other.weights)
        )

    @classmethod
    def from_adjacency(cls, adjacency, tol=0.0) -> "TaskGraph":
        a = np.asarray(adjacency, dtype=float)
        i, j = np.nonzero(np.triu(a, 1) > tol)
        return cls(a.shape[0], np.column_stack([i, j]), a[i, j])


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    n_clusters: int


def knn_graph(models, k: int) -> TaskGraph:
    """Union-symmetrized k-nearest-neighbour graph over task weight vectors."""
    V = np.asarray(models, dtype=float)
    n = V.shape[0]
    if n < 2:
        raise ValueError("need at least two tasks")
    if k <= 0:
        raise ValueError("k must be positive")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of tasks ({n})")
    if not np.all(np.isfinite(V)):
        raise ValueError("models must be finite")
    dist = cdist(V, V)
    np.fill_diagonal(dist, np.inf)
    # stable sort: ties resolved by lower task index
    nbrs = np.argsort(dist, axis=1, kind="stable")[:, :k]
    pairs = {(min(i, j), max(i, j)) for i in range(n) for j in nbrs[i]}
    edges = np.array(sorted(pairs), dtype=int).reshape(-1, 2)
    return TaskGraph(n, edges, np.ones(len(edges)))


def prune(graph: TaskGraph, threshold: float) -> TaskGraph:
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    keep = graph.weights >= threshold
    return TaskGraph(graph.n_tasks, graph.edges[keep], graph.weights[keep])


def markov_cluster(graph: TaskGraph, inflation: float = 2.0, self_loop: float = 1.0,
                   tol: float = 1e-8, max_rounds: int = 200) -> ClusterAssignment:
    """Markov clustering: alternate expansion (squaring) and inflation.

    Clusters are read off the attractor rows of the converged matrix; a node
    claimed by several attractors goes to the first one.
    """
    if inflation <= 1:
        raise ValueError("inflation must exceed 1")
    n = graph.n_tasks
    M = graph.adjacency() + self_loop * np.eye(n)
    M = M / M.sum(axis=0, keepdims=True)
    for _ in range(max_rounds):
        prev = M
        M = M @ M
        M = M ** inflation
        M = M / M.sum(axis=0, keepdims=True)
        if np.max(np.abs(M - prev)) < tol:
            break

    labels = -np.ones(n, dtype=int)
    next_label = 0
    for a in range(n):
        if M[a, a] <= 1e-10:
            continue
        members = np.nonzero(M[a] > 1e-10)[0]
        free = members[labels[members] < 0]
        if free.size == 0:
            continue
        labels[free] = next_label
        next_label += 1
    # nodes no attractor reached become singletons
    for v in np.nonzero(labels < 0)[0]:
        labels[v] = next_label
        next_label += 1
    # relabel contiguously by first appearance
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(next_label, dtype=int)
    remap[np.unique(labels)[order]] = np.arange(order.size)
    labels = remap[labels]
    return ClusterAssignment(labels, int(labels.max()) + 1 if n else 0)


_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def graph_to_dict(graph: TaskGraph, clusters: Optional[ClusterAssignment] = None) -> dict:
    out = {
        "n_tasks": int(graph.n_tasks),
        "edges": [
            {"i": int(i), "j": int(j), "w": float(w)}
            for (i, j), w in zip(graph.edges, graph.weights)
        ],
    }
    if clusters is not None:
        out["labels"] = [int(c) for c in clusters.labels]
    return out


def graph_from_dict(data: dict) -> TaskGraph:
    edges = [(e["i"], e["j"]) for e in data["edges"]]
    weights = [e["w"] for e in data["edges"]]
    return TaskGraph(int(data["n_tasks"]), np.array(edges, dtype=int).reshape(-1, 2), weights)


def export_graph(graph: TaskGraph, clusters: Optional[ClusterAssignment] = None,
                 format: str = "json") -> str:
    if format == "json":
        return json.dumps(graph_to_dict(graph, clusters), indent=2)
    if format == "dot":
        lines = ["graph tasks {"]
        for v in range(graph.n_tasks):
            if clusters is not None:
                c = int(clusters.labels[v])
                color = _PALETTE[c % len(_PALETTE)]
                lines.append(f'  {v} [cluster={c}, style=filled, fillcolor="{color}"];')
            else:
                lines.append(f"  {v};")
        for (i, j), w in zip(graph.edges, graph.weights):
            lines.append(f'  {i} -- {j} [weight={w:.6g}, label="{w:.3g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {format!r}")
