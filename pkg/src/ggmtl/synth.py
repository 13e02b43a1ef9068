"""Synthetic multi-task regression problems with a known task structure.

* line: ``w_t = w_{t-1} + 0.1 u * b`` along a path
* tree: ``w_t = w_parent + 0.1 u * b`` with ``parent = (t - 1) // 2``
* star: leaves ``w_t ~ N(1, I)``; the centre copies coordinates
  ``(2t - 2, 2t - 1)`` from leaf ``t`` (0-based), so ``d = 2 * leaves``

with ``u ~ U[0, 1]^d`` and ``b ~ Bernoulli(0.7)^d`` drawn fresh per task,
inputs ``x ~ N(0, I)`` and ``y = w_t^T x + noise_std * eps``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SynthSpec
from .graph import TaskGraph
from .inner import TaskData


@dataclass(frozen=True, eq=False)
class GroundTruth:
    weights: np.ndarray
    adjacency: np.ndarray


def _perturb(rng, d):
    return 0.1 * rng.uniform(0.0, 1.0, d) * rng.binomial(1, 0.7, d)


def _line(rng, n, d):
    W = np.empty((n, d))
    W[0] = rng.normal(1.0, 1.0, d)
    for t in range(1, n):
        W[t] = W[t - 1] + _perturb(rng, d)
    parents = [(t - 1, t) for t in range(1, n)]
    return W, parents


def _tree(rng, n, d):
    levels = np.log2(n + 1)
    if n < 1 or levels != int(levels):
        raise ValueError(f"a full binary tree needs 2^L - 1 tasks, got {n}")
    W = np.empty((n, d))
    W[0] = rng.normal(1.0, 1.0, d)
    for t in range(1, n):
        W[t] = W[(t - 1) // 2] + _perturb(rng, d)
    parents = [((t - 1) // 2, t) for t in range(1, n)]
    return W, parents


def _star(rng, n, d):
    leaves = n - 1
    if leaves < 1 or d != 2 * leaves:
        raise ValueError(f"star with {leaves} leaves needs d = {2 * leaves}, got d = {d}")
    W = np.empty((n, d))
    W[1:] = rng.normal(1.0, 1.0, (leaves, d))
    for t in range(1, n):
        W[0, 2 * t - 2: 2 * t] = W[t, 2 * t - 2: 2 * t]
    parents = [(0, t) for t in range(1, n)]
    return W, parents


_BUILDERS = {"line": _line, "tree": _tree, "star": _star}


def generate(spec: SynthSpec):
    """Return ``(tasks, truth)`` for the given spec; deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    n, d = spec.n_tasks, spec.d
    if n < 1 or d < 1:
        raise ValueError("n_tasks and d must be positive")
    W, links = _BUILDERS[spec.structure](rng, n, d)
    adj = np.zeros((n, n))
    for a, b in links:
        adj[a, b] = adj[b, a] = 1.0
    tasks = []
    for t in range(n):
        X = rng.standard_normal((spec.samples_per_task, d))
        y = X @ W[t] + spec.noise_std * rng.standard_normal(spec.samples_per_task)
        tasks.append(TaskData(X, y))
    return tasks, GroundTruth(W, adj)


def ground_truth_graph(gt: GroundTruth) -> TaskGraph:
    g = TaskGraph.from_adjacency(gt.adjacency)
    return g.with_weights(np.ones(g.n_edges))
