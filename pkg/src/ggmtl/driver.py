"""End-to-end graph-guided multi-task fitting.

Pipeline: independent least squares, k-NN task graph on the resulting
models, per-task train/validation split, projected hypergradient descent on
the edge weights (with backtracking), and a final inner solve on all data at
the learned edge weights. The k-NN edge support is fixed after construction;
only the weights move.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import HyperParams, SplitSpec
from .graph import TaskGraph, knn_graph
from .hypergrad import (
    data_gradient, outer_objective, regularizer_gradient, update_edges,
)
from .inner import (
    REWEIGHTED_BACKWARD_TOL, ols_per_task, solve_inner_l2, solve_inner_sq, sse, system,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    objective: float
    train_sse: float
    val_sse: float
    grad_norm: float
    step: float
    accepted: bool


@dataclass(frozen=True, eq=False)
class FitResult:
    models: np.ndarray
    graph: TaskGraph
    trace: tuple = ()
    converged: bool = False
    hyperparams: HyperParams = field(default_factory=HyperParams)
    mode: str = "ggmtl"


def split_tasks(data, split: SplitSpec):
    """Per-task random train/validation split.

    Each task keeps at least ``max(2, ceil(d / 2))`` training rows when it
    has enough rows to spare one for validation.
    """
    rng = np.random.default_rng(split.seed)
    train, val = [], []
    for idx, t in enumerate(data):
        N = t.n_samples
        min_train = max(2, math.ceil(t.d / 2))
        n_val = int(round(split.val_fraction * N))
        n_val = min(n_val, N - min_train)
        n_val = max(n_val, 1 if N >= 2 else 0)
        if n_val < 1:
            raise ValueError(f"task {idx} has too few rows ({N}) for a validation split")
        perm = rng.permutation(N)
        train.append(t.take(np.sort(perm[n_val:])))
        val.append(t.take(np.sort(perm[:n_val])))
    return train, val


@dataclass
class _State:
    edges: np.ndarray
    models: np.ndarray
    objective: float
    reweights: np.ndarray = None


class _Problem:
    """Inner solve + outer evaluation at given edge weights for one variant."""

    def __init__(self, graph, train, val, hp):
        self.graph, self.train, self.val, self.hp = graph, train, val, hp

    def evaluate(self, e) -> _State:
        hp = self.hp
        if hp.variant == "sq_l2":
            V = solve_inner_sq(self.train, self.graph, hp.lam, weights=e, tol=hp.solver_tol)
            l = None
        else:
            V, l = solve_inner_l2(
                self.train, self.graph, hp.lam, eps_guard=hp.eps_guard, tol=hp.l2_tol,
                max_rounds=hp.l2_max_rounds, weights=e, solver_tol=hp.solver_tol,
            )
        return _State(e, V, outer_objective(V, e, self.val, hp), l)

    def gradient(self, state: _State) -> np.ndarray:
        hp = self.hp
        e = state.edges
        if state.reweights is None:
            V, eff, scale, btol = state.models, e, None, None
            A, _ = system(self.train, self.graph, hp.lam, eff)
        else:
            # reweights frozen; V re-solved at the effective weights they induce
            scale, btol = state.reweights, REWEIGHTED_BACKWARD_TOL
            eff = e * scale
            V, A, _ = solve_inner_sq(self.train, self.graph, hp.lam, weights=eff,
                                     tol=hp.solver_tol, return_system=True, backward_tol=btol)
        g_data, _ = data_gradient(V, A, self.graph, self.val, hp.lam, scale=scale,
                                  tol=hp.solver_tol, backward_tol=btol)
        g = regularizer_gradient(e, hp) + g_data
        if hp.gamma > 0:
            # entropy has infinite slope into the box at 0: dropped edges stay dropped
            dropped = e == 0
            g[dropped] = np.maximum(g[dropped], 0.0)
        return g


def fit(data, hp: HyperParams = None, split: SplitSpec = None) -> FitResult:
    hp = hp or HyperParams()
    split = split or SplitSpec()
    n = len(data)
    if n < 2:
        raise ValueError("need at least two tasks")

    init = ols_per_task(data, hp.ridge)
    graph = knn_graph(init, min(hp.k, n - 1))
    train, val = split_tasks(data, split)
    problem = _Problem(graph, train, val, hp)

    state = problem.evaluate(graph.weights.copy())
    trace = []
    calm = 0
    converged = False
    for it in range(1, hp.max_outer + 1):
        grad = problem.gradient(state)
        nu = hp.nu
        accepted = False
        for _ in range(hp.max_halvings + 1):
            e_new = update_edges(state.edges, grad, nu)
            if np.array_equal(e_new, state.edges):
                break
            trial = problem.evaluate(e_new)
            if not hp.backtrack or trial.objective <= state.objective:
                accepted = True
                break
            nu *= 0.5
        prev = state.objective
        if accepted:
            state = trial
        trace.append(TraceRecord(
            iteration=it,
            objective=state.objective,
            train_sse=sse(state.models, train),
            val_sse=sse(state.models, val),
            grad_norm=float(np.linalg.norm(grad)),
            step=nu if accepted else 0.0,
            accepted=accepted,
        ))
        if abs(prev - state.objective) < hp.tol_rel * abs(state.objective):
            calm += 1
            if calm >= hp.patience:
                converged = True
                break
        else:
            calm = 0
    log.debug("outer loop stopped after %d iterations (converged=%s)", len(trace), converged)

    learned = graph.with_weights(state.edges)
    if hp.variant == "sq_l2":
        models = solve_inner_sq(data, learned, hp.lam, tol=hp.solver_tol)
    else:
        models, _ = solve_inner_l2(
            data, learned, hp.lam, eps_guard=hp.eps_guard, tol=hp.l2_tol,
            max_rounds=hp.l2_max_rounds, solver_tol=hp.solver_tol,
        )
    mode = "baseline_fixed_graph" if hp.max_outer == 0 else "ggmtl"
    return FitResult(models, learned, tuple(trace), converged, hp, mode)


def baseline_fixed_graph(data, hp: HyperParams = None, split: SplitSpec = None) -> FitResult:
    """Smooth over the initial k-NN graph without learning its edges."""
    hp = (hp or HyperParams()).replace(max_outer=0)
    return fit(data, hp, split)


def predict(models, X, task: int) -> np.ndarray:
    W = np.asarray(models, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not 0 <= task < W.shape[0]:
        raise IndexError(f"task {task} out of range for {W.shape[0]} tasks")
    if X.shape[1] != W.shape[1]:
        raise ValueError(f"X has {X.shape[1]} columns, models have {W.shape[1]}")
    return X @ W[task]
