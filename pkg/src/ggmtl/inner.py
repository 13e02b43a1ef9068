"""Inner problem: task models for a fixed weighted task graph.

Both smoothing penalties are scaled so the squared variant's stationarity
condition is exactly ``(lam * kron(L, I_d) + X^T X) V = X^T Y``:

    squared:      1/2 sum_i ||X_i w_i - y_i||^2 + 1/2 lam sum_ij e_ij ||w_i - w_j||^2
    non-squared:  1/2 sum_i ||X_i w_i - y_i||^2 + 1/2 lam sum_ij e_ij ||w_i - w_j||

The non-squared variant is solved by iterative reweighting: with
``l_ij = 0.5 / ||w_i - w_j||`` the term ``e_ij ||w_i - w_j||`` is majorized by
``e_ij (l_ij ||w_i - w_j||^2 + 1 / (4 l_ij))``, so each V-step is a squared
solve with edge weights ``e * l``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import BlockDiagOperator, assemble_A, spd_solve

# backward-error acceptance for solves at reweighted edges, whose condition
# number grows like 1 / eps_guard as connected models fuse
REWEIGHTED_BACKWARD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TaskData:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if X.shape[0] < 1:
            raise ValueError("task needs at least one sample")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("task data contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, rows) -> "TaskData":
        return TaskData(self.X[rows], self.y[rows])


def _dims(data):
    d = data[0].d
    if any(t.d != d for t in data):
        raise ValueError("all tasks must share the same number of features")
    return len(data), d


def stack_rhs(data) -> np.ndarray:
    """``X^T Y`` as an (n, d) array."""
    return np.stack([t.X.T @ t.y for t in data])


def ols_per_task(data, ridge=0.0) -> np.ndarray:
    """Independent (optionally ridge-regularized) least squares per task."""
    n, d = _dims(data)
    W = np.empty((n, d))
    for i, t in enumerate(data):
        if ridge > 0:
            W[i] = np.linalg.solve(t.X.T @ t.X + ridge * np.eye(d), t.X.T @ t.y)
        else:
            if np.linalg.matrix_rank(t.X) < d:
                raise np.linalg.LinAlgError(
                    f"task {i}: design matrix is rank deficient; use ridge > 0"
                )
            W[i] = np.linalg.lstsq(t.X, t.y, rcond=None)[0]
    return W


def sse(models, data) -> float:
    return float(sum(np.sum((t.X @ w - t.y) ** 2) for w, t in zip(models, data)))


def system(data, graph, lam, weights=None):
    """Return ``(A, X^T Y)`` of the squared inner problem at the given weights."""
    n, d = _dims(data)
    if graph.n_tasks != n:
        raise ValueError(f"graph has {graph.n_tasks} nodes but there are {n} tasks")
    L = graph.laplacian(weights)
    A = assemble_A(L, BlockDiagOperator([t.X for t in data]), lam)
    return A, stack_rhs(data).ravel()


def solve_inner_sq(data, graph, lam, weights=None, tol=1e-10, return_system=False,
                   backward_tol=None):
    """Exact minimizer of the squared graph-smoothed problem.

    ``weights`` overrides the graph's own edge weights (used by the
    reweighted non-squared solver and by the outer loop).
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    n, d = _dims(data)
    A, rhs = system(data, graph, lam, weights)
    x, report = spd_solve(A, rhs, tol=tol, backward_tol=backward_tol)
    V = x.reshape(n, d)
    if return_system:
        return V, A, report
    return V


def dirichlet_energy(models, graph, weights=None) -> float:
    """``tr(V^T L V)``, cross-checked against ``sum_ij e_ij ||w_i - w_j||^2``."""
    V = np.asarray(models, dtype=float)
    e = graph.weights if weights is None else np.asarray(weights, dtype=float)
    trace_form = float(np.sum(V * (graph.laplacian(e) @ V)))
    if graph.n_edges == 0:
        return 0.0
    i, j = graph.edges.T
    diffs = np.sum((V[i] - V[j]) ** 2, axis=1)
    pair_form = float(np.sum(e * diffs))
    # cancellation in the trace form scales with the squared model norms
    scale = max(pair_form, float(np.sum(np.abs(e) * (np.sum(V[i] ** 2, 1) + np.sum(V[j] ** 2, 1)))))
    if abs(trace_form - pair_form) > 1e-10 * scale:
        raise ArithmeticError(
            f"Dirichlet energy mismatch: trace {trace_form!r} vs pairwise {pair_form!r}"
        )
    return pair_form


def inner_objective_sq(models, data, graph, lam, weights=None) -> float:
    return 0.5 * sse(models, data) + 0.5 * lam * dirichlet_energy(models, graph, weights)


def edge_distances(models, graph) -> np.ndarray:
    V = np.asarray(models, dtype=float)
    i, j = graph.edges.T
    return np.linalg.norm(V[i] - V[j], axis=1)


def reweights(models, graph, eps_guard=1e-8) -> np.ndarray:
    """Multiplicative edge weights ``0.5 / max(||w_i - w_j||, eps_guard)``."""
    return 0.5 / np.maximum(edge_distances(models, graph), eps_guard)


def l2_objective(models, data, graph, lam, weights=None) -> float:
    """Non-squared smoothing objective.

    Equals the reweighted surrogate, ``1/(4 l)`` term included, whenever the
    reweights sit at their optimum for ``models``.
    """
    e = graph.weights if weights is None else np.asarray(weights, dtype=float)
    return 0.5 * sse(models, data) + 0.5 * lam * float(np.sum(e * edge_distances(models, graph)))


def solve_inner_l2(data, graph, lam, eps_guard=1e-8, tol=1e-5, max_rounds=50,
                   weights=None, solver_tol=1e-10, history=None):
    """Alternate reweighting and squared solves for the non-squared problem.

    Starts from the squared-problem solution at the same edge weights and
    stops once ``||V_new - V|| <= tol * ||V||``. Objective values (one per
    iterate, starting point included) are appended to ``history`` if given.

    Returns
    -------
    models : (n, d) ndarray
    l : (m,) ndarray
        Reweights evaluated at the returned models.
    """
    e = graph.weights if weights is None else np.asarray(weights, dtype=float)
    V = solve_inner_sq(data, graph, lam, weights=e, tol=solver_tol)
    if history is not None:
        history.append(l2_objective(V, data, graph, lam, e))
    if graph.n_edges == 0 or lam == 0:
        return V, reweights(V, graph, eps_guard)
    for _ in range(max_rounds):
        l = reweights(V, graph, eps_guard)
        V_new = solve_inner_sq(data, graph, lam, weights=e * l, tol=solver_tol,
                               backward_tol=REWEIGHTED_BACKWARD_TOL)
        if history is not None:
            history.append(l2_objective(V_new, data, graph, lam, e))
        change = np.linalg.norm(V_new - V)
        V = V_new
        if change <= tol * max(np.linalg.norm(V), 1e-300):
            break
    return V, reweights(V, graph, eps_guard)
