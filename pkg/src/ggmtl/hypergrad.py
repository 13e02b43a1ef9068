"""Outer objective over edge weights and its hypergradient.

The outer objective is

    f(e) = 1/2 sum_i ||X_i^val w_i(e) - y_i^val||^2
           + 1/2 xi ||e||^2 + eta ||e||_1 + gamma H(e),
    H(e) = -sum_ij (|e_ij| ln |e_ij| - |e_ij|)

with ``V(e) = A(e)^{-1} X^T Y`` and ``A(e) = lam kron(L_e, I_d) + X^T X``.
Its exact gradient is

    df/de_ij = xi e_ij + eta - gamma ln e_ij - lam (w_i - w_j)^T (s_i - s_j)

where ``s = A^{-1} X^val,T (X^val V - Y^val)`` is a single adjoint solve
(``A`` is symmetric). No Kronecker product is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import lsq_linear
from scipy.sparse.linalg import lsqr

from .inner import REWEIGHTED_BACKWARD_TOL, solve_inner_sq, sse
from .linalg import spd_solve


@dataclass(frozen=True)
class HypergradWorkspace:
    A: object
    C: np.ndarray          # (n, d) validation residual back-projected per task
    adjoint: np.ndarray    # (n, d) A^{-1} C
    directions: np.ndarray  # (m, d) w_i - w_j per edge
    models: np.ndarray


def entropy(edges) -> float:
    a = np.abs(np.asarray(edges, dtype=float))
    pos = a > 0
    return float(-np.sum(a[pos] * np.log(a[pos]) - a[pos]))


def outer_objective(models, edges, val_data, hp) -> float:
    e = np.asarray(edges, dtype=float)
    return (
        0.5 * sse(models, val_data)
        + 0.5 * hp.xi * float(e @ e)
        + hp.eta * float(np.sum(np.abs(e)))
        + hp.gamma * entropy(e)
    )


def regularizer_gradient(edges, hp) -> np.ndarray:
    """Gradient of the edge penalties; exact zeros get no entropy pull."""
    e = np.asarray(edges, dtype=float)
    g = hp.xi * e + hp.eta * np.ones_like(e)
    if hp.gamma:
        ent = -np.log(np.maximum(e, hp.eps_log))
        ent[e == 0] = 0.0
        g = g + hp.gamma * ent
    return g


def val_back_projection(models, val_data) -> np.ndarray:
    return np.stack([t.X.T @ (t.X @ w - t.y) for w, t in zip(models, val_data)])


def data_gradient(models, A, graph, val_data, lam, scale=None, tol=1e-10, backward_tol=None):
    """Validation-loss part of the hypergradient at an inner optimum."""
    V = np.asarray(models, dtype=float)
    n, d = V.shape
    C = val_back_projection(V, val_data)
    s, _ = spd_solve(A, C.ravel(), tol=tol, backward_tol=backward_tol)
    s = s.reshape(n, d)
    i, j = graph.edges.T
    dirs = V[i] - V[j]
    g = -lam * np.sum(dirs * (s[i] - s[j]), axis=1)
    if scale is not None:
        g = g * scale
    return g, HypergradWorkspace(A, C, s, dirs, V)


def check_edges(edges, graph):
    e = np.asarray(edges, dtype=float).ravel()
    if e.shape[0] != graph.n_edges:
        raise ValueError(f"{e.shape[0]} edge values for a graph with {graph.n_edges} edges")
    if np.any(e < 0):
        raise ValueError("edge weights must be nonnegative")
    return e


def hypergradient(edges, graph, train_data, val_data, hp, reweights=None,
                  return_workspace=False):
    """Closed-form hypergradient of the outer objective.

    With ``reweights`` given, the inner problem is solved at effective weights
    ``edges * reweights`` and the reweights are held fixed, so the data term
    picks up a factor ``reweights`` by the chain rule.
    """
    e = check_edges(edges, graph)
    eff = e if reweights is None else e * reweights
    btol = None if reweights is None else REWEIGHTED_BACKWARD_TOL
    V, A, _ = solve_inner_sq(train_data, graph, hp.lam, weights=eff,
                             tol=hp.solver_tol, return_system=True, backward_tol=btol)
    g_data, ws = data_gradient(V, A, graph, val_data, hp.lam, scale=reweights,
                               tol=hp.solver_tol, backward_tol=btol)
    g = regularizer_gradient(e, hp) + g_data
    if return_workspace:
        return g, ws
    return g


def pipeline_objective(edges, graph, train_data, val_data, hp, reweights=None) -> float:
    """Outer objective after re-solving the squared inner problem at ``edges``."""
    e = np.asarray(edges, dtype=float)
    eff = e if reweights is None else e * reweights
    btol = None if reweights is None else REWEIGHTED_BACKWARD_TOL
    V = solve_inner_sq(train_data, graph, hp.lam, weights=eff, tol=hp.solver_tol,
                       backward_tol=btol)
    return outer_objective(V, e, val_data, hp)


def fd_hypergradient(edges, graph, train_data, val_data, hp, h=1e-6, reweights=None):
    """Finite-difference hypergradient of the full solve-then-evaluate pipeline.

    Central differences; coordinates closer than ``h`` to zero use the
    second-order one-sided stencil so the entropy term stays defined.
    """
    e = check_edges(edges, graph)
    if h <= 0:
        raise ValueError("h must be positive")

    def F(x):
        return pipeline_objective(x, graph, train_data, val_data, hp, reweights)

    g = np.empty_like(e)
    for k in range(e.shape[0]):
        step = np.zeros_like(e)
        step[k] = h
        if e[k] - h > 0:
            g[k] = (F(e + step) - F(e - step)) / (2 * h)
        else:
            g[k] = (-3 * F(e) + 4 * F(e + step) - F(e + 2 * step)) / (2 * h)
    return g


def update_edges(edges, grad, nu) -> np.ndarray:
    """Projected descent step onto the box [0, 1]."""
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    return np.clip(np.asarray(edges, dtype=float) - nu * np.asarray(grad, dtype=float), 0.0, 1.0)


def _edge_operator(diffs, edges, n):
    """Sparse (m, n*d) matrix mapping c to ``(diff_k)^T (c_i - c_j)`` per edge."""
    m, d = diffs.shape
    i, j = edges.T
    rows = np.repeat(np.arange(m), 2 * d)
    cols = np.concatenate(
        [(i[:, None] * d + np.arange(d)), (j[:, None] * d + np.arange(d))], axis=1
    ).ravel()
    vals = np.concatenate([diffs, -diffs], axis=1).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, n * d))


@dataclass(frozen=True)
class ClosedFormSystem:
    U: np.ndarray
    v: np.ndarray
    u: np.ndarray
    M: object
    C: np.ndarray


def closed_form_system(graph, train_data, val_data, hp, scaling="direct") -> ClosedFormSystem:
    """Linear system ``U e = v`` for stationary edges under a pure l1 penalty.

    ``u`` is the minimum-norm least-squares solution of ``M u = 1``; column
    k of ``U`` is ``(b_k b_k^T kron I_d) u`` for edge k = (i, j). With
    ``scaling="lam_scaled"`` the system is multiplied through by ``lam``
    (``lam U e = (lam / eta) C - X^T X u``); its solutions coincide.
    """
    if hp.eta <= 0:
        raise ValueError("closed-form edges need eta > 0")
    if hp.xi != 0 or hp.gamma != 0:
        raise ValueError("closed-form edges need xi = 0 and gamma = 0")
    if scaling not in ("direct", "lam_scaled"):
        raise ValueError(f"unknown scaling {scaling!r}")
    V = solve_inner_sq(train_data, graph, hp.lam, tol=hp.solver_tol)
    n, d = V.shape
    C = val_back_projection(V, val_data).ravel()
    i, j = graph.edges.T
    M = _edge_operator(V[i] - V[j], graph.edges, n)
    if M.nnz == 0 or np.max(np.abs(M.data)) <= 1e-12 * max(np.max(np.abs(V)), 1e-300):
        raise ValueError("degenerate system: all connected models coincide")
    ones = np.ones(graph.n_edges)
    if M.shape[0] * M.shape[1] <= 4_000_000:
        u = np.linalg.lstsq(M.toarray(), ones, rcond=None)[0]
    else:
        u = lsqr(M, ones, atol=1e-14, btol=1e-14, iter_lim=20 * M.shape[1])[0]
    u = u.reshape(n, d)
    XtXu = np.stack([t.X.T @ (t.X @ ui) for ui, t in zip(u, train_data)]).ravel()
    U = np.zeros((n * d, graph.n_edges))
    z = u[i] - u[j]
    for k, (a, b) in enumerate(graph.edges):
        U[a * d:(a + 1) * d, k] = z[k]
        U[b * d:(b + 1) * d, k] = -z[k]
    if scaling == "direct":
        v = C / hp.eta - XtXu / hp.lam
    else:
        U = hp.lam * U
        v = (hp.lam / hp.eta) * C - XtXu
    return ClosedFormSystem(U, v, u.ravel(), M, C)


def closed_form_edges(graph, train_data, val_data, hp, scaling="direct") -> np.ndarray:
    """Edges minimizing ``||U e - v||`` over the box [0, 1]^m."""
    system = closed_form_system(graph, train_data, val_data, hp, scaling)
    res = lsq_linear(system.U, system.v, bounds=(0.0, 1.0), method="bvls", tol=1e-14)
    return np.clip(res.x, 0.0, 1.0)
