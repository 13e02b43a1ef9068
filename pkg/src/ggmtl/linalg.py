"""Sparse and block-structured linear algebra for the graph-smoothed system.

The coupled system matrix is

    A = lam * kron(L, I_d) + blockdiag(X_1^T X_1, ..., X_n^T X_n)

which is symmetric positive definite whenever every connected component of
the graph contains at least one task with a full-rank design. It is stored as
a scipy CSR matrix and never densified above ``DENSE_LIMIT`` unknowns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# direct factorization below this many unknowns, preconditioned CG above
DENSE_LIMIT = 200
CG_RESTARTS = 5


class ConvergenceError(RuntimeError):
    """Raised when an iterative solve stops before reaching its tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SpdSolveReport:
    iterations: int
    residual_norm: float
    converged: bool
    method: str = "cg"


class BlockDiagOperator:
    """Block-diagonal design ``X = diag(X_1, ..., X_n)`` kept as its blocks."""

    def __init__(self, blocks):
        blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
        if not blocks:
            raise ValueError("need at least one block")
        d = blocks[0].shape[1]
        for i, b in enumerate(blocks):
            if b.shape[1] != d:
                raise ValueError(f"block {i} has {b.shape[1]} columns, expected {d}")
            if not np.all(np.isfinite(b)):
                raise ValueError(f"block {i} has non-finite entries")
        self.blocks = tuple(blocks)
        self.n_blocks = len(blocks)
        self.d = d

    @property
    def shape(self):
        return (sum(b.shape[0] for b in self.blocks), self.n_blocks * self.d)

    def matvec(self, v):
        v = np.asarray(v, dtype=float).reshape(self.n_blocks, self.d)
        return np.concatenate([b @ w for b, w in zip(self.blocks, v)])

    def rmatvec(self, r):
        out = np.empty((self.n_blocks, self.d))
        start = 0
        for i, b in enumerate(self.blocks):
            stop = start + b.shape[0]
            out[i] = b.T @ r[start:stop]
            start = stop
        return out.ravel()

    def gram_blocks(self):
        return [b.T @ b for b in self.blocks]

    def gram(self):
        """Sparse block-diagonal ``X^T X``."""
        return sp.block_diag(self.gram_blocks(), format="csr")


def incidence_matrix(n, edges):
    """Sparse n x m incidence matrix: column k is +1 at row i, -1 at row j."""
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    m = edges.shape[0]
    rows = edges.ravel()
    cols = np.repeat(np.arange(m), 2)
    vals = np.tile([1.0, -1.0], m)
    return sp.csc_matrix((vals, (rows, cols)), shape=(n, m))


def laplacian_from_edges(incidence, edge_weights):
    """Weighted Laplacian ``E diag(e) E^T`` as a CSR matrix."""
    E = sp.csc_matrix(incidence)
    e = np.asarray(edge_weights, dtype=float).ravel()
    if E.shape[1] != e.shape[0]:
        raise ValueError(
            f"incidence has {E.shape[1]} columns but {e.shape[0]} edge weights given"
        )
    if not np.all(np.isfinite(e)):
        raise ValueError("edge weights must be finite")
    L = (E @ sp.diags(e) @ E.T).tocsr()
    L.sum_duplicates()
    return L


def assemble_A(laplacian, designs, lam):
    """Build ``lam * kron(L, I_d) + X^T X`` in CSR form."""
    if not isinstance(designs, BlockDiagOperator):
        designs = BlockDiagOperator(designs)
    L = sp.csr_matrix(laplacian)
    n, d = designs.n_blocks, designs.d
    if L.shape != (n, n):
        raise ValueError(f"laplacian is {L.shape}, expected ({n}, {n})")
    if not np.isfinite(lam) or not np.all(np.isfinite(L.data)):
        raise ValueError("non-finite entries in lambda or laplacian")
    A = (lam * sp.kron(L, sp.identity(d), format="csr") + designs.gram()).tocsr()
    A.sum_duplicates()
    return A


def _check_symmetric(A):
    diff = A - A.T
    if diff.nnz:
        scale = max(abs(A).max(), 1.0)
        if abs(diff).max() > 1e-12 * scale:
            raise ValueError("matrix is not symmetric")


def spd_solve(A, rhs, tol=1e-10, max_iter=None, dense_limit=None, precondition=True,
              backward_tol=None):
    """Solve a symmetric positive definite system.

    Small systems (at most ``dense_limit`` unknowns) use a Cholesky
    factorization; larger ones use Jacobi-preconditioned conjugate gradients.

    With ``backward_tol`` set, a solve also counts as converged when its
    normwise backward error ``||Ax - b|| / (||A|| ||x|| + ||b||)`` is below
    it. Badly conditioned systems (reweighted edges near fusion) cannot
    reach a tiny relative residual in double precision at all.

    Returns
    -------
    x : ndarray
    report : SpdSolveReport

    Raises
    ------
    ConvergenceError
        If the relative residual ``||Ax - b|| / ||b||`` is above ``tol`` at exit.
    """
    dense_limit = DENSE_LIMIT if dense_limit is None else dense_limit
    b = np.asarray(rhs, dtype=float).ravel()
    nd = A.shape[0]
    if A.shape != (nd, nd) or b.shape[0] != nd:
        raise ValueError(f"shape mismatch: A {A.shape}, rhs {b.shape}")
    if max_iter is None:
        max_iter = 10 * nd
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(nd), SpdSolveReport(0, 0.0, True, "trivial")

    if sp.issparse(A):
        A = A.tocsr()
        _check_symmetric(A)
    else:
        A = np.asarray(A, dtype=float)
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(np.abs(A).max(), 1.0)):
            raise ValueError("matrix is not symmetric")

    anorm = spla.norm(A, np.inf) if sp.issparse(A) else np.linalg.norm(A, np.inf)

    def _ok(x, res):
        if res <= tol * bnorm:
            return True
        if backward_tol is None:
            return False
        return res <= backward_tol * (anorm * np.linalg.norm(x, np.inf) + bnorm)

    if nd <= dense_limit:
        Ad = A.toarray() if sp.issparse(A) else A
        try:
            x = scipy.linalg.cho_solve(scipy.linalg.cho_factor(Ad), b)
            method = "cholesky"
        except np.linalg.LinAlgError:
            x = scipy.linalg.solve(Ad, b, assume_a="sym")
            method = "ldl"
        res = np.linalg.norm(Ad @ x - b)
        report = SpdSolveReport(1, float(res), _ok(x, res), method)
        if not report.converged:
            raise ConvergenceError(
                f"direct solve residual {res:.3e} exceeds {tol * bnorm:.3e}", report
            )
        return x, report

    M = None
    if precondition:
        diag = A.diagonal()
        if np.any(diag <= 0):
            raise ValueError("non-positive diagonal; matrix is not positive definite")
        M = sp.diags(1.0 / diag)

    count = [0]

    def _tick(_):
        count[0] += 1

    x = np.zeros(nd)
    res = bnorm
    # aim a little below tol, and restart from the current iterate if the
    # recurrence residual drifts away from the true one
    for _ in range(CG_RESTARTS):
        x, _info = spla.cg(
            A, b, x0=x, rtol=0.5 * tol, atol=0.0, maxiter=max_iter - count[0] or 1,
            M=M, callback=_tick,
        )
        res = np.linalg.norm(A @ x - b)
        if _ok(x, res) or count[0] >= max_iter:
            break
    report = SpdSolveReport(count[0], float(res), _ok(x, res), "cg")
    if not report.converged:
        raise ConvergenceError(
            f"CG stopped after {count[0]} iterations with relative residual "
            f"{res / bnorm:.3e} > {tol:.1e}",
            report,
        )
    return x, report
