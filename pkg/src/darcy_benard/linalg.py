"""Sparse matrices, direct factorization and Krylov solvers.

CSR storage and the LU factorization are provided by scipy; the Krylov
methods are implemented here so iteration counts, deflation and failure
modes follow this package's contracts.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

SparseMatrix = sp.csr_matrix
Operator = Union[Callable[[np.ndarray], np.ndarray], sp.spmatrix, np.ndarray]


class SolverError(RuntimeError):
    """Base class for linear-solver failures."""


class SingularMatrixError(SolverError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class ConvergenceError(SolverError):
    def __init__(self, message: str, residual: float, history: list[float] | None = None):
        super().__init__(message)
        self.residual = residual
        self.history = history or []


class IndefiniteOperatorError(SolverError):
    pass


def as_csr(A) -> SparseMatrix:
    """Canonical CSR copy: duplicates summed, column indices sorted."""
    M = sp.csr_matrix(A, dtype=float, copy=True)
    M.sum_duplicates()
    M.sort_indices()
    return M


def spmv(A: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape} times vector {x.shape}")
    return A @ x


def _as_apply(op: Operator | None) -> Callable[[np.ndarray], np.ndarray] | None:
    if op is None:
        return None
    if callable(op) and not isinstance(op, (np.ndarray, sp.spmatrix)):
        return op
    return lambda v: op @ v


@dataclass
class Factorization:
    """Sparse LU factors of a square matrix, reusable for many right-hand sides."""

    kind: str
    shape: tuple[int, int]
    _lu: object = field(repr=False)

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ValueError(f"rhs length {b.shape[0]} != matrix size {self.shape[0]}")
        return self._lu.solve(b)

    __call__ = solve


def _singular_row_dense(A: SparseMatrix) -> int | None:
    """Original row index of the first vanishing pivot of a dense partial-pivot LU."""
    P, _, U = scipy.linalg.lu(A.toarray())
    d = np.abs(np.diag(U))
    scale = max(d.max(initial=0.0), 1.0)
    bad = np.flatnonzero(d <= 1e-14 * scale)
    if bad.size == 0:
        return None
    # row k of P^T A is original row argmax(P[:, k])
    return int(np.argmax(P[:, bad[0]]))


def factorize(A, kind: str = "general") -> Factorization:
    """LU-factorize a square sparse matrix.

    kind="spd" uses a symmetric ordering with diagonal pivoting (Cholesky-like);
    kind="general" uses threshold partial pivoting.
    """
    if kind not in ("spd", "general"):
        raise ValueError(f"kind must be 'spd' or 'general', got {kind!r}")
    A = sp.csc_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if kind == "spd":
        opts = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                    options=dict(SymmetricMode=True))
    else:
        opts = dict(permc_spec="COLAMD")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sp.SparseEfficiencyWarning)
            lu = spla.splu(A, **opts)
    except RuntimeError as exc:
        row = _singular_row_dense(sp.csr_matrix(A)) if A.shape[0] <= 2000 else None
        where = f" at row {row}" if row is not None else ""
        raise SingularMatrixError(f"singular pivot{where}: {exc}", row=row) from None

    d = np.abs(lu.U.diagonal())
    scale = d.max(initial=0.0)
    tiny = np.flatnonzero(d <= 1e-13 * scale)
    if scale == 0.0 or tiny.size:
        k = int(tiny[0]) if tiny.size else 0
        row = int(np.argsort(lu.perm_r)[k])
        raise SingularMatrixError(f"singular pivot at row {row}", row=row)
    return Factorization(kind, A.shape, lu)


def _jacobi(diag: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    d = np.asarray(diag, dtype=float)
    if np.any(d == 0.0):
        raise ValueError("Jacobi preconditioner needs a zero-free diagonal")
    inv = 1.0 / d
    return lambda v: inv * v


def jacobi_preconditioner(A: SparseMatrix) -> Callable[[np.ndarray], np.ndarray]:
    return _jacobi(A.diagonal())


def gmres(
    apply: Operator,
    b,
    precond: Operator | None = None,
    tol: float = 1e-10,
    restart: int = 30,
    max_iter: int = 2000,
    x0=None,
) -> tuple[np.ndarray, int, float]:
    """Restarted GMRES with optional left preconditioning.

    Converges when the true relative residual ||b - Ax|| / ||b|| <= tol.
    Returns (x, iterations, relative residual); raises ConvergenceError
    after `max_iter` Arnoldi steps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = _as_apply(apply)
    M = _as_apply(precond) or (lambda v: v)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0

    r = b - A(x)
    res = np.linalg.norm(r) / bnorm
    history = [res]
    if res <= tol:
        return x, 0, res

    m = max(1, min(restart, n))
    mb_norm = np.linalg.norm(M(b))
    inner_tol = tol
    iters = 0
    while iters < max_iter:
        z = M(r)
        beta = np.linalg.norm(z)
        if beta == 0.0:
            break
        V = np.empty((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = z / beta
        k = 0
        target = inner_tol * mb_norm
        for k in range(m):
            w = M(A(V[k]))
            iters += 1
            # classical Gram-Schmidt, two passes
            h = V[: k + 1] @ w
            w -= h @ V[: k + 1]
            h2 = V[: k + 1] @ w
            w -= h2 @ V[: k + 1]
            h += h2
            hn = np.linalg.norm(w)
            H[: k + 1, k] = h
            H[k + 1, k] = hn
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                cs[k], sn[k] = 1.0, 0.0
            else:
                cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            breakdown = hn <= 1e-14 * max(np.abs(h).max(initial=0.0), 1.0)
            if abs(g[k + 1]) <= target or breakdown or iters >= max_iter:
                break
            V[k + 1] = w / hn
        kk = k + 1
        y = scipy.linalg.solve_triangular(H[:kk, :kk], g[:kk])
        x += y @ V[:kk]
        r = b - A(x)
        res = np.linalg.norm(r) / bnorm
        history.append(res)
        if res <= tol:
            return x, iters, res
        # preconditioned estimate was met but the true residual was not: tighten
        est = abs(g[kk]) / mb_norm
        if est <= inner_tol and est > 0:
            inner_tol = max(inner_tol * tol / res, 1e-300)
    raise ConvergenceError(
        f"GMRES did not converge in {iters} iterations (relative residual {res:.3e})",
        residual=res,
        history=history,
    )


def cg(
    apply: Operator,
    b,
    tol: float = 1e-10,
    max_iter: int = 10000,
    deflate_constants: bool = False,
    x0=None,
) -> tuple[np.ndarray, int]:
    """Conjugate gradients for symmetric positive (semi)definite operators.

    With `deflate_constants` the iteration runs on the subspace orthogonal to
    the constant vector: b and the iterates are projected to zero mean, and
    the returned solution has zero (arithmetic) mean.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = _as_apply(apply)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]

    if deflate_constants:
        def P(v):
            return v - v.mean()
    else:
        def P(v):
            return v

    b = P(b)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else P(np.array(x0, dtype=float))
    if bnorm == 0.0:
        return np.zeros(n), 0
    r = b - P(A(x))
    rr = r @ r
    if np.sqrt(rr) <= tol * bnorm:
        return x, 0
    p = r.copy()
    for it in range(1, max_iter + 1):
        Ap = P(A(p))
        pAp = p @ Ap
        if pAp <= 0.0:
            raise IndefiniteOperatorError(
                f"CG found non-positive curvature {pAp:.3e} at iteration {it}"
            )
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        if np.sqrt(rr_new) <= tol * bnorm:
            # confirm against the true residual
            r_true = b - P(A(x))
            if np.linalg.norm(r_true) <= tol * bnorm:
                return P(x), it
            r = r_true
            rr_new = r @ r
            p = r.copy()
            rr = rr_new
            continue
        p = r + (rr_new / rr) * p
        rr = rr_new
    res = np.linalg.norm(b - P(A(x))) / bnorm
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations (relative residual {res:.3e})",
        residual=res,
    )
