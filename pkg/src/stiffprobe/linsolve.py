"""Sparse symmetric solves and Tikhonov-regularised least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DIRECT = "direct"
ITERATIVE = "iterative"

# above this size "auto" switches to preconditioned CG
AUTO_ITERATIVE_SIZE = 400_000
PIVOT_TOL = 1e-13
# eta = 0 solves beyond this 1-norm condition number are treated as singular
COND_LIMIT = 1e12


class SingularSystemError(ArithmeticError):
    """Matrix is singular or not positive definite."""


@dataclass
class SolveReport:
    """Outcome of a linear solve.

    ``condition`` is a 1-norm condition number estimate, or None when it
    was not computed.
    """

    solution: np.ndarray
    relative_residual: float
    method: str
    iterations: int = 0
    condition: float | None = None


def _as_sparse(A):
    if sp.issparse(A):
        return sp.csc_matrix(A, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return sp.csc_matrix(A)


def _rel_residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return r / nb if nb > 0 else r


def _symmetric_lu(A):
    """LU with symmetric fill-reducing ordering and diagonal pivoting."""
    try:
        return spla.splu(
            A,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options=dict(SymmetricMode=True),
        )
    except RuntimeError as exc:
        raise SingularSystemError(f"singular or not SPD: {exc}") from None


def _check_pivots(lu, spd: bool):
    piv = lu.U.diagonal()
    scale = np.max(np.abs(piv)) if piv.size else 0.0
    if scale == 0.0:
        raise SingularSystemError("singular or not SPD: zero matrix")
    if spd:
        bad = np.flatnonzero(piv <= PIVOT_TOL * scale)
    else:
        bad = np.flatnonzero(np.abs(piv) <= PIVOT_TOL * scale)
    if bad.size:
        k = int(bad[np.argmin(np.abs(piv[bad]))])
        # perm_c maps original column -> pivot position
        col = int(np.flatnonzero(lu.perm_c == k)[0]) if lu.perm_c is not None else k
        raise SingularSystemError(
            f"singular or not SPD: pivot {k} (DOF {col}) = {piv[k]:.3e}, max pivot {scale:.3e}"
        )


def _refine(A, lu, b, x, tol, steps=3):
    for _ in range(steps):
        r = b - A @ x
        if np.linalg.norm(r) <= tol * np.linalg.norm(b):
            break
        x = x + lu.solve(r)
    return x


def condition_estimate(A, lu=None) -> float:
    """1-norm condition number estimate ``||A||_1 ||A^-1||_1``."""
    A = _as_sparse(A)
    if A.shape[0] <= 500:
        return float(np.linalg.cond(A.toarray(), 1))
    lu = lu or _symmetric_lu(A)
    n = A.shape[0]
    inv = spla.LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T"), dtype=float)
    return float(spla.norm(A, 1) * spla.onenormest(inv))


def solve_spd(K, rhs, rtol: float = 1e-10, method: str = "auto", maxiter: int | None = None) -> SolveReport:
    """Solve ``K x = rhs`` for symmetric positive definite ``K``.

    The direct path is a sparse LU with symmetric ordering and diagonal
    pivots, so the pivots are those of a Cholesky-type factorisation; a
    non-positive or vanishing pivot means ``K`` is singular (for instance
    an unconstrained rigid-body mode) or indefinite. The iterative path is
    conjugate gradients with a Jacobi preconditioner.

    Raises
    ------
    SingularSystemError
        On a bad pivot, or when the residual contract
        ``||K x - rhs|| <= rtol ||rhs||`` cannot be met.
    """
    K = _as_sparse(K)
    b = np.asarray(rhs, dtype=float).ravel()
    n = K.shape[0]
    if K.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"dimension mismatch: K {K.shape}, rhs {b.shape}")
    if method == "auto":
        method = ITERATIVE if n > AUTO_ITERATIVE_SIZE else DIRECT
    if not np.any(b):
        return SolveReport(np.zeros(n), 0.0, method)

    if method == DIRECT:
        lu = _symmetric_lu(K)
        _check_pivots(lu, spd=True)
        x = _refine(K, lu, b, lu.solve(b), rtol)
        iterations = 0
    elif method == ITERATIVE:
        diag = K.diagonal()
        if np.any(diag <= 0):
            raise SingularSystemError(f"singular or not SPD: non-positive diagonal at DOF {int(np.argmin(diag))}")
        M = sp.diags(1.0 / diag)
        count = [0]

        def tick(_):
            count[0] += 1

        maxiter = maxiter or 10 * n
        x, info = spla.cg(K, b, rtol=0.1 * rtol, atol=0.0, M=M, maxiter=maxiter, callback=tick)
        iterations = count[0]
        if info != 0:
            raise SingularSystemError(f"singular or not SPD: CG did not converge after {iterations} iterations")
    else:
        raise ValueError(f"unknown method '{method}'")

    rel = _rel_residual(K, x, b)
    if rel > rtol:
        raise SingularSystemError(f"singular or not SPD: relative residual {rel:.2e} exceeds {rtol:.1e}")
    return SolveReport(x, float(rel), method, iterations)


def solve_tikhonov(A, b, eta: float = 0.0, rtol: float = 1e-10, condition: bool = True) -> SolveReport:
    """Minimise ``||A x - b||^2 + eta^2 ||x||^2``.

    With ``eta == 0`` the square system ``A x = b`` is solved directly
    (``A`` need not be definite). With ``eta > 0`` the minimiser of the
    normal equations ``(A^T A + eta^2 I) x = A^T b`` is obtained from the
    equivalent augmented system

        [ eta I   A      ] [r/eta]   [b]
        [ A^T    -eta I  ] [  x  ] = [0]

    whose condition number is at most that of ``A``; ``A`` may then be
    rectangular.

    ``relative_residual`` is ``||A x - b|| / ||b||`` for ``eta == 0`` and
    the relative residual of the normal equations otherwise.
    ``condition`` estimates the conditioning of the matrix actually
    factorised. With ``eta == 0`` and ``condition`` set, an estimate above
    ``COND_LIMIT`` is reported as a singular system.
    """
    if eta < 0 or not np.isfinite(eta):
        raise ValueError("eta must be a finite number >= 0")
    A = _as_sparse(A)
    b = np.asarray(b, dtype=float).ravel()
    m, n = A.shape
    if b.shape != (m,):
        raise ValueError(f"dimension mismatch: A {A.shape}, b {b.shape}")

    if eta == 0:
        if m != n:
            raise ValueError("eta = 0 requires a square matrix")
        try:
            lu = _symmetric_lu(A)
            _check_pivots(lu, spd=False)
        except SingularSystemError as exc:
            raise SingularSystemError(f"{exc}; use eta > 0 to regularise") from None
        x = _refine(A, lu, b, lu.solve(b), rtol) if np.any(b) else np.zeros(n)
        cond = condition_estimate(A, lu) if condition else None
        if cond is not None and cond > COND_LIMIT:
            raise SingularSystemError(f"numerically singular: condition estimate {cond:.2e}; use eta > 0 to regularise")
        return SolveReport(x, float(_rel_residual(A, x, b)), DIRECT, 0, cond)

    M = sp.bmat(
        [[eta * sp.identity(m), A], [A.T, -eta * sp.identity(n)]],
        format="csc",
    )
    rhs = np.concatenate([b, np.zeros(n)])
    try:
        lu = spla.splu(M)
    except RuntimeError as exc:
        raise SingularSystemError(f"singular augmented system: {exc}") from None
    _check_pivots(lu, spd=False)
    y = _refine(M, lu, rhs, lu.solve(rhs), rtol) if np.any(b) else np.zeros(m + n)
    x = y[m:]
    normal_rhs = A.T @ b
    normal_res = A.T @ (A @ x) + eta**2 * x - normal_rhs
    den = np.linalg.norm(normal_rhs)
    rel = np.linalg.norm(normal_res) / den if den > 0 else np.linalg.norm(normal_res)
    cond = condition_estimate(M, lu) if condition else None
    return SolveReport(x, float(rel), DIRECT, 0, cond)


def observable_mask(dK, rel_tol: float = 1e-12) -> np.ndarray:
    """Indices of rows of ``dK`` whose max-abs entry exceeds ``rel_tol`` times the global max-abs."""
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    dK = sp.csr_matrix(dK) if sp.issparse(dK) else sp.csr_matrix(np.atleast_2d(np.asarray(dK, dtype=float)))
    row_max = np.asarray(abs(dK).max(axis=1).todense()).ravel()
    top = row_max.max() if row_max.size else 0.0
    if top == 0:
        return np.array([], dtype=np.int64)
    return np.flatnonzero(row_max > rel_tol * top)
