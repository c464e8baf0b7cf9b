"""Right-preconditioned BiCGStab for the nonsymmetric step systems."""

from __future__ import annotations

from collections import namedtuple

import numpy as np
import scipy.sparse as sp

from .errors import Breakdown, MaxIterExceeded

SolveResult = namedtuple("SolveResult", "x iterations residual")

_TINY = 1e-30


def _as_csr(A):
    if sp.issparse(A):
        return A.tocsr()
    if hasattr(A, "to_scipy"):
        return A.to_scipy()
    return sp.csr_matrix(np.asarray(A, dtype=float))


def block_jacobi(A):
    """Inverse of the 2x2 diagonal blocks (point Jacobi for odd sizes).

    Returns a callable ``z = P(r)``.
    """
    n = A.shape[0]
    d = A.diagonal()
    if n % 2:
        if np.any(d == 0):
            raise Breakdown("zero diagonal entry, Jacobi preconditioner undefined")
        inv = 1.0 / d
        return lambda r: inv * r
    A = A.tocsr()
    off_up = np.asarray(A[np.arange(0, n, 2), np.arange(1, n, 2)]).ravel()
    off_lo = np.asarray(A[np.arange(1, n, 2), np.arange(0, n, 2)]).ravel()
    a, d2 = d[0::2], d[1::2]
    det = a * d2 - off_up * off_lo
    bad = np.abs(det) <= 1e-14 * np.maximum(np.abs(a * d2), _TINY)
    if np.any(bad):
        # singular block: drop the coupling there
        off_up = np.where(bad, 0.0, off_up)
        off_lo = np.where(bad, 0.0, off_lo)
        det = np.where(bad, a * d2, det)
        if np.any(det == 0):
            raise Breakdown("singular diagonal block, preconditioner undefined")
    i00, i01, i10, i11 = d2 / det, -off_up / det, -off_lo / det, a / det

    def apply(r):
        z = np.empty_like(r)
        r0, r1 = r[0::2], r[1::2]
        z[0::2] = i00 * r0 + i01 * r1
        z[1::2] = i10 * r0 + i11 * r1
        return z

    return apply


def residual_norm(A, x, b) -> float:
    A = _as_csr(A)
    return float(np.linalg.norm(np.asarray(b) - A @ np.asarray(x)))


def solve(A, b, tol=1e-10, maxiter=None, x0=None) -> SolveResult:
    """Solve ``A x = b`` until ``||b - A x|| <= tol * ||b||``.

    ``A`` may be a scipy sparse matrix, a dense array or any object with a
    ``to_scipy()`` method. A warm start ``x0`` is used when given.
    Raises :class:`Breakdown` when a scalar recurrence collapses twice in a
    row and :class:`MaxIterExceeded` (carrying the best iterate) when the
    iteration budget is spent.
    """
    A = _as_csr(A)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match rhs length {n}")
    if maxiter is None:
        maxiter = 10 * n
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return SolveResult(np.zeros(n), 0, 0.0)
    target = tol * bnorm
    P = block_jacobi(A)

    r = b - A @ x
    rnorm = np.linalg.norm(r)
    best = (rnorm, x.copy())
    if rnorm <= target:
        return SolveResult(x, 0, float(rnorm))

    restarts = 0
    it = 0
    while True:
        r_hat = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros(n)
        p = np.zeros(n)
        broke = False
        while it < maxiter:
            it += 1
            rho_new = r_hat @ r
            if abs(rho_new) < _TINY * max(np.linalg.norm(r_hat) * rnorm, _TINY):
                broke = True
                break
            beta = (rho_new / rho) * (alpha / omega)
            rho = rho_new
            p = r + beta * (p - omega * v)
            p_hat = P(p)
            v = A @ p_hat
            denom = r_hat @ v
            if abs(denom) < _TINY * max(np.linalg.norm(r_hat) * np.linalg.norm(v), _TINY):
                broke = True
                break
            alpha = rho / denom
            s = r - alpha * v
            snorm = np.linalg.norm(s)
            if snorm <= target:
                x = x + alpha * p_hat
                return SolveResult(x, it, float(np.linalg.norm(b - A @ x)))
            s_hat = P(s)
            t = A @ s_hat
            tt = t @ t
            if tt < _TINY:
                broke = True
                break
            omega = (t @ s) / tt
            x = x + alpha * p_hat + omega * s_hat
            r = s - omega * t
            rnorm = np.linalg.norm(r)
            if rnorm < best[0]:
                best = (rnorm, x.copy())
            if rnorm <= target:
                true = float(np.linalg.norm(b - A @ x))
                if true <= target:
                    return SolveResult(x, it, true)
                r, rnorm = b - A @ x, true  # recurrence drifted; restart from true residual
                break
            if abs(omega) < _TINY:
                broke = True
                break
        if it >= maxiter:
            res = SolveResult(best[1], it, float(best[0]))
            raise MaxIterExceeded(
                f"BiCGStab did not reach tol={tol:g} in {maxiter} iterations "
                f"(best residual {best[0]:.3e}, ||b||={bnorm:.3e})",
                res,
            )
        if broke:
            restarts += 1
            if restarts > 1:
                raise Breakdown(f"BiCGStab breakdown at iteration {it} after restart")
            r = b - A @ x
            rnorm = np.linalg.norm(r)
            if rnorm <= target:
                return SolveResult(x, it, float(rnorm))
        else:
            restarts = 0
