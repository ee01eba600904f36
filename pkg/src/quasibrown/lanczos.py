"""Block Lanczos for the lowest eigenpairs of a sparse SPD matrix.

The Krylov space is built for ``A^{-1}`` (sparse LU, shift zero) so the
wanted low end of the spectrum becomes the dominant end.  Every new block
is reorthogonalized against the whole basis (twice), and Ritz pairs come
from the projected matrix ``V^T A^{-1} V``.  Convergence is judged on the
true residual ``||A x - lam x|| / lam``.  A block of width > 1 lets
degenerate eigenvalues (rectangles) be resolved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _rng
from .exceptions import SolverError, ValidationError

RESIDUAL_TOL = 1e-8
ITERATION_BUDGET = 10_000


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    basis_size: int


def _orthonormalize_against(basis: np.ndarray | None, block: np.ndarray) -> np.ndarray:
    if basis is not None and basis.size:
        for _ in range(2):
            block = block - basis @ (basis.T @ block)
    q, r = np.linalg.qr(block)
    keep = np.abs(np.diag(r)) > 1e-10 * max(1.0, np.max(np.abs(np.diag(r)), initial=0.0))
    return q[:, keep]


def lowest_eigenpairs(A, k: int, tol: float = RESIDUAL_TOL, max_iter: int = ITERATION_BUDGET,
                      block_size: int | None = None, seed: int = 0) -> EigenResult:
    """Lowest ``k`` eigenpairs of the symmetric positive definite ``A``."""
    A = sp.csc_matrix(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValidationError("matrix must be square")
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in [1, {n}], got {k}")
    b = block_size or min(k, 4)
    lu = spla.splu(A)
    gen = _rng.make_stream(seed, 0, _rng.PURPOSE_LANCZOS)

    basis = _orthonormalize_against(None, gen.standard_normal((n, b)))
    images = lu.solve(basis)
    iterations = 0
    best = None
    while True:
        iterations += 1
        m = basis.shape[1]
        T = basis.T @ images
        T = 0.5 * (T + T.T)
        theta, S = sla.eigh(T)
        order = np.argsort(theta)[::-1][:k]
        if order.size == k:
            theta_k = theta[order]
            X = basis @ S[:, order]
            lam = 1.0 / theta_k
            R = A @ X - X * lam
            res = np.linalg.norm(R, axis=0) / np.abs(lam)
            idx = np.argsort(lam)
            best = EigenResult(lam[idx], X[:, idx], res[idx], iterations, m)
            if np.all(res <= tol):
                return best
        if m >= n:
            break
        if iterations * b >= max_iter:
            break
        new = _orthonormalize_against(basis, images[:, -b:])
        if new.shape[1] == 0:
            # invariant subspace found; restart with fresh directions
            new = _orthonormalize_against(basis, gen.standard_normal((n, b)))
            if new.shape[1] == 0:
                break
        basis = np.hstack([basis, new])
        images = np.hstack([images, lu.solve(new)])

    raise SolverError(
        f"block Lanczos did not reach residual {tol:g} in {iterations} iterations",
        residuals=None if best is None else best.residuals)
