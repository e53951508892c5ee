"""Direct dense linear algebra for the small systems this package handles.

Systems here are tiny (a handful of components, at most ~16), so a plain
row-pivoted LU with explicit substitution is the right tool and keeps
singularity reporting under our control.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SingularMatrixError",
    "lu_factor",
    "lu_solve",
    "lu_solve_factored",
    "inverse",
    "is_inverse_nonnegative",
]

# Pivots below this fraction of the largest input magnitude count as zero.
SINGULARITY_RTOL = 1e-14


class SingularMatrixError(ValueError):
    """Matrix is singular to working precision; names the dead pivot column."""

    def __init__(self, pivot_index, message=None):
        self.pivot_index = int(pivot_index)
        super().__init__(
            message
            or "matrix is singular to working precision: zero pivot in column %d"
            % self.pivot_index
        )


def _as_square(matrix):
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite")
    return a


def lu_factor(matrix):
    """Row-pivoted LU factorization.

    Returns (lu, perm) with the unit-lower and upper factors packed into one
    array so that matrix[perm] = L @ U. Partial pivoting is cheap at this
    size and protects callers that hand us matrices without row dominance.
    """
    a = _as_square(matrix).copy()
    n = a.shape[0]
    tol = SINGULARITY_RTOL * float(np.abs(a).max())
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) <= tol:
            raise SingularMatrixError(k)
        if p != k:
            a[[k, p]] = a[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        if k + 1 < n:
            a[k + 1 :, k] /= a[k, k]
            a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k, k + 1 :])
    return a, perm


def lu_solve_factored(lu, perm, rhs):
    """Solve with factors from lu_factor: forward then back substitution."""
    x = np.asarray(rhs, dtype=float)[perm]
    n = lu.shape[0]
    for k in range(1, n):
        x[k] -= lu[k, :k] @ x[:k]
    for k in range(n - 1, -1, -1):
        if k + 1 < n:
            x[k] -= lu[k, k + 1 :] @ x[k + 1 :]
        x[k] /= lu[k, k]
    return x


def lu_solve(matrix, rhs):
    """Solve matrix @ x = rhs for one right-hand side."""
    a = _as_square(matrix)
    b = np.asarray(rhs, dtype=float)
    if b.shape != (a.shape[0],):
        raise ValueError(
            f"right-hand side shape {b.shape} does not match matrix size {a.shape[0]}"
        )
    if not np.isfinite(b).all():
        raise ValueError("right-hand side entries must be finite")
    lu, perm = lu_factor(a)
    return lu_solve_factored(lu, perm, b)


def inverse(matrix):
    """Explicit inverse, solved column by column; fine at this size."""
    a = _as_square(matrix)
    n = a.shape[0]
    lu, perm = lu_factor(a)
    eye = np.eye(n)
    out = np.empty((n, n))
    for j in range(n):
        out[:, j] = lu_solve_factored(lu, perm, eye[:, j])
    return out


def is_inverse_nonnegative(matrix, tol=1e-12):
    """True iff every entry of the inverse is >= -tol.

    This is the certificate behind monotonicity of the time stepping
    operator: matrices with positive diagonal, nonpositive off-diagonal
    entries and strict row dominance always pass.
    """
    return bool((inverse(matrix) >= -float(tol)).all())
