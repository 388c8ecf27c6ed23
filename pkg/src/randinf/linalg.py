"""Cyclic Jacobi eigensolver for symmetric matrices.

Deterministic and accurate at the matrix sizes this package works with
(a few hundred at most); used for psd checks and largest-eigenvalue queries
on variance-decomposition matrices.
"""

from __future__ import annotations

import math

import numpy as np

SYMMETRY_TOL = 1e-10


def _check_symmetric(matrix) -> np.ndarray:
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    if float(np.max(np.abs(a - a.T))) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    return (a + a.T) / 2.0


def off_diagonal_norm(a: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part."""
    off = a - np.diag(np.diagonal(a))
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigenvalues(matrix, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.

    Sweeps row-major over all (p, q) pairs, rotating each nonzero pivot away,
    until the off-diagonal Frobenius norm drops below ``tol`` (absolute, with
    a floor proportional to machine precision at the matrix scale).
    """
    a = _check_symmetric(matrix)
    n = a.shape[0]
    if n == 1:
        return np.diagonal(a).copy()
    # Roundoff floor: off-norm cannot reliably shrink below ~n*eps*scale.
    scale = float(np.max(np.abs(a)))
    stop = max(tol, 4.0 * n * np.finfo(float).eps * scale)
    for _ in range(max_sweeps):
        if off_diagonal_norm(a) <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # Skip pivots already negligible at working precision.
                if abs(apq) <= 0.5 * np.finfo(float).eps * (abs(a[p, p]) + abs(a[q, q])):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, q] = a[q, p] = 0.0
    else:
        raise RuntimeError(
            f"Jacobi iteration did not reach off-norm {stop:g} in {max_sweeps} sweeps"
        )
    return np.sort(np.diagonal(a).copy())


def largest_eigenvalue(matrix, tol: float = 1e-12) -> float:
    return float(jacobi_eigenvalues(matrix, tol=tol)[-1])


def smallest_eigenvalue(matrix, tol: float = 1e-12) -> float:
    return float(jacobi_eigenvalues(matrix, tol=tol)[0])
