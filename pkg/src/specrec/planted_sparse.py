"""Recover a planted sparse direction from an orthonormal subspace basis.

The whole algorithm is: center the leverage scores of the basis rows, take
the top eigenvector of the resulting d x d matrix, and map it back up to
R^n through the basis.  Build cost is one pass over the rows, O(n d^2).
"""

from dataclasses import dataclass

import numpy as np

from .tensor_core import PowerIterReport, PowerIterSettings, power_iteration


@dataclass(frozen=True)
class PsvResult:
    recovered: np.ndarray  # unit vector in R^n
    coeff_vec: np.ndarray  # unit vector u in R^d with recovered = W u
    report: PowerIterReport
    correlation_sq: float | None  # <recovered, v0>^2 when ground truth supplied


def _check_orthonormal(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError(f"expected an n x d matrix, got shape {w.shape}")
    gram_resid = float(np.max(np.abs(w.T @ w - np.eye(w.shape[1]))))
    if gram_resid > 1e-6:
        raise ValueError(
            f"columns are not orthonormal: Gram residual {gram_resid!r} > 1e-6"
        )
    return w


def centered_leverage_matrix(w: np.ndarray) -> np.ndarray:
    """sum_i (||a_i||^2 - d/n) a_i a_i^T over the rows a_i of w, symmetrized."""
    w = _check_orthonormal(w)
    n, d = w.shape
    lev = np.einsum("ij,ij->i", w, w) - d / n
    a = (w * lev[:, None]).T @ w
    return 0.5 * (a + a.T)


def leverage_matvec(w: np.ndarray, x: np.ndarray, lev: np.ndarray | None = None) -> np.ndarray:
    """Implicit product (sum_i (||a_i||^2 - d/n) a_i a_i^T) x in O(nd) time."""
    n, d = w.shape
    if lev is None:
        lev = np.einsum("ij,ij->i", w, w) - d / n
    return w.T @ (lev * (w @ x))


def recover_sparse_vector(
    w: np.ndarray,
    settings: PowerIterSettings,
    v0: np.ndarray | None = None,
    implicit: bool = False,
) -> PsvResult:
    """Top eigenvector of the centered leverage matrix, mapped back to R^n.

    The d x d matrix is materialized by default (d^2 <= nd always holds for
    a basis); ``implicit=True`` instead runs power iteration on the O(nd)
    matrix-free operator, which exists for testing and API symmetry.
    Non-convergence is reported via the power-iteration report, never
    raised; the best iterate is still returned.
    """
    w = _check_orthonormal(w)
    n, d = w.shape
    if implicit:
        lev = np.einsum("ij,ij->i", w, w) - d / n

        def matvec(x):
            return leverage_matvec(w, np.asarray(x, dtype=np.float64), lev)

        report = power_iteration(matvec, d, settings)
    else:
        a = centered_leverage_matrix(w)
        report = power_iteration(lambda x: a @ x, d, settings)
    u = report.eigvec
    su = w @ u
    corr = None if v0 is None else float(np.dot(su, v0)) ** 2
    return PsvResult(recovered=su, coeff_vec=u, report=report, correlation_sq=corr)
