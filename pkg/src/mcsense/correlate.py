"""Rank-correlation induction and measurement.

``iman_conover`` reorders the columns of an independent sample so its
Spearman correlation matrix approaches a target while leaving every
column's marginal untouched (each output column is a permutation of the
input column).
"""

from __future__ import annotations

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .errors import NotPositiveDefiniteError, ParameterError

__all__ = ["iman_conover", "measured_spearman"]


def _cholesky_or_report(matrix: np.ndarray) -> np.ndarray:
    """Cholesky factor, or NotPositiveDefiniteError naming the first
    leading principal minor that fails."""
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        for j in range(1, matrix.shape[0] + 1):
            try:
                np.linalg.cholesky(matrix[:j, :j])
            except np.linalg.LinAlgError:
                raise NotPositiveDefiniteError(j) from None
        raise


def iman_conover(unit: np.ndarray, target: np.ndarray, seed: int) -> np.ndarray:
    """Reorder each column of ``unit`` toward a target Spearman matrix.

    The construction follows Iman and Conover's distribution-free scheme:
    van der Waerden scores (normal quantiles of rank/(n+1)), independently
    shuffled per column, are linearly transformed so their product-moment
    correlation matches the target, and each data column is then reordered
    to the rank order of the transformed scores. The score-space target is
    the 2*sin(pi*rho/6) conversion of the requested Spearman matrix, which
    makes the achieved rank correlation converge to the target itself.

    Parameters
    ----------
    unit : (n, k) array
        Sample whose marginals must be preserved.
    target : (k, k) array
        Desired Spearman correlations; symmetric, unit diagonal, positive
        definite.
    seed : int
        Seed for the score shuffle.

    Returns
    -------
    (n, k) array whose columns are permutations of the input columns.
    """
    unit = np.asarray(unit, dtype=float)
    n, k = unit.shape
    target = np.asarray(target, dtype=float)
    if target.shape != (k, k):
        raise ParameterError(f"target must be {k}x{k}, got {target.shape}")
    if not np.allclose(target, target.T, atol=1e-12):
        raise ParameterError("target correlation matrix must be symmetric")
    if not np.allclose(np.diag(target), 1.0, atol=1e-12):
        raise ParameterError("target correlation matrix must have unit diagonal")
    if n <= k:
        raise ParameterError(f"need more rows than columns (n={n}, k={k})")

    # Pearson correlation the normal scores must carry for the ranks to
    # show the requested Spearman correlation.
    score_target = 2.0 * np.sin(np.pi * target / 6.0)
    np.fill_diagonal(score_target, 1.0)
    p = _cholesky_or_report(score_target)

    rng = np.random.default_rng(seed)
    base = special.ndtri(np.arange(1, n + 1) / (n + 1.0))
    scores = np.empty((n, k))
    for j in range(k):
        scores[:, j] = base[rng.permutation(n)]

    # strip the shuffle's residual correlation, then impose the target
    q = _cholesky_or_report(np.corrcoef(scores, rowvar=False))
    shaped = scores @ np.linalg.inv(q).T @ p.T

    out = np.empty_like(unit)
    for j in range(k):
        ranks = np.argsort(np.argsort(shaped[:, j], kind="stable"), kind="stable")
        out[:, j] = np.sort(unit[:, j])[ranks]
    return out


def measured_spearman(matrix: np.ndarray) -> np.ndarray:
    """Spearman rank correlation matrix of the columns (average ranks for
    ties); symmetric with unit diagonal."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ParameterError("need an n x k matrix with n >= 2")
    ranks = np.column_stack([rankdata(matrix[:, j]) for j in range(matrix.shape[1])])
    rho = np.corrcoef(ranks, rowvar=False)
    rho = np.atleast_2d(rho)
    np.fill_diagonal(rho, 1.0)
    return rho
