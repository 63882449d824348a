"""Shared dense linear-algebra helpers.

All factorizations in the package go through :func:`jittered_cholesky`,
which applies the package-wide regularization rule: a diagonal offset of
``1e-8 * scale`` is always added, escalating by factors of 10 up to
``1e-4 * scale`` before giving up.  ``scale`` defaults to the mean
diagonal of the matrix.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import NumericError

JITTER_FIRST = 1e-8
JITTER_LAST = 1e-4
DIAG_FLOOR = 1e-12


def jittered_cholesky(a: np.ndarray, scale: float | None = None) -> np.ndarray:
    """Lower Cholesky factor of ``a`` with the escalating-jitter rule.

    Raises NumericError with condition diagnostics if the matrix is still
    not positive definite at the largest allowed offset.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros_like(a)
    if scale is None:
        scale = float(np.mean(np.abs(np.diag(a))))
    if scale <= 0.0:
        scale = 1.0
    eye = np.eye(a.shape[0])
    jitter = JITTER_FIRST * scale
    while jitter <= JITTER_LAST * scale * (1.0 + 1e-12):
        try:
            return np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    eigmin = float(np.linalg.eigvalsh(a)[0])
    raise NumericError(
        "matrix not positive definite after jitter up to "
        f"{JITTER_LAST * scale:.3e} (min eigenvalue {eigmin:.3e}, "
        f"dim {a.shape[0]})"
    )


def chol_solve(chol_lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` given the lower Cholesky factor of ``A``."""
    if chol_lower.size == 0:
        return np.zeros_like(b)
    return cho_solve((chol_lower, True), b)


def tri_solve(chol_lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L x = b`` for lower-triangular ``L``."""
    if chol_lower.size == 0:
        return np.zeros_like(b)
    return solve_triangular(chol_lower, b, lower=True)


def chol_logdet(chol_lower: np.ndarray) -> float:
    """log|A| from the lower Cholesky factor of ``A``."""
    if chol_lower.size == 0:
        return 0.0
    return 2.0 * float(np.sum(np.log(np.diag(chol_lower))))


def split_scale_corr(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a covariance into (d, corr) with cov = diag(d) corr diag(d).

    Diagonal scales are floored at DIAG_FLOOR so degenerate (zero
    variance) coordinates stay representable; callers treating such
    coordinates specially should check the diagonal themselves.
    """
    cov = np.asarray(cov, dtype=float)
    d = np.sqrt(np.maximum(np.diag(cov), DIAG_FLOOR**2))
    d = np.maximum(d, DIAG_FLOOR)
    corr = cov / d[:, None] / d[None, :]
    return d, corr


def mvn_logpdf(residual: np.ndarray, cov: np.ndarray) -> float:
    """Zero-mean multivariate normal log density at ``residual``."""
    residual = np.atleast_1d(np.asarray(residual, dtype=float))
    if residual.size == 0:
        return 0.0
    chol = jittered_cholesky(cov)
    w = tri_solve(chol, residual)
    return float(
        -0.5 * w @ w - 0.5 * chol_logdet(chol) - 0.5 * residual.size * np.log(2.0 * np.pi)
    )
