"""Normalized Laplacian, adjacency/Laplacian spectral embeddings, alignment.

The Laplacian here is L(M) = diag(M 1)^{-1/2} M diag(M 1)^{-1/2}, whose
spectrum lies in [-1, 1]; it is invariant to positive rescaling of M. The
adjacency spectral embedding (ASE) takes the d eigenpairs of A largest in
magnitude; the Laplacian spectral embedding (LSE) takes the d algebraically
largest eigenpairs of L(A). Both scale eigenvectors by the square roots of
the eigenvalues.

Everything is dense: desk scale is n <= 4000 and determinism beats speed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceFailure,
    NegativeTopEigenvalue,
    ZeroDegreeVertex,
    ZeroExpectedDegree,
)

BY_MAGNITUDE = "magnitude"
BY_VALUE = "value"

ASE = "ase"
LSE = "lse"


@dataclass(frozen=True)
class Embedding:
    """Embedded rows with the method tag ('ase' or 'lse') and dimension."""

    rows: np.ndarray
    method: str
    dim: int


@dataclass(frozen=True)
class AlignmentResult:
    """Orthogonal matrix W minimizing ||Y W - X||_F, with the attained residual."""

    rotation: np.ndarray
    residual_frobenius: float
    degenerate: bool = False


def normalized_laplacian(A: np.ndarray) -> np.ndarray:
    """Return diag(A 1)^{-1/2} A diag(A 1)^{-1/2}.

    Raises ZeroDegreeVertex(i) on the first zero row sum; callers must
    resample or abort rather than dropping vertices.
    """
    A = np.asarray(A, dtype=float)
    degrees = A.sum(axis=1)
    zero = np.flatnonzero(degrees <= 0)
    if zero.size:
        raise ZeroDegreeVertex(int(zero[0]))
    inv_sqrt = 1.0 / np.sqrt(degrees)
    L = A * inv_sqrt[:, None] * inv_sqrt[None, :]
    return (L + L.T) / 2.0


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-|entry| coordinate of each column positive (first on ties)."""
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        idx = int(np.argmax(np.abs(vectors[:, j])))
        if vectors[idx, j] < 0:
            vectors[:, j] = -vectors[:, j]
    return vectors


def _eigh_subset(M: np.ndarray, lo: int, hi: int):
    try:
        return scipy.linalg.eigh(M, subset_by_index=[lo, hi])
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - solver failure
        raise ConvergenceFailure(str(exc)) from exc


def symmetric_eig_top(M: np.ndarray, d: int, order: str):
    """Top-d eigenpairs of a symmetric matrix under the requested ordering.

    order='magnitude' ranks by |lambda| (ties: larger lambda first, then
    lower position in the ascending spectrum); order='value' ranks by
    lambda descending. Eigenvector signs follow a fixed convention so that
    repeated runs agree.

    Returns
    -------
    values : (d,) ndarray
    vectors : (n, d) ndarray with orthonormal columns.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError(f"matrix must be square, got {M.shape}")
    if not 1 <= d <= n:
        raise ValueError(f"d must be in [1, {n}], got {d}")

    if order == BY_VALUE:
        vals, vecs = _eigh_subset(M, n - d, n - 1)
        sel = np.argsort(-vals, kind="stable")
    elif order == BY_MAGNITUDE:
        # Top d by |lambda| live among the d algebraically largest and the d
        # algebraically smallest; pull both ends and rank the candidates.
        hi_vals, hi_vecs = _eigh_subset(M, n - d, n - 1)
        if d < n:
            lo_vals, lo_vecs = _eigh_subset(M, 0, d - 1)
            vals = np.concatenate([lo_vals, hi_vals])
            vecs = np.hstack([lo_vecs, hi_vecs])
            positions = np.concatenate([np.arange(d), np.arange(n - d, n)])
            # the two ends overlap when d > n/2; keep each position once
            _, keep = np.unique(positions, return_index=True)
            vals, vecs, positions = vals[keep], vecs[:, keep], positions[keep]
        else:
            vals, vecs, positions = hi_vals, hi_vecs, np.arange(n)
        keys = sorted(
            range(len(vals)),
            key=lambda i: (-abs(vals[i]), -vals[i], positions[i]),
        )
        sel = np.asarray(keys[:d])
    else:
        raise ValueError(f"unknown order {order!r}")

    values = vals[sel]
    vectors = _fix_signs(vecs[:, sel])
    return values, vectors


def ase(A: np.ndarray, d: int) -> Embedding:
    """Adjacency spectral embedding: rows of U S^{1/2} for the top-d by |lambda|.

    S holds the eigenvalue magnitudes, so negative eigenvalues embed via
    |lambda|^{1/2}; a warning is emitted when that happens (it is routine
    for weak blocks whose signal eigenvalue sits below the noise edge).
    """
    values, vectors = symmetric_eig_top(A, d, BY_MAGNITUDE)
    negative = np.flatnonzero(values < 0)
    if negative.size:
        k = int(negative[0])
        warnings.warn(
            f"adjacency eigenvalue #{k} = {values[k]:.4g} is negative; "
            "embedding uses its magnitude",
            stacklevel=2,
        )
    rows = vectors * np.sqrt(np.abs(values))
    return Embedding(rows=rows, method=ASE, dim=d)


def lse(A: np.ndarray, d: int) -> Embedding:
    """Laplacian spectral embedding: top-d algebraically largest eigenpairs of L(A)."""
    L = normalized_laplacian(A)
    values, vectors = symmetric_eig_top(L, d, BY_VALUE)
    negative = np.flatnonzero(values < -1e-10)
    if negative.size:
        k = int(negative[0])
        raise NegativeTopEigenvalue(k, float(values[k]))
    rows = vectors * np.sqrt(np.clip(values, 0.0, None))
    return Embedding(rows=rows, method=LSE, dim=d)


def procrustes_align(Y: np.ndarray, X: np.ndarray) -> AlignmentResult:
    """Orthogonal W minimizing ||Y W - X||_F via the SVD of Y^T X.

    If Y^T X is numerically rank deficient the minimizer is not unique; a
    minimizer is still returned with the `degenerate` flag set.
    """
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    if Y.shape != X.shape:
        raise ValueError(f"shape mismatch: {Y.shape} vs {X.shape}")
    cross = Y.T @ X
    u, s, vt = np.linalg.svd(cross)
    tol = s[0] * cross.shape[0] * np.finfo(float).eps
    degenerate = bool(s[-1] <= tol)
    rotation = u @ vt
    residual = float(np.linalg.norm(Y @ rotation - X))
    return AlignmentResult(
        rotation=rotation, residual_frobenius=residual, degenerate=degenerate
    )


def tilde_latents(X: np.ndarray) -> np.ndarray:
    """Degree-normalized latents: row i is X_i / sqrt(sum_j X_i . X_j).

    This is the centering the Laplacian embedding estimates; it does not
    depend on the sparsity factor.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    expected = X @ X.sum(axis=0)
    bad = np.flatnonzero(expected <= 0)
    if bad.size:
        raise ZeroExpectedDegree(int(bad[0]))
    return X / np.sqrt(expected)[:, None]
