"""Shared numeric helpers: validation, centering, orthonormalization and classical PCA."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBasisError, DimensionError

_PIVOT_TOL = 1e-12


def as_data_matrix(X) -> np.ndarray:
    """Validate and return ``X`` as a 2-D float64 array with finite entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"expected a non-empty n x p matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data matrix contains NaN or Inf")
    return X


def fix_signs(V: np.ndarray, U: np.ndarray | None = None):
    """Flip columns of ``V`` so each column's largest-magnitude entry is positive.

    The same flips are applied to ``U`` when given.  Returns ``V`` or ``(V, U)``.
    """
    V = np.array(V, dtype=np.float64, copy=True)
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    V *= signs
    if U is None:
        return V
    return V, np.asarray(U, dtype=np.float64) * signs


@dataclass(frozen=True)
class Spectrum:
    """Descending eigenvalues with matching orthonormal eigenvectors (as columns)."""

    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.eigenvalues)


def center_columns(X, mu) -> np.ndarray:
    X = as_data_matrix(X)
    mu = np.asarray(mu, dtype=np.float64).ravel()
    if mu.shape[0] != X.shape[1]:
        raise DimensionError(f"location has length {mu.shape[0]}, data has {X.shape[1]} columns")
    if not np.all(np.isfinite(mu)):
        raise ValueError("location vector is not finite")
    return X - mu


def gram_schmidt(columns) -> np.ndarray:
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    ``columns`` is a p x r array (or a sequence of r p-vectors).  Returns a
    p x r array with orthonormal columns spanning the same subspace, signs
    fixed by :func:`fix_signs`.
    """
    A = np.asarray(columns, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    elif not isinstance(columns, np.ndarray):
        # a list of vectors: one vector per entry
        A = A.T
    p, r = A.shape
    if r > p:
        raise DegenerateBasisError(f"{r} vectors cannot be independent in dimension {p}")
    Q = np.empty((p, r))
    for k in range(r):
        q = A[:, k].copy()
        for _ in range(2):
            for j in range(k):
                q -= (Q[:, j] @ q) * Q[:, j]
        nrm = np.linalg.norm(q)
        if nrm < _PIVOT_TOL:
            raise DegenerateBasisError(f"column {k} is linearly dependent on the previous ones")
        Q[:, k] = q / nrm
    return fix_signs(Q)


def classical_pca(X, r: int | None = None) -> Spectrum:
    """Eigen-decomposition of the divisor-n sample covariance, leading ``r`` pairs."""
    X = as_data_matrix(X)
    n, p = X.shape
    if r is None:
        r = min(n, p)
    if not 1 <= r <= min(n, p):
        raise DimensionError(f"rank {r} outside [1, {min(n, p)}]")
    Z = X - X.mean(axis=0)
    w, V = np.linalg.eigh(Z.T @ Z / n)
    order = np.argsort(w)[::-1][:r]
    w = np.clip(w[order], 0.0, None)
    return Spectrum(eigenvalues=w, vectors=fix_signs(V[:, order]))
