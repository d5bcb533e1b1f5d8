"""Dense batch PCA and the eigenbasis container shared by all estimators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


@dataclass
class EigenBasis:
    """Orthonormal basis ``U`` (d x q), eigenvalues (nonincreasing) and count."""

    U: np.ndarray
    values: np.ndarray
    n: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.U.shape[0]

    @property
    def q(self) -> int:
        return self.U.shape[1]

    def copy(self):
        return EigenBasis(self.U.copy(), self.values.copy(), self.n, dict(self.diagnostics))

    def orthonormality_error(self) -> float:
        """Frobenius norm of ``U^T U - I``."""
        return float(np.linalg.norm(self.U.T @ self.U - np.eye(self.q)))

    def truncate(self, q):
        return EigenBasis(self.U[:, :q].copy(), self.values[:q].copy(), self.n,
                          dict(self.diagnostics))

    def projector(self):
        return self.U @ self.U.T


def batch_pca(X, q, centered=True):
    """Top-``q`` eigenpairs of the (1/n) sample covariance of the rows of ``X``.

    Returns ``(basis, mean)``. When d > n the n x n Gram matrix of the
    centered data is diagonalized instead and its eigenvectors mapped back;
    directions beyond the data's rank are completed to an orthonormal set
    with zero eigenvalues and ``basis.diagnostics["rank_deficient"]`` is set.
    All-identical rows give zero eigenvalues and ``"degenerate": True``.
    With ``centered=False`` the second-moment matrix is used and the
    returned mean is zero.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X must be a two-dimensional array")
    n, d = X.shape
    if n < 2:
        raise ValueError("batch PCA needs at least two observations")
    if not 1 <= q <= min(n, d):
        raise ValueError(f"q must lie in [1, {min(n, d)}], got {q}")
    mean = X.mean(axis=0) if centered else np.zeros(d)
    Xc = X - mean
    diagnostics = {}

    if d <= n:
        w, V = np.linalg.eigh(Xc.T @ Xc / n)
        values, U = w[::-1][:q], V[:, ::-1][:, :q]
    else:
        w, V = np.linalg.eigh(Xc @ Xc.T / n)
        w, V = w[::-1][:q], V[:, ::-1][:, :q]
        tol = max(w[0], 0.0) * n * np.finfo(float).eps * 10
        keep = w > tol
        U = np.zeros((d, q))
        U[:, keep] = Xc.T @ V[:, keep] / np.sqrt(n * w[keep])
        values = np.where(keep, w, 0.0)
        if not keep.all():
            diagnostics["rank_deficient"] = True
            U[:, ~keep] = _complete_basis(U[:, keep], int((~keep).sum()))

    scale = np.abs(values).max() if values.size else 0.0
    if scale <= np.finfo(float).tiny or np.allclose(Xc, 0.0):
        diagnostics["degenerate"] = True
    return EigenBasis(U, values.copy(), n, diagnostics), mean


def _complete_basis(U, k):
    """Return ``k`` orthonormal columns orthogonal to the columns of ``U``."""
    d = U.shape[0]
    out = []
    basis = U
    for e in np.eye(d):
        v = e - basis @ (basis.T @ e)
        v = v - basis @ (basis.T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            v = v / nv
            out.append(v)
            basis = np.column_stack([basis, v])
            if len(out) == k:
                break
    return np.column_stack(out)


def canonicalize_signs(basis: EigenBasis) -> EigenBasis:
    """Flip column signs so each column's largest-magnitude entry is nonnegative.

    Ties in magnitude resolve to the first such entry, which keeps the map
    idempotent.
    """
    U = basis.U
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return EigenBasis(U * signs, basis.values.copy(), basis.n, dict(basis.diagnostics))


