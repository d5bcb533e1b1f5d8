"""Reduced-rank incremental PCA.

The covariance is approximated by ``U diag(D) U^T`` of rank q. A new
centered observation is split into its coordinates in span(U) and an
orthogonal residual; the updated approximation then lives in the span of
``[U, residual/|residual|]`` where it is represented by a small
(q+1) x (q+1) matrix. After diagonalizing that matrix the smallest
eigenpair is dropped to return to rank q.
"""

from __future__ import annotations

import numpy as np

from ._linalg import as_vector, gram_schmidt
from .batch import EigenBasis
from .moments import StreamMoments

RESIDUAL_TOL = 1e-10
REORTH_EVERY = 100


def q_matrix(values, c, resid_norm, w_old, w_new):
    """The (q+1) x (q+1) matrix representing the updated covariance.

    With equal weights ``w_old = n/(n+1)`` and ``w_new = n/(n+1)^2``.
    Pass ``resid_norm=None`` for the q x q zero-residual variant.
    """
    Q = w_new * np.outer(c, c)
    Q[np.diag_indices_from(Q)] += w_old * values
    if resid_norm is None:
        return Q
    q = c.shape[0]
    out = np.empty((q + 1, q + 1))
    out[:q, :q] = Q
    out[:q, q] = out[q, :q] = w_new * resid_norm * c
    out[q, q] = w_new * resid_norm ** 2
    return out


def ipca_update(basis: EigenBasis, moments: StreamMoments, x, rank=None) -> EigenBasis:
    """Incremental rank-one update of a truncated eigendecomposition.

    ``x`` is centered on ``moments.mean`` (the mean *before* ``x``), and the
    caller updates ``moments`` afterwards. ``rank`` is the number of
    components kept (default ``basis.q``); a larger value lets the basis grow
    by one column per step until it is reached.
    """
    x = as_vector(x, basis.d)
    rank = basis.q if rank is None else rank
    xt = x - moments.mean if moments.n > 0 or not moments.centered else np.zeros_like(x)
    w_old, w_new = moments.weights()

    U = basis.U
    c = U.T @ xt
    resid = xt - U @ c
    rn = float(np.linalg.norm(resid))
    if rn < RESIDUAL_TOL * max(float(np.linalg.norm(xt)), 1.0) or basis.q >= basis.d:
        Q = q_matrix(basis.values, c, None, w_old, w_new)
        aug = U
    else:
        Q = q_matrix(basis.values, c, rn, w_old, w_new)
        aug = np.column_stack([U, resid / rn])

    s, V = np.linalg.eigh(Q)
    s, V = s[::-1], V[:, ::-1]
    keep = min(rank, s.shape[0])
    U_new = aug @ V[:, :keep]
    n_new = basis.n + 1
    if n_new % REORTH_EVERY == 0:
        U_new = gram_schmidt(U_new)
    return EigenBasis(U_new, s[:keep].copy(), n_new, dict(basis.diagnostics))


def zero_basis(d, q, n=1):
    """Basis with zero eigenvalues, used to start from a single observation."""
    return EigenBasis(np.eye(d, q), np.zeros(q), n)
