"""Accuracy metrics, the Brownian-motion simulator and missingness injection."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .batch import EigenBasis
from .errors import DimensionError
from .imputation import MaskedVector

ORTHO_TOL = 1e-8


def _check_orthonormal(U, name):
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    resid = float(np.linalg.norm(U.T @ U - np.eye(U.shape[1])))
    if resid > ORTHO_TOL:
        raise ValueError(f"{name} columns are not orthonormal (|U^T U - I|_F = {resid:.3e})")
    return U


def eigenspace_error(U_hat, U_true) -> float:
    """Relative squared Frobenius distance between the two projectors.

    Equals ``2 (1 - tr(P_hat P) / q)`` for equal ranks, so it lies in
    [0, 2] and ignores signs and rotations within either subspace.
    """
    U_hat = _check_orthonormal(U_hat, "U_hat")
    U_true = _check_orthonormal(U_true, "U_true")
    if U_hat.shape[0] != U_true.shape[0]:
        raise DimensionError("U_hat and U_true live in different dimensions")
    q_hat, q = U_hat.shape[1], U_true.shape[1]
    overlap = float(np.sum((U_true.T @ U_hat) ** 2))
    return max((q_hat + q - 2.0 * overlap) / q, 0.0)


def compression_loss(X, basis: EigenBasis, centered=True, mean=None, return_skipped=False):
    """Average squared reconstruction error of the rows of ``X``.

    Centered: (1/n) sum |(x - mean) - P(x - mean)|^2. Uncentered:
    (1/n) sum |x - P x|^2 / |x|^2, where rows of zero norm are skipped and
    the average is over the remaining rows. With ``return_skipped`` the
    number of skipped rows is returned as a second value.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = basis.U if isinstance(basis, EigenBasis) else np.asarray(basis)
    skipped = 0
    if centered:
        if mean is None:
            raise ValueError("centered compression loss needs the mean")
        Xc = X - np.asarray(mean, dtype=float)
        R = Xc - (Xc @ U) @ U.T
        loss = float(np.sum(R * R) / X.shape[0])
    else:
        R = X - (X @ U) @ U.T
        norms = np.sum(X * X, axis=1)
        ok = norms > 0
        skipped = int((~ok).sum())
        loss = float(np.mean(np.sum(R[ok] ** 2, axis=1) / norms[ok])) if ok.any() else 0.0
    return (loss, skipped) if return_skipped else loss


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def replication_rng(master_seed, replication, stream=0):
    """Independent generator for one replication of an experiment.

    Stream 0 draws the data and stream 1 the missingness pattern, so runs
    that differ only in their missing fraction see the same curves.
    """
    return np.random.default_rng(np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=(int(replication), int(stream))))


def brownian_sample(d, rng=None):
    """Brownian motion observed at t = 1/d, ..., 1 (covariance min(k, l)/d)."""
    if d < 1:
        raise ValueError("d must be positive")
    rng = as_rng(rng)
    return np.cumsum(rng.normal(scale=np.sqrt(1.0 / d), size=d))


def brownian_matrix(n, d, rng=None):
    """``n`` independent Brownian paths as the rows of an n x d matrix."""
    rng = as_rng(rng)
    return np.cumsum(rng.normal(scale=np.sqrt(1.0 / d), size=(n, d)), axis=1)


def brownian_covariance(d):
    k = np.arange(1, d + 1)
    return np.minimum.outer(k, k) / d


@lru_cache(maxsize=16)
def _brownian_eigh(d):
    w, V = np.linalg.eigh(brownian_covariance(d))
    return w[::-1].copy(), V[:, ::-1].copy()


def brownian_eigenbasis(d, q):
    """Exact top-``q`` eigenpairs of the Brownian covariance."""
    w, V = _brownian_eigh(d)
    return EigenBasis(V[:, :q].copy(), w[:q].copy(), 0)


def inject_missing(x, fraction, rng=None) -> MaskedVector:
    """Hide ``round(fraction * d)`` coordinates chosen without replacement."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("missing fraction must lie in [0, 1)")
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    m = int(np.floor(fraction * d + 0.5))
    observed = np.ones(d, dtype=bool)
    if m:
        observed[as_rng(rng).choice(d, size=m, replace=False)] = False
    return MaskedVector(x, observed)
