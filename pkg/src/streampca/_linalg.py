"""Small dense linear-algebra helpers shared by the estimators."""

import numpy as np

from .errors import DimensionError, NonFiniteError


def gram_schmidt(U):
    """Orthonormalize the columns of ``U`` in order.

    Computed through a Householder QR whose R factor is forced to have a
    nonnegative diagonal, which yields the same basis as classical
    Gram-Schmidt but without its loss of orthogonality.
    """
    Q, R = np.linalg.qr(U)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def inv_sqrt_psd(G, rcond=1e-12):
    """Inverse symmetric square root of a positive definite matrix.

    Raises ``np.linalg.LinAlgError`` if ``G`` is numerically singular.
    """
    w, V = np.linalg.eigh(G)
    if w[0] <= rcond * max(w[-1], 0.0):
        raise np.linalg.LinAlgError(
            f"Gram matrix is numerically singular (min eig {w[0]:.3e}, "
            f"max eig {w[-1]:.3e}); use a smaller learning-rate constant c")
    return (V / np.sqrt(w)) @ V.T


def sqrt_psd(M):
    """Symmetric square root and inverse square root of an SPD matrix."""
    w, V = np.linalg.eigh(M)
    if w[0] <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    s = np.sqrt(w)
    return (V * s) @ V.T, (V / s) @ V.T


def sort_desc(values, U):
    """Reorder eigenpairs so that ``values`` is nonincreasing."""
    order = np.argsort(values)[::-1]
    return values[order], U[:, order]


def as_vector(x, d=None, name="x"):
    """Coerce to a finite float vector, checking its length against ``d``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        x = x.reshape(-1)
    if d is not None and x.shape[0] != d:
        raise DimensionError(f"{name} has length {x.shape[0]}, expected {d}")
    if not np.isfinite(x).all():
        raise NonFiniteError(f"{name} contains non-finite entries")
    return x
