"""Rank-one eigendecomposition updates of a full covariance eigenbasis.

Two methods are provided. :func:`perturb_approx_update` applies first-order
perturbation formulas to the eigenpairs, which is cheap but accumulates
error. :func:`secular_update` rewrites the covariance recursion as a
diagonal-plus-rank-one problem in the current eigenbasis and solves it
exactly through the roots of the secular function

    f(t) = 1 + delta * sum_j c_j**2 / (lambda_j - t).

Both keep every eigenpair (q = d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import as_vector, gram_schmidt, sort_desc
from .batch import EigenBasis
from .errors import DegeneracyError, DimensionError, DivergenceError, SecularConvergenceError
from .moments import StreamMoments

DEFLATION_TOL = 1e-12
MAX_ITER = 200
BRACKET_RTOL = 1e-13


@dataclass
class SecularProblem:
    """Eigenvalues of ``diag(eigs) + delta * c c^T``.

    ``c`` is normalized on construction and its squared norm folded into
    ``delta``.
    """

    eigs: np.ndarray
    c: np.ndarray
    delta: float

    def __post_init__(self):
        self.eigs = np.asarray(self.eigs, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if c.shape != self.eigs.shape:
            raise DimensionError("eigs and c must have the same length")
        nc = np.linalg.norm(c)
        if nc == 0.0:
            self.c = c
            self.delta = 0.0
        else:
            self.c = c / nc
            self.delta = float(self.delta) * nc * nc

    def residual(self, roots):
        """Relative secular-function residual at each root."""
        z = self.c ** 2
        diff = self.eigs[None, :] - np.asarray(roots)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = self.delta * z[None, :] / diff
        f = 1.0 + np.nansum(np.where(z[None, :] > 0, terms, 0.0), axis=1)
        scale = 1.0 + np.nansum(np.abs(np.where(z[None, :] > 0, terms, 0.0)), axis=1)
        return np.abs(f) / scale


def solve_secular(problem: SecularProblem) -> np.ndarray:
    """Eigenvalues of ``diag(eigs) + delta c c^T``, sorted nonincreasing.

    Components with negligible ``c_j`` or (near-)repeated eigenvalues are
    deflated first; their eigenvalues pass through unchanged.
    """
    values, _ = rank_one_eigh(problem.eigs, problem.c, problem.delta)
    return values


def rank_one_eigh(eigs, c, delta):
    """Eigendecomposition of ``diag(eigs) + delta * c c^T``.

    ``eigs`` need not be sorted. Returns ``(values, W)`` with values
    nonincreasing and ``W`` orthogonal such that
    ``diag(eigs) + delta c c^T = W diag(values) W^T``.
    """
    eigs = np.asarray(eigs, dtype=float)
    c = np.asarray(c, dtype=float)
    d = eigs.shape[0]
    order = np.argsort(eigs)  # ascending working order
    a = eigs[order]
    z = c[order]
    nc = np.linalg.norm(z)
    if delta == 0.0 or nc == 0.0:
        W = np.eye(d)[:, order]
        return a[::-1].copy(), W[:, ::-1].copy()
    z = z / nc
    delta = float(delta) * nc * nc

    # Householder reflections inside clusters of (numerically) equal
    # eigenvalues concentrate c's weight on one member of each cluster.
    G = np.eye(d)
    scale = np.abs(a).max()
    gap_tol = DEFLATION_TOL * scale if scale > 0 else 0.0
    start = 0
    for i in range(1, d + 1):
        if i == d or a[i] - a[i - 1] > gap_tol:
            if i - start > 1:
                _concentrate(G, z, start, i)
            start = i

    active = np.abs(z) >= DEFLATION_TOL
    values = a.copy()
    Wa = np.eye(d)
    idx = np.flatnonzero(active)
    if idx.size:
        roots, vecs = _solve_active(a[idx], z[idx], delta)
        values[idx] = roots
        Wa[np.ix_(idx, idx)] = vecs
    W = G @ Wa
    values, W = sort_desc(values, W)
    # back to the caller's (unsorted) coordinate order
    Wout = np.empty_like(W)
    Wout[order, :] = W
    return values, Wout


def _concentrate(G, z, lo, hi):
    """Reflect z[lo:hi] onto its last entry, accumulating the reflector in G."""
    seg = z[lo:hi]
    nrm = np.linalg.norm(seg)
    if nrm < DEFLATION_TOL:
        return
    target = np.zeros_like(seg)
    target[-1] = nrm if seg[-1] >= 0 else -nrm
    v = seg - target
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return
    v /= nv
    H = np.eye(hi - lo) - 2.0 * np.outer(v, v)
    G[:, lo:hi] = G[:, lo:hi] @ H
    z[lo:hi] = target


def _solve_active(a, z, delta):
    """Roots and eigenvectors for strictly increasing ``a`` and nonzero ``z``.

    Returns roots in the order of ``a`` (ascending) and the matching unit
    eigenvectors as columns.
    """
    if delta < 0:
        roots, vecs = _solve_positive(-a[::-1], z[::-1], -delta)
        return -roots[::-1], vecs[::-1, ::-1]
    return _solve_positive(a, z, delta)


def _solve_positive(a, z, delta):
    k = a.shape[0]
    w = z * z
    lo = a.copy()
    hi = np.empty(k)
    hi[:-1] = a[1:]
    hi[-1] = a[-1] + delta * w.sum()

    # shift the origin of each root to the nearer pole so that the
    # differences (a_j - root) are computed without cancellation
    mid = 0.5 * (lo + hi)
    f_mid = 1.0 + delta * np.sum(w[None, :] / (a[None, :] - mid[:, None]), axis=1)
    use_lo = f_mid >= 0.0
    use_lo[-1] = True
    origin_idx = np.where(use_lo, np.arange(k), np.minimum(np.arange(k) + 1, k - 1))
    origin = a[origin_idx]
    diff = a[None, :] - origin[:, None]
    lower = np.where(use_lo, 0.0, mid - hi)
    upper = np.where(use_lo, mid - lo, 0.0)
    upper[-1] = hi[-1] - lo[-1]

    tau = 0.5 * (lower + upper)
    done = np.zeros(k, dtype=bool)
    for _ in range(MAX_ITER):
        den = diff - tau[:, None]
        f = 1.0 + delta * np.sum(w / den, axis=1)
        fp = delta * np.sum(w / (den * den), axis=1)
        lower = np.where(~done & (f < 0.0), tau, lower)
        upper = np.where(~done & (f > 0.0), tau, upper)
        done |= f == 0.0
        done |= upper - lower <= BRACKET_RTOL * np.maximum(np.abs(lower), np.abs(upper))
        if done.all():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = tau - f / fp
        ok = (newton > lower) & (newton < upper)
        step = np.where(ok, newton, 0.5 * (lower + upper))
        tau_next = np.where(done, tau, step)
        done |= ok & (np.abs(step - tau) <= BRACKET_RTOL * np.abs(tau))
        done |= step == tau
        tau = tau_next
    else:
        den = diff - tau[:, None]
        f = 1.0 + delta * np.sum(w / den, axis=1)
        rel = np.abs(f) / (1.0 + np.abs(delta) * np.sum(w / np.abs(den), axis=1))
        bad = np.flatnonzero(rel > 1e-10)
        if bad.size:
            i = int(bad[0])
            raise SecularConvergenceError(
                f"secular root {i} did not converge in {MAX_ITER} iterations",
                bracket=(origin[i] + lower[i], origin[i] + upper[i]),
                residual=float(rel[i]))

    roots = origin + tau
    vecs = z[:, None] / (diff - tau[:, None]).T
    vecs /= np.linalg.norm(vecs, axis=0)
    return roots, vecs


def _centered(basis, moments, x):
    if basis.q != basis.d:
        raise DimensionError("perturbation updates need a full basis (q = d)")
    x = as_vector(x, basis.d)
    if moments.n < 1:
        raise ValueError("moments must hold at least one observation")
    return x - moments.mean


ORTHO_MODES = ("gram_schmidt", "normalize", "none")


def perturb_approx_update(basis: EigenBasis, moments: StreamMoments, x,
                          orthonormalize="gram_schmidt") -> EigenBasis:
    """First-order perturbation update of all eigenpairs for a new ``x``.

    ``moments`` holds the pre-update mean and count; the caller updates it
    afterwards. Raises :class:`DegeneracyError` when two current
    eigenvalues are closer than the deflation tolerance.

    ``orthonormalize`` selects the clean-up applied to the first-order
    eigenvectors: ``"gram_schmidt"`` (default), ``"normalize"`` (unit
    columns only) or ``"none"`` (the bare recursion). Without
    Gram-Schmidt the small, tightly spaced eigenvalues amplify errors and
    the bare recursion typically blows up within a few steps; an update
    that overflows raises :class:`DivergenceError`.
    """
    if orthonormalize not in ORTHO_MODES:
        raise ValueError(f"orthonormalize must be one of {ORTHO_MODES}")
    xt = _centered(basis, moments, x)
    w_old, w_new = moments.weights()
    lam = basis.values
    phi = basis.U.T @ xt
    gaps = lam[None, :] - lam[:, None]  # gaps[i, j] = lam_j - lam_i
    np.fill_diagonal(gaps, np.inf)
    tol = DEFLATION_TOL * max(np.abs(lam).max(), np.finfo(float).tiny)
    close = np.abs(gaps) < tol
    if close.any():
        i, j = np.argwhere(close)[0]
        raise DegeneracyError(
            f"eigenvalues {i} and {j} are within {tol:.2e}; the first-order "
            "update is undefined", indices=(int(i), int(j)))
    with np.errstate(over="ignore", invalid="ignore"):
        K = np.outer(phi, phi) / gaps
        U = basis.U + w_new * (basis.U @ K)
        values = w_old * lam + w_new * phi * phi
    if not (np.isfinite(U).all() and np.isfinite(values).all()):
        raise DivergenceError(f"first-order update overflowed at n = {basis.n}")
    values, U = sort_desc(values, U)
    if orthonormalize == "gram_schmidt":
        U = gram_schmidt(U)
    elif orthonormalize == "normalize":
        U = U / np.linalg.norm(U, axis=0)
    return EigenBasis(U, values, basis.n + 1, dict(basis.diagnostics))


def secular_update(basis: EigenBasis, moments: StreamMoments, x) -> EigenBasis:
    """Exact rank-one update of all eigenpairs for a new observation ``x``.

    ``moments`` holds the pre-update mean and count; the caller updates it
    afterwards.
    """
    xt = _centered(basis, moments, x)
    w_old, w_new = moments.weights()
    c = basis.U.T @ xt
    values, W = rank_one_eigh(w_old * basis.values, c, w_new)
    U = gram_schmidt(basis.U @ W)
    return EigenBasis(U, values, basis.n + 1, dict(basis.diagnostics))
