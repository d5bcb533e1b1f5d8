"""Stochastic-approximation eigenvector estimators.

SGA and SNL perform a stochastic gradient step ``U + gamma * x x^T U`` and
then orthonormalize, SGA with Gram-Schmidt and SNL symmetrically with
``(U^T U)^{-1/2}``. Each also has a first-order ("neural network") form that
skips the orthonormalization. GHA is the first-order SGA form without the
factor 2 on the cross terms. CCIPCA averages stochastic approximations of
``lambda * u`` and needs no learning rate.

All update functions expect the observation already centered on the mean
*after* it has been absorbed (``x - mu_{n+1}``), except :func:`ccipca_update`
which centers internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import as_vector, gram_schmidt, inv_sqrt_psd
from .batch import EigenBasis
from .errors import StreamPCAError
from .moments import StreamMoments

GHA_REORTH_EVERY = 1000


@dataclass(frozen=True)
class LearningSchedule:
    """Step sizes ``gamma_n = c * n**(-alpha)`` with c > 0 and alpha in (0.5, 1]."""

    c: float
    alpha: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"learning-rate constant must be positive, got {self.c}")
        if not 0.5 < self.alpha <= 1.0:
            raise ValueError(
                f"alpha must lie in (0.5, 1] for the step sizes to be square "
                f"summable but not summable, got {self.alpha}")

    def __call__(self, n):
        return self.c * float(n) ** (-self.alpha)

    @classmethod
    def default_for(cls, d, alpha=1.0):
        """Tuned constant for dimension ``d`` on unit-scale Brownian data.

        c = 10, 1, 0.1 for d around 10, 100, 1000 when alpha = 1 and ten
        times smaller when alpha = 2/3.
        """
        order = int(round(np.log10(max(d, 1))))
        base = 2 if alpha == 1.0 else 1
        return cls(c=10.0 ** (base - order), alpha=alpha)


def _track_values(values, phi, gamma):
    return values + gamma * (phi * phi - values)


def _finish(basis, U, values, reorth_every):
    n_new = basis.n + 1
    if reorth_every and n_new % reorth_every == 0:
        U = gram_schmidt(U)
    return EigenBasis(U, values, n_new, dict(basis.diagnostics))


def sga_update_exact(basis: EigenBasis, x_centered, gamma) -> EigenBasis:
    """Stochastic gradient ascent step followed by Gram-Schmidt."""
    x = as_vector(x_centered, basis.d)
    phi = basis.U.T @ x
    U = gram_schmidt(basis.U + gamma * (x[:, None] * phi))
    return EigenBasis(U, _track_values(basis.values, phi, gamma), basis.n + 1,
                      dict(basis.diagnostics))


def snl_update_exact(basis: EigenBasis, x_centered, gamma) -> EigenBasis:
    """Stochastic gradient step with symmetric orthonormalization.

    Only the spanned subspace is identified, not the individual eigenvectors.
    """
    x = as_vector(x_centered, basis.d)
    phi = basis.U.T @ x
    Ut = basis.U + gamma * (x[:, None] * phi)
    try:
        U = Ut @ inv_sqrt_psd(Ut.T @ Ut)
    except np.linalg.LinAlgError as exc:
        raise StreamPCAError(f"SNL orthonormalization failed ({exc})") from exc
    return EigenBasis(U, _track_values(basis.values, phi, gamma), basis.n + 1,
                      dict(basis.diagnostics))


def _hebbian_step(basis, x, gamma, cross):
    """u_j += gamma phi_j (x - phi_j u_j - cross * sum_{i<j} phi_i u_i)."""
    U = basis.U
    phi = U.T @ x
    # column j of U @ M is phi_j^2 u_j + cross * sum_{i<j} phi_i phi_j u_i
    M = cross * np.triu(phi[:, None] * phi, 1)
    M[np.diag_indices_from(M)] = phi * phi
    step = U @ M
    np.subtract(x[:, None] * phi, step, out=step)
    step *= gamma
    step += U
    return step, _track_values(basis.values, phi, gamma)


def sga_update_nn(basis: EigenBasis, x_centered, gamma, reorth_every=None) -> EigenBasis:
    """First-order SGA; Gram-Schmidt only every ``reorth_every`` steps (default q)."""
    x = as_vector(x_centered, basis.d)
    U, values = _hebbian_step(basis, x, gamma, 2.0)
    return _finish(basis, U, values, basis.q if reorth_every is None else reorth_every)


def gha_update(basis: EigenBasis, x_centered, gamma, reorth_every=GHA_REORTH_EVERY) -> EigenBasis:
    """Generalized Hebbian algorithm step.

    Orthogonality is maintained by the rule itself; the occasional
    Gram-Schmidt pass only removes accumulated roundoff.
    """
    x = as_vector(x_centered, basis.d)
    U, values = _hebbian_step(basis, x, gamma, 1.0)
    return _finish(basis, U, values, reorth_every)


def snl_update_nn(basis: EigenBasis, x_centered, gamma, reorth_every=None) -> EigenBasis:
    """First-order SNL: u_j += gamma phi_j (x - sum_i phi_i u_i)."""
    x = as_vector(x_centered, basis.d)
    U = basis.U
    phi = U.T @ x
    U_new = U + gamma * ((x - U @ phi)[:, None] * phi)
    values = _track_values(basis.values, phi, gamma)
    return _finish(basis, U_new, values, basis.q if reorth_every is None else reorth_every)


@dataclass
class CcipcaState:
    """Unnormalized eigenvector estimates ``V`` (column norms = eigenvalues)."""

    V: np.ndarray
    n: int
    amnesic: float = 0.0

    @property
    def values(self):
        return np.linalg.norm(self.V, axis=0)

    @property
    def U(self):
        norms = self.values
        return self.V / np.where(norms > 0, norms, 1.0)

    def to_basis(self, sort=True) -> EigenBasis:
        values, U = self.values, self.U
        if sort:
            order = np.argsort(values)[::-1]
            values, U = values[order], U[:, order]
        return EigenBasis(U, values, self.n)

    @classmethod
    def from_basis(cls, basis: EigenBasis, amnesic=0.0):
        return cls(basis.U * basis.values, basis.n, amnesic)

    @classmethod
    def from_first_pair(cls, x1, x2, q, amnesic=0.0):
        """Start from two observations with unknown mean.

        The first column is ``x1 - mean(x1, x2)``; the others start at zero
        and are seeded from deflated inputs as they arrive.
        """
        x1 = np.asarray(x1, dtype=float)
        v = x1 - 0.5 * (x1 + np.asarray(x2, dtype=float))
        V = np.zeros((x1.shape[0], q))
        V[:, 0] = v
        return cls(V, 1, amnesic)


def ccipca_update(state: CcipcaState, x, mean_provider: StreamMoments) -> CcipcaState:
    """One CCIPCA step with deflation across columns.

    ``mean_provider`` must already include ``x`` (its mean is mu_{n+1}).
    Column j is updated with the input deflated by the previous estimates
    u_1..u_{j-1}. Columns with zero norm are re-seeded from the deflated
    input.
    """
    x = as_vector(x, state.V.shape[0])
    xc = x - mean_provider.mean
    n, ell = state.n, state.amnesic
    w_old = max((n - ell) / (n + 1.0), 0.0)
    w_new = (1.0 + ell) / (n + 1.0)

    V = state.V
    norms = np.sqrt(np.einsum("ij,ij->j", V, V))
    live = norms > 0
    U = V / np.where(live, norms, 1.0)
    phi = U.T @ xc
    # deflated inputs: column j is xc - sum_{i<j} phi_i u_i
    q = phi.size
    S = np.triu(np.repeat(phi[:, None], q, axis=1), 1)
    xs = U @ S
    np.subtract(xc[:, None], xs, out=xs)
    proj = np.einsum("ij,ij->j", xs, U)
    V_new = w_old * V
    V_new += xs * (w_new * proj)
    if not live.all():
        V_new[:, ~live] = xs[:, ~live]
    return CcipcaState(V_new, n + 1, ell)
