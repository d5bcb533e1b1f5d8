"""Recursive sample mean, covariance and total variance.

Two weighting regimes are supported. With equal weights every observation
counts the same and the recursions reproduce the batch formulas (1/n
normalization). With a forgetting factor ``f`` in (0, 1) the newest
observation receives weight ``f`` and history is discounted by ``1 - f``.

Both regimes share one code path: equal weighting is the forgetting
recursion evaluated with ``f = 1/(n+1)``.

With ``centered=False`` the mean is pinned at zero and ``cov`` holds the
running second-moment matrix instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import as_vector
from .errors import DimensionError, StreamPCAError


@dataclass
class StreamMoments:
    """Running count, mean, optional covariance and total variance.

    ``forgetting`` is ``None`` for equal weighting, otherwise the factor f.
    """

    d: int
    track_cov: bool = False
    forgetting: float | None = None
    centered: bool = True
    n: int = 0
    mean: np.ndarray = field(default=None)
    cov: np.ndarray | None = field(default=None)
    total_var: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.forgetting is not None and not 0.0 < self.forgetting < 1.0:
            raise ValueError(f"forgetting factor must lie in (0, 1), got {self.forgetting}")
        if self.mean is None:
            self.mean = np.zeros(self.d)
        if self.track_cov and self.cov is None:
            self.cov = np.zeros((self.d, self.d))

    def weights(self):
        """Return ``(w_old, w_new)`` for the next covariance step.

        The next covariance is ``w_old * cov + w_new * (x - mean)(x - mean)^T``
        where ``mean`` is the current (pre-update) mean.
        """
        f = self.step_factor()
        if not self.centered:
            return 1.0 - f, f
        return 1.0 - f, f * (1.0 - f)

    def step_factor(self):
        """Weight given to the next observation in the mean update."""
        if self.forgetting is None:
            return 1.0 / (self.n + 1)
        return self.forgetting

    def copy(self):
        return StreamMoments(
            d=self.d, track_cov=self.track_cov, forgetting=self.forgetting,
            centered=self.centered, n=self.n, mean=self.mean.copy(),
            cov=None if self.cov is None else self.cov.copy(),
            total_var=self.total_var)

    def update(self, x):
        """Absorb one observation: covariance when tracked, else mean only."""
        if self.track_cov:
            return update_covariance(self, x)
        return update_mean(self, x)

    @classmethod
    def from_batch(cls, X, track_cov=False, forgetting=None, centered=True):
        """Equal-weight moments of the rows of ``X``."""
        X = np.asarray(X, dtype=float)
        n, d = X.shape
        mean = X.mean(axis=0) if centered else np.zeros(d)
        Xc = X - mean
        cov = Xc.T @ Xc / n if track_cov else None
        return cls(d=d, track_cov=track_cov, forgetting=forgetting, centered=centered,
                   n=n, mean=mean, cov=cov, total_var=float(np.sum(Xc * Xc) / n))


def update_mean(state: StreamMoments, x) -> StreamMoments:
    """Fold ``x`` into the running mean (and total variance), in place.

    The first observation sets the mean to ``x``. Returns ``state``.
    """
    x = as_vector(x, state.d)
    if not state.centered:
        f = state.step_factor()
        state.total_var = (1.0 - f) * state.total_var + f * float(x @ x)
        state.n += 1
        return state
    if state.n == 0:
        state.mean = x.copy()
        state.total_var = 0.0
        state.n = 1
        return state
    f = state.step_factor()
    diff = x - state.mean
    state.total_var = (1.0 - f) * state.total_var + f * (1.0 - f) * float(diff @ diff)
    state.mean = (1.0 - f) * state.mean + f * x
    state.n += 1
    return state


def update_covariance(state: StreamMoments, x) -> StreamMoments:
    """Rank-one covariance update followed by the mean update, in place.

    Uses the pre-update mean in the outer product; the covariance of a
    single observation is the zero matrix.
    """
    if not state.track_cov:
        raise StreamPCAError("update_covariance called on moments with track_cov=False")
    x = as_vector(x, state.d)
    if state.n >= 1 or not state.centered:
        w_old, w_new = state.weights()
        diff = x - state.mean
        cov = w_old * state.cov + w_new * np.outer(diff, diff)
        state.cov = 0.5 * (cov + cov.T)
    return update_mean(state, x)


def batch_covariance(X):
    """Covariance with 1/n normalization; the direct-summation reference."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X must be two-dimensional")
    Xc = X - X.mean(axis=0)
    return Xc.T @ Xc / X.shape[0]
