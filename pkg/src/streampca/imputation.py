"""Conditional-mean (EBLUP) imputation under the current reduced-rank model.

An incomplete observation is treated as a draw from
``N(mean, U diag(values) U^T)``; missing coordinates are replaced by their
conditional expectation given the observed ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batch import EigenBasis, batch_pca
from .errors import DimensionError

PINV_RCOND = 1e-10


@dataclass
class MaskedVector:
    """Observation with per-coordinate observed flags."""

    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.values.shape != self.observed.shape or self.values.ndim != 1:
            raise DimensionError("values and observed must be vectors of equal length")

    @property
    def d(self):
        return self.values.shape[0]

    @property
    def n_missing(self):
        return int(self.d - self.observed.sum())

    @classmethod
    def complete(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape[0], dtype=bool))

    @classmethod
    def from_nan(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(values, ~np.isnan(values))


def eblup_impute(x: MaskedVector, mean, basis: EigenBasis) -> np.ndarray:
    """Fill the missing entries of ``x``; observed entries pass through.

    Missing block = mean_m + (U_m D^1/2) pinv(U_o D^1/2) (x_o - mean_o),
    with the pseudoinverse truncating singular values below 1e-10 of the
    largest.
    """
    mean = np.asarray(mean, dtype=float)
    if mean.shape[0] != x.d or basis.d != x.d:
        raise DimensionError(f"vector has length {x.d}, model has {basis.d}")
    obs = x.observed
    if not obs.any():
        raise ValueError("cannot impute a vector with no observed coordinates")
    out = x.values.copy()
    if obs.all():
        return out
    miss = ~obs
    scale = np.sqrt(np.clip(basis.values, 0.0, None))
    Lo = basis.U[obs] * scale
    Lm = basis.U[miss] * scale
    coef = np.linalg.pinv(Lo, rcond=PINV_RCOND) @ (x.values[obs] - mean[obs])
    out[miss] = mean[miss] + Lm @ coef
    return out


def impute_block(X, rank, iterations=10):
    """Complete a block of rows (NaN = missing) by alternating low-rank
    fits and EBLUP imputation.

    Starts from column-mean filling; each pass fits a rank-``rank`` batch
    PCA to the current completion and re-imputes every row from it.
    Used to warm-start streaming estimators on incomplete data.
    """
    X = np.asarray(X, dtype=float)
    observed = ~np.isnan(X)
    if (~observed).all(axis=1).any():
        raise ValueError("every row needs at least one observed coordinate")
    counts = observed.sum(axis=0)
    col = np.where(observed, X, 0.0).sum(axis=0) / np.maximum(counts, 1)
    filled = np.where(observed, X, col)
    if observed.all():
        return filled
    rows = [MaskedVector(r, o) for r, o in zip(filled, observed)]
    rank = min(rank, *X.shape)
    for _ in range(iterations):
        basis, mean = batch_pca(filled, rank)
        filled = np.array([eblup_impute(r, mean, basis) for r in rows])
    return filled
