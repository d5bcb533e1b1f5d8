"""Monte Carlo experiment driver.

Every replication draws its data from a generator seeded by
``(master_seed, replication)``, so results do not depend on how
replications are spread over worker processes.
"""

from __future__ import annotations

import resource
import time
import tracemalloc
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from threadpoolctl import threadpool_limits

from .._linalg import gram_schmidt
from ..batch import EigenBasis, batch_pca
from ..errors import ConfigError, DegeneracyError, DivergenceError
from ..evaluation import (brownian_eigenbasis, brownian_matrix, compression_loss,
                          eigenspace_error, inject_missing, replication_rng)
from ..fpca import build_design, grid_eigenvectors
from ..imputation import MaskedVector, eblup_impute, impute_block
from ..incremental import ipca_update, zero_basis
from ..moments import StreamMoments
from ..perturbation import perturb_approx_update, secular_update
from ..stochastic import (CcipcaState, ccipca_update, gha_update, sga_update_exact,
                          sga_update_nn, snl_update_exact, snl_update_nn)
from .config import FULL_RANK, ExperimentConfig
from .io import ingest_csv

_PRE_MEAN = {"ipca": ipca_update, "perturb_approx": perturb_approx_update,
             "secular": secular_update}
_POST_MEAN = {"sga_exact": sga_update_exact, "sga_nn": sga_update_nn,
              "snl_exact": snl_update_exact, "snl_nn": snl_update_nn, "gha": gha_update}


@dataclass
class ResultRecord:
    algorithm: str
    n: int
    d: int
    q: int
    replication: int
    L: float
    wall_ms_per_iter: float
    peak_mem_bytes: int | None = None
    compression_loss: float | None = None
    trajectory: tuple = ()


class OnlineEstimator:
    """One streaming estimator together with the running mean it relies on.

    Estimators that center on the pre-update mean (ipca, perturbation
    methods) update the basis before the mean; the stochastic ones absorb
    the observation into the mean first.
    """

    def __init__(self, algorithm, rank, schedule=None, amnesic=None, centered=True,
                 perturb_mode="none"):
        if algorithm not in _PRE_MEAN and algorithm not in _POST_MEAN and algorithm != "ccipca":
            raise ConfigError(f"{algorithm!r} is not a streaming estimator")
        self.algorithm = algorithm
        self.rank = rank
        self.schedule = schedule
        self.amnesic = amnesic or 0.0
        self.centered = centered
        self.moments = None
        self._basis = None
        self._ccipca = None
        self._pending = None
        self.perturb_mode = perturb_mode
        # observation count at which the first-order recursion broke down
        # (overflow or colliding eigenvalues); the estimate is then frozen
        self.diverged_at = None

    def start_batch(self, X0):
        """Initialize from the batch PCA of the warm-up rows ``X0``."""
        X0 = np.asarray(X0, dtype=float)
        self.moments = StreamMoments.from_batch(X0, centered=self.centered)
        d = X0.shape[1]
        if self.algorithm in FULL_RANK:
            Xc = X0 - self.moments.mean
            w, V = np.linalg.eigh(Xc.T @ Xc / X0.shape[0])
            basis = EigenBasis(V[:, ::-1].copy(), w[::-1].copy(), X0.shape[0])
        else:
            basis, _ = batch_pca(X0, min(self.rank, X0.shape[0], d), centered=self.centered)
        if self.algorithm == "ccipca":
            self._ccipca = CcipcaState.from_basis(basis, self.amnesic)
        else:
            self._basis = basis
        return self

    def start_single(self, x1):
        """Initialize from one observation (ipca and ccipca only)."""
        x1 = np.asarray(x1, dtype=float)
        d = x1.shape[0]
        self.moments = StreamMoments(d, centered=self.centered)
        if self.algorithm == "ipca":
            self._basis = zero_basis(d, 1, n=0)
            self._basis = ipca_update(self._basis, self.moments, x1, rank=self.rank)
            self.moments.update(x1)
        elif self.algorithm == "ccipca":
            self.moments.update(x1)
            self._pending = x1
        else:
            raise ConfigError("single-observation start is available for ipca and ccipca only")
        return self

    @property
    def basis(self) -> EigenBasis:
        if self._ccipca is not None:
            return self._ccipca.to_basis(sort=False)
        return self._basis

    def impute(self, x: MaskedVector):
        basis = self.basis
        if basis is None or x.observed.all():
            return np.where(x.observed, x.values, self.moments.mean)
        return eblup_impute(x, self.moments.mean, basis)

    def update(self, x):
        if isinstance(x, MaskedVector):
            x = self.impute(x)
        alg = self.algorithm
        if self.diverged_at is not None:
            return self
        if alg in _PRE_MEAN:
            if alg == "ipca":
                self._basis = ipca_update(self._basis, self.moments, x, rank=self.rank)
            elif alg == "perturb_approx":
                try:
                    self._basis = perturb_approx_update(self._basis, self.moments, x,
                                                        orthonormalize=self.perturb_mode)
                except (DivergenceError, DegeneracyError):
                    self.diverged_at = self.moments.n
                    return self
            else:
                self._basis = _PRE_MEAN[alg](self._basis, self.moments, x)
            self.moments.update(x)
        elif alg in _POST_MEAN:
            gamma = self.schedule(self._basis.n)
            self.moments.update(x)
            self._basis = _POST_MEAN[alg](self._basis, x - self.moments.mean, gamma)
        else:
            self.moments.update(x)
            if self._pending is not None:
                q = self.rank
                self._ccipca = CcipcaState.from_first_pair(self._pending, x, q, self.amnesic)
                self._pending = None
            self._ccipca = ccipca_update(self._ccipca, x, self.moments)
        return self

    def top(self, q):
        """Orthonormal d x q estimate of the leading eigenspace."""
        return gram_schmidt(self.basis.U[:, :q])


@lru_cache(maxsize=8)
def _design(d, p, alpha, metric):
    return build_design(np.arange(1, d + 1) / d, p, alpha, metric)


def _peak_bytes():
    return int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss) * 1024


def run_replication(config: ExperimentConfig, replication: int, measure_memory=False) -> ResultRecord:
    """Run one replication of a resolved configuration."""
    with threadpool_limits(limits=1):
        if config.data is not None:
            return _run_file(config, replication)
        return _run_simulated(config, replication, measure_memory)


def _run_simulated(cfg, rep, measure_memory):
    X = brownian_matrix(cfg.n, cfg.d, replication_rng(cfg.master_seed, rep, 0))
    U_true = brownian_eigenbasis(cfg.d, cfg.q).U
    design = _design(cfg.d, cfg.fpca.p, cfg.fpca.alpha, cfg.fpca.metric) if cfg.fpca is not None else None

    def to_ambient(U_work):
        return grid_eigenvectors(design, U_work) if design is not None else U_work

    def to_work(x):
        return design.projector @ x if design is not None else x

    stream = list(X)
    if cfg.missing_fraction:
        mrng = replication_rng(cfg.master_seed, rep, 1)
        stream = [inject_missing(x, cfg.missing_fraction, mrng) for x in X]

    def complete(block):
        """Rows with NaN at unobserved coordinates, completed by block imputation."""
        raw = [np.where(s.observed, s.values, np.nan) if isinstance(s, MaskedVector) else s
               for s in block]
        return impute_block(np.array(raw), cfg.q_computed)

    if cfg.algorithm in ("batch", "batch_n0"):
        rows = stream if cfg.algorithm == "batch" else stream[:cfg.n0]
        t0 = time.perf_counter()
        W = complete(rows)
        if design is not None:
            W = W @ design.projector.T
        basis, _ = batch_pca(W, cfg.q)
        elapsed = time.perf_counter() - t0
        L = eigenspace_error(to_ambient(basis.U), U_true)
        return ResultRecord(cfg.algorithm, cfg.n, cfg.d, cfg.q, rep, L,
                            1e3 * elapsed / len(rows), _peak_bytes())

    est = OnlineEstimator(cfg.algorithm, cfg.q_computed, cfg.schedule, cfg.amnesic)
    if cfg.init == "single":
        first = stream[0]
        if isinstance(first, MaskedVector):
            first = np.where(first.observed, first.values, 0.0)
        est.start_single(to_work(first))
        start = 1
    else:
        W0 = complete(stream[:cfg.n0])
        est.start_batch(W0 @ design.projector.T if design is not None else W0)
        start = cfg.n0

    checkpoints = set(cfg.checkpoints)
    trajectory = []
    if measure_memory:
        tracemalloc.start()
    t0 = time.perf_counter()
    for i in range(start, cfg.n):
        x = stream[i]
        est.update(x if isinstance(x, MaskedVector) else to_work(x))
        if i + 1 in checkpoints:
            pause = time.perf_counter()
            trajectory.append((i + 1, eigenspace_error(to_ambient(est.top(cfg.q)), U_true)))
            t0 += time.perf_counter() - pause
    elapsed = time.perf_counter() - t0
    if measure_memory:
        peak = tracemalloc.get_traced_memory()[1]
        tracemalloc.stop()
    else:
        peak = _peak_bytes()
    L = eigenspace_error(to_ambient(est.top(cfg.q)), U_true)
    steps = max(cfg.n - start, 1)
    return ResultRecord(cfg.algorithm, cfg.n, cfg.d, cfg.q, rep, L,
                        1e3 * elapsed / steps, peak, trajectory=tuple(trajectory))


def _run_file(cfg, rep):
    """Stream rows of the data file.

    The estimator only ever holds one row plus its own state. Afterwards
    the compression loss is accumulated in a second streaming pass, and,
    when ``cfg.reference`` is set, the file is loaded once more to score the
    estimate against its batch PCA.
    """
    rows = _masked_rows(cfg, rep)
    est = OnlineEstimator(cfg.algorithm, cfg.q_computed, cfg.schedule, cfg.amnesic,
                          centered=cfg.centered)
    t0 = time.perf_counter()
    if cfg.algorithm in ("batch", "batch_n0"):
        limit = cfg.n if cfg.algorithm == "batch" else cfg.n0
        block = [np.where(r.observed, r.values, np.nan) for _, r in zip(range(limit), rows)]
        basis, mean = batch_pca(impute_block(np.array(block), cfg.q_computed), cfg.q,
                                centered=cfg.centered)
        count, U_est = len(block), basis.U
    else:
        if cfg.init == "single":
            first = next(rows)
            est.start_single(np.where(first.observed, first.values, 0.0))
            count = 1
        else:
            block = [np.where(r.observed, r.values, np.nan) for _, r in zip(range(cfg.n0), rows)]
            est.start_batch(impute_block(np.array(block), cfg.q_computed))
            count = len(block)
            del block
        for r in rows:
            if count >= cfg.n:
                break
            est.update(r)
            count += 1
        U_est, mean = est.top(cfg.q), est.moments.mean
    elapsed = time.perf_counter() - t0
    peak = _peak_bytes()

    loss = _streamed_loss(cfg, rep, count, U_est, mean)
    L = None
    if cfg.reference:
        full = impute_block(np.array([np.where(r.observed, r.values, np.nan)
                                      for _, r in zip(range(count), _masked_rows(cfg, rep))]),
                            cfg.q_computed)
        ref, _ = batch_pca(full, cfg.q, centered=cfg.centered)
        L = eigenspace_error(U_est, ref.U)
    return ResultRecord(cfg.algorithm, count, U_est.shape[0], cfg.q, rep, L,
                        1e3 * elapsed / max(count, 1), peak, compression_loss=loss)


def _masked_rows(cfg, rep):
    rows = ingest_csv(cfg.data, cfg.has_header)
    if cfg.missing_fraction:
        mrng = replication_rng(cfg.master_seed, rep, 1)
        rows = (_drop(r, cfg.missing_fraction, mrng) for r in rows)
    return rows


def _streamed_loss(cfg, rep, count, U, mean, chunk=16):
    """Compression loss over the first ``count`` rows, ``chunk`` rows at a time.

    Missing entries are scored after filling them with the estimated mean.
    """
    total, used = 0.0, 0
    rows = _masked_rows(cfg, rep)
    remaining = count
    while remaining > 0:
        block = [np.where(r.observed, r.values, mean)
                 for _, r in zip(range(min(chunk, remaining)), rows)]
        if not block:
            break
        remaining -= len(block)
        X = np.array(block)
        part, skipped = compression_loss(X, U, centered=cfg.centered,
                                         mean=mean if cfg.centered else None,
                                         return_skipped=True)
        total += part * (len(block) - skipped)
        used += len(block) - skipped
    return total / used if used else 0.0


def _drop(row, fraction, rng):
    hidden = inject_missing(row.values, fraction, rng)
    return MaskedVector(row.values, hidden.observed & row.observed)


def _run_one(args):
    return run_replication(*args)


def run_experiment(config: ExperimentConfig, threads=None, measure_memory=False):
    """Run all replications; records come back ordered by replication index."""
    cfg = config.resolved()
    jobs = [(cfg, rep, measure_memory) for rep in range(cfg.replications)]
    workers = min(threads or 1, len(jobs))
    if workers <= 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


@dataclass
class GridSearchResult:
    alpha: float
    best_c: float
    mean_L: float
    stderr: float
    scores: dict  # c -> (mean L, standard error)


def grid_search_schedule(base_config: ExperimentConfig, c_grid=(0.01, 0.1, 1.0, 10.0, 100.0),
                         alphas=(1.0, 2.0 / 3.0), threads=None):
    """Best learning-rate constant per exponent, by mean eigenspace error.

    Every candidate is evaluated on the same replication seeds. Ties go to
    the smaller constant.
    """
    from ..stochastic import LearningSchedule
    from .config import SCHEDULED

    if base_config.algorithm not in SCHEDULED:
        raise ConfigError(f"{base_config.algorithm} has no learning-rate schedule")
    out = {}
    for alpha in alphas:
        scores = {}
        for c in sorted(c_grid):
            cfg = replace(base_config, schedule=LearningSchedule(c, alpha))
            L = np.array([r.L for r in run_experiment(cfg, threads)])
            se = float(L.std(ddof=1) / np.sqrt(L.size)) if L.size > 1 else 0.0
            scores[c] = (float(L.mean()), se)
        # a constant that made the iteration blow up scores NaN; rank it last
        best = min(scores, key=lambda c: (np.nan_to_num(scores[c][0], nan=np.inf), c))
        out[alpha] = GridSearchResult(alpha, best, scores[best][0], scores[best][1], scores)
    return out


def time_updates(algorithm, d, q, steps=20, seed=0, schedule=None):
    """Mean milliseconds per update on Brownian data, excluding warm-up."""
    rng = np.random.default_rng(seed)
    X = brownian_matrix(max(2 * q, 50) + steps, d, rng)
    n0 = X.shape[0] - steps
    cfg = ExperimentConfig(algorithm=algorithm, n=X.shape[0], d=d, q=q, q_computed=q,
                           n0=n0, schedule=schedule).resolved()
    # the stabilized first-order update never freezes, so every step does full work
    est = OnlineEstimator(algorithm, cfg.q_computed, cfg.schedule, perturb_mode="gram_schmidt")
    if algorithm in FULL_RANK:
        # random full-rank start with distinct eigenvalues
        V, _ = np.linalg.qr(rng.normal(size=(d, d)))
        est.moments = StreamMoments.from_batch(X[:n0])
        est._basis = EigenBasis(V, np.sort(rng.uniform(1, 2, d))[::-1], n0)
    else:
        est.start_batch(X[:n0])
    with threadpool_limits(limits=1):
        t0 = time.perf_counter()
        for x in X[n0:]:
            est.update(x)
        return 1e3 * (time.perf_counter() - t0) / steps
