"""Experiment configuration: TOML loading, defaults and validation."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, replace

from ..errors import ConfigError
from ..stochastic import LearningSchedule

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ALGORITHMS = (
    "batch", "batch_n0", "sga_exact", "sga_nn", "snl_exact", "snl_nn",
    "gha", "ccipca", "ipca", "perturb_approx", "secular",
)
SCHEDULED = frozenset({"sga_exact", "sga_nn", "snl_exact", "snl_nn", "gha"})
FULL_RANK = frozenset({"perturb_approx", "secular"})
SINGLE_INIT = frozenset({"ipca", "ccipca"})
# full-basis methods store and rotate a d x d matrix on every update
FULL_RANK_MAX_D = 2000


def _file_width(path, has_header):
    from .io import ingest_csv

    try:
        first = next(iter(ingest_csv(path, has_header)))
    except StopIteration:
        raise ConfigError(f"{path}: no data rows") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return first.d


@dataclass(frozen=True)
class FpcaOptions:
    p: int = 28
    alpha: float = 1e-7
    metric: str = "grid"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an estimator, problem sizes and replication settings.

    ``data`` switches from the Brownian simulator to streaming rows of a CSV
    file. ``checkpoints`` lists observation counts at which the eigenspace
    error is also recorded.
    """

    algorithm: str
    n: int = 1000
    d: int = 100
    q: int = 5
    q_computed: int | None = None
    n0: int = 250
    schedule: LearningSchedule | None = None
    amnesic: float | None = None
    missing_fraction: float | None = None
    fpca: FpcaOptions | None = None
    replications: int = 100
    master_seed: int = 0
    init: str = "batch"
    data: str | None = None
    has_header: bool = False
    centered: bool = True
    reference: bool = True
    checkpoints: tuple = field(default=())

    @property
    def work_dim(self):
        """Dimension the estimator runs in (p under FPCA, else d)."""
        return self.fpca.p if self.fpca is not None else self.d

    def resolved(self) -> "ExperimentConfig":
        """Fill defaults (q_computed = 2q, tuned schedule) and validate."""
        cfg = self
        if cfg.data is not None:
            cfg = replace(cfg, d=_file_width(cfg.data, cfg.has_header))
        if cfg.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {cfg.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        dim = cfg.work_dim
        if cfg.algorithm in FULL_RANK:
            if cfg.d > FULL_RANK_MAX_D and cfg.fpca is None:
                raise ConfigError(
                    f"{cfg.algorithm} keeps all d eigenpairs (O(d^2) memory, O(d^2) to "
                    f"O(d^3) time per update); d = {cfg.d} exceeds the cap {FULL_RANK_MAX_D}")
            cfg = replace(cfg, q_computed=dim)
        elif cfg.q_computed is None:
            cfg = replace(cfg, q_computed=min(2 * cfg.q, dim))
        if cfg.algorithm in SCHEDULED and cfg.schedule is None:
            cfg = replace(cfg, schedule=LearningSchedule.default_for(dim))
        cfg.validate()
        return cfg

    def validate(self):
        dim = self.work_dim
        if self.n < 2 or self.d < 1 or self.q < 1:
            raise ConfigError("n must be >= 2 and d, q >= 1")
        if not self.q <= self.q_computed <= dim:
            raise ConfigError(
                f"need q <= q_computed <= {dim}, got q = {self.q}, q_computed = {self.q_computed}")
        if self.init not in ("batch", "single"):
            raise ConfigError("init must be 'batch' or 'single'")
        if self.init == "single" and self.algorithm not in SINGLE_INIT:
            raise ConfigError("single-observation initialization is available for ipca and ccipca only")
        if self.algorithm != "batch" and self.init == "batch":
            if not 2 <= self.n0 < self.n:
                raise ConfigError(f"need 2 <= n0 < n, got n0 = {self.n0}, n = {self.n}")
            if self.algorithm not in FULL_RANK and self.q_computed > min(self.n0, dim):
                raise ConfigError("q_computed exceeds the rank available from n0 warm-up observations")
        if (self.schedule is not None) != (self.algorithm in SCHEDULED):
            raise ConfigError(
                "a learning-rate schedule is required for sga/snl/gha and not accepted otherwise")
        if self.amnesic is not None and (self.algorithm != "ccipca" or self.amnesic < 0):
            raise ConfigError("amnesic factor applies to ccipca only and must be >= 0")
        if self.missing_fraction is not None and not 0.0 <= self.missing_fraction < 1.0:
            raise ConfigError("missing fraction must lie in [0, 1)")
        if self.replications < 1:
            raise ConfigError("replications must be positive")
        if self.fpca is not None:
            if self.fpca.p < 4 or self.fpca.p > self.d:
                raise ConfigError("FPCA basis size p must satisfy 4 <= p <= d")
            if self.fpca.metric not in ("grid", "l2"):
                raise ConfigError("FPCA metric must be 'grid' or 'l2'")
            if self.fpca.alpha < 0:
                raise ConfigError("FPCA smoothing parameter must be >= 0")
            if self.data is not None:
                raise ConfigError("FPCA runs on simulated curves only")
            if self.missing_fraction:
                raise ConfigError("FPCA with missing coordinates is not supported")
        if self.data is None and not self.centered:
            raise ConfigError("uncentered mode applies to file data only")
        bad = [c for c in self.checkpoints if not 1 <= c <= self.n]
        if bad:
            raise ConfigError(f"checkpoints outside [1, n]: {bad}")

    def to_dict(self):
        out = asdict(self)
        if self.schedule is not None:
            out["schedule"] = {"c": self.schedule.c, "alpha": self.schedule.alpha}
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """Build from a nested mapping with [experiment], [schedule], [fpca], [data]."""
        raw = dict(raw)
        exp = dict(raw.pop("experiment", {}))
        sched = raw.pop("schedule", None)
        fpca = raw.pop("fpca", None)
        data = raw.pop("data", None)
        if raw:
            raise ConfigError(f"unknown config sections: {sorted(raw)}")
        known = {f for f in cls.__dataclass_fields__} - {"schedule", "fpca"}
        unknown = set(exp) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        if "algorithm" not in exp:
            raise ConfigError("experiment.algorithm is required")
        if "checkpoints" in exp:
            exp["checkpoints"] = tuple(int(c) for c in exp["checkpoints"])
        try:
            if sched is not None:
                exp["schedule"] = LearningSchedule(**sched)
            if fpca is not None:
                exp["fpca"] = FpcaOptions(**fpca)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if data is not None:
            exp["data"] = data.get("path")
            exp["has_header"] = bool(data.get("has_header", False))
            exp["centered"] = bool(data.get("centered", True))
            exp["reference"] = bool(data.get("reference", True))
        return cls(**exp)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(raw)
