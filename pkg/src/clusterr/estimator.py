"""The sequential CluStErr procedure.

For ``K = 1, 2, ...`` the subjects are clustered into K groups and the null
hypothesis "K is the true number of clusters" is tested; the first K that
is not rejected is the estimate. The noise level is estimated once, before
the search starts, and reused for every K.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .data import CenteredMatrix, DataMatrix, center_rows
from .exceptions import ConfigError
from .kmeans import DEFAULT_MAX_ITER, FarthestPointSeeder, Partition, cluster_means, lloyd
from .noise import DEFAULT_KMAX, METHODS, NoiseEstimate, SegmentBoundaries, estimate_noise
from .null import NullDistribution
from .teststats import block_layout, blocked_statistic, fdr_statistic, individual_stats, max_statistic

log = logging.getLogger(__name__)

STATISTICS = ("max", "blocked", "fdr")
DEFAULT_KCAP = 50


@dataclass(frozen=True)
class EstimatorConfig:
    """Settings of a CluStErr run.

    ``None`` fields are resolved against the data by :meth:`resolve`:
    ``block_size`` defaults to ``p``, ``kcap`` to ``min(n, 50)`` and
    ``variance_method`` to ``"pc"`` when segments are given, else ``"lip"``.
    ``center=False`` skips the removal of row means before clustering, for
    data known to carry no subject-specific intercepts.
    """

    alpha: float = 0.05
    statistic: str = "max"
    block_size: int | None = None
    variance_method: str | None = None
    segments: SegmentBoundaries | None = None
    kmax: int = DEFAULT_KMAX
    kcap: int | None = None
    max_iter: int = DEFAULT_MAX_ITER
    center: bool = True

    def resolve(self, n: int, p: int) -> "EstimatorConfig":
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.statistic not in STATISTICS:
            raise ConfigError(f"unknown statistic {self.statistic!r}; choose from {STATISTICS}")
        method = self.variance_method or ("pc" if self.segments is not None else "lip")
        if method not in METHODS:
            raise ConfigError(f"unknown variance method {method!r}; choose from {METHODS}")
        if method == "pc" and self.segments is None:
            raise ConfigError("variance method 'pc' requires segment boundaries")
        segments = self.segments
        if segments is not None:
            segments = SegmentBoundaries.from_cutpoints(segments.cutpoints, p)
        block = p if self.block_size is None else int(self.block_size)
        if self.statistic == "blocked" and not 1 <= block <= n:
            raise ConfigError(f"block size must lie in 1..{n}, got {block}")
        kcap = min(n, DEFAULT_KCAP) if self.kcap is None else int(self.kcap)
        if not 1 <= kcap <= n:
            raise ConfigError(f"kcap must lie in 1..{n}, got {kcap}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if method == "rss" and not 1 <= self.kmax <= n:
            raise ConfigError(f"kmax must lie in 1..{n}, got {self.kmax}")
        return replace(self, variance_method=method, segments=segments, block_size=block, kcap=kcap)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "statistic": self.statistic,
            "block_size": self.block_size,
            "variance_method": self.variance_method,
            "segments": list(self.segments.cutpoints) if self.segments is not None else None,
            "kmax": self.kmax,
            "kcap": self.kcap,
            "max_iter": self.max_iter,
            "center": self.center,
        }


@dataclass(frozen=True)
class TestRecord:
    __test__ = False

    K: int
    statistic: float
    pvalue: float
    threshold: float
    rejected: bool
    cluster_sizes: tuple[int, ...]
    converged: bool
    n_iter: int


@dataclass(frozen=True)
class TestTrace:
    """Outcome of every test performed, in order of K.

    For the FDR statistic no p-value exists: ``pvalue`` then repeats the
    ratio statistic (reject when it exceeds 1) and ``pvalue_is_probability``
    is False.
    """

    __test__ = False

    records: tuple[TestRecord, ...]
    accepted: int | None
    pvalue_is_probability: bool = True


@dataclass(frozen=True, eq=False)
class CluStErrResult:
    k_hat: int | None
    partition: Partition | None
    noise: NoiseEstimate
    trace: TestTrace
    config: EstimatorConfig = field(default_factory=EstimatorConfig)

    @property
    def accepted(self) -> bool:
        return self.k_hat is not None


def _null_for(cfg: EstimatorConfig, n: int, p: int) -> NullDistribution:
    if cfg.statistic == "blocked":
        return NullDistribution.for_blocked(p, n, cfg.block_size)
    if cfg.statistic == "fdr":
        return NullDistribution.for_fdr(p, n)
    return NullDistribution.for_max(p, n)


def _prepare(data: DataMatrix, center: bool) -> CenteredMatrix:
    if center:
        return center_rows(data)
    return CenteredMatrix(data.values, np.zeros(data.n))


def run(data, cfg: EstimatorConfig | None = None, **overrides) -> CluStErrResult:
    """Estimate the number of clusters and the partition of ``data``.

    Keyword overrides replace fields of ``cfg``. When no K up to
    ``kcap`` is accepted the result has ``k_hat=None`` and no partition,
    but still carries the full trace.
    """
    if not isinstance(data, DataMatrix):
        data = DataMatrix(data)
    data.require_estimable()
    n, p = data.shape
    cfg = replace(cfg or EstimatorConfig(), **overrides).resolve(n, p)

    noise = estimate_noise(data, cfg.variance_method, cfg.segments, cfg.kmax, cfg.max_iter)
    log.debug("noise estimate %s", noise)
    x = _prepare(data, cfg.center)
    null = _null_for(cfg, n, p)
    threshold = null.quantile(cfg.alpha)
    probability = cfg.statistic != "fdr"

    seeder = FarthestPointSeeder(x)
    records = []
    for K in range(1, cfg.kcap + 1):
        part = lloyd(x, seeder.seeds_for(K), cfg.max_iter)
        stats = individual_stats(x, part, noise)
        if cfg.statistic == "max":
            h = max_statistic(stats)
        elif cfg.statistic == "blocked":
            h = blocked_statistic(stats, block_layout(part, cfg.block_size))
        else:
            h = fdr_statistic(stats, cfg.alpha, null)
        if probability:
            pval = float(null.pvalue(h))
            rejected = not pval > cfg.alpha
        else:
            pval = h
            rejected = h > 1.0
        records.append(TestRecord(K, h, pval, float(threshold), rejected,
                                  tuple(int(s) for s in part.sizes()), part.converged, part.n_iter))
        log.debug("K=%d statistic=%.6g pvalue=%.6g rejected=%s", K, h, pval, rejected)
        if not rejected:
            trace = TestTrace(tuple(records), K, probability)
            return CluStErrResult(K, part, noise, trace, cfg)
    trace = TestTrace(tuple(records), None, probability)
    return CluStErrResult(None, None, noise, trace, cfg)


def pvalue_curve(result: CluStErrResult) -> list[tuple[int, float]]:
    """``(K, p-value)`` pairs of the trace, ready for plotting."""
    return [(r.K, r.pvalue) for r in result.trace.records]


def recompute_statistic(data, assignment, sigma2: float, kappa: float, statistic: str = "max",
                        alpha: float = 0.05, block_size: int | None = None,
                        method: str = "lip", center: bool = True) -> float:
    """Recompute the aggregate statistic from a stored partition and noise estimate."""
    if not isinstance(data, DataMatrix):
        data = DataMatrix(data)
    x = _prepare(data, center)
    assignment = np.asarray(assignment, dtype=np.intp)
    K = int(assignment.max()) + 1
    centers = cluster_means(x, assignment, K)
    resid = x.values - centers[assignment]
    part = Partition(assignment, centers, float(np.mean(resid * resid, axis=1).sum()))
    noise = NoiseEstimate(sigma2, kappa, (kappa**2 + 1.0) * sigma2**2, method)
    stats = individual_stats(x, part, noise)
    n, p = data.shape
    if statistic == "max":
        return max_statistic(stats)
    if statistic == "blocked":
        return blocked_statistic(stats, block_layout(part, block_size or p))
    return fdr_statistic(stats, alpha, NullDistribution.for_fdr(p, n))
