"""Synthetic piecewise-constant cluster designs and replication studies.

The reference design has ten clusters. With the feature axis cut into five
equal blocks, cluster ``k`` (k = 1..5) is ``+1`` on block ``k`` and zero
elsewhere, and cluster ``k + 5`` is its mirror image at ``-1``. Every signal
row has empirical variance 0.16, so the noise variance for a given
noise-to-signal ratio is ``0.16 * nsr``.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .data import DataMatrix
from .estimator import EstimatorConfig, run
from .exceptions import CluStErrError, ConfigError
from .noise import SegmentBoundaries

log = logging.getLogger(__name__)

N_CLUSTERS = 10
N_SEGMENTS = 5
SIGNAL_VARIANCE = 0.16

# (n, p) ladder at nsr = 1.5; the alternative variant ends at (2500, 60), (3000, 70)
SAMPLE_SIZE_LADDER = ((1000, 30), (1500, 40), (2000, 50), (2500, 50), (3000, 60))
SAMPLE_SIZE_LADDER_ALT = ((1000, 30), (1500, 40), (2000, 50), (2500, 60), (3000, 70))


def reference_signals(p: int) -> np.ndarray:
    """The ten reference signal rows, as a ``10 x p`` matrix."""
    if p < N_SEGMENTS or p % N_SEGMENTS:
        raise ConfigError(f"p must be a positive multiple of {N_SEGMENTS}, got {p}")
    width = p // N_SEGMENTS
    m = np.zeros((N_CLUSTERS, p))
    for k in range(N_SEGMENTS):
        m[k, k * width:(k + 1) * width] = 1.0
        m[k + N_SEGMENTS, k * width:(k + 1) * width] = -1.0
    return m


def balanced_sizes(n: int, k0: int = N_CLUSTERS) -> tuple[int, ...]:
    base, extra = divmod(n, k0)
    if base < 1:
        raise ConfigError(f"n={n} is too small for {k0} clusters")
    return tuple(base + (1 if k < extra else 0) for k in range(k0))


def unbalanced_sizes(n: int, k0: int = N_CLUSTERS) -> tuple[int, ...]:
    """Sizes ``1 + c k`` for ``k = 1..k0``; c = 18 gives the n = 1000 design."""
    total_k = k0 * (k0 + 1) // 2
    c, rest = divmod(n - k0, total_k)
    if rest or c < 1:
        raise ConfigError(f"n - {k0} must be a positive multiple of {total_k} for unbalanced sizes, got n={n}")
    return tuple(1 + c * k for k in range(1, k0 + 1))


@dataclass(frozen=True, eq=False)
class DesignSpec:
    """A simulation design: signal rows, cluster sizes, noise level and seed.

    ``signals`` defaults to :func:`reference_signals` and ``segments`` to the
    five equal blocks the reference signals are constant on. ``noise_var``
    fixes the error variance directly, overriding ``nsr``; this is how flat
    (signal-free) designs are specified.
    """

    n: int
    p: int
    cluster_sizes: tuple[int, ...]
    nsr: float | None
    seed: int = 0
    signals: np.ndarray | None = None
    segments: SegmentBoundaries | None = None
    noise_var: float | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.cluster_sizes)
        object.__setattr__(self, "cluster_sizes", sizes)
        if any(s < 1 for s in sizes) or sum(sizes) != self.n:
            raise ConfigError(f"cluster sizes {sizes} must be positive and sum to n={self.n}")
        if self.noise_var is not None:
            if not self.noise_var >= 0:
                raise ConfigError(f"noise_var must be non-negative, got {self.noise_var}")
        elif self.nsr is None or not self.nsr > 0:
            raise ConfigError(f"nsr must be positive, got {self.nsr}")
        if self.signals is None:
            object.__setattr__(self, "signals", reference_signals(self.p))
            if self.segments is None:
                object.__setattr__(self, "segments", SegmentBoundaries.equal(self.p, N_SEGMENTS))
        sig = np.array(self.signals, dtype=np.float64)
        if sig.shape != (len(sizes), self.p):
            raise ConfigError(f"signals must have shape {(len(sizes), self.p)}, got {sig.shape}")
        sig.setflags(write=False)
        object.__setattr__(self, "signals", sig)

    @classmethod
    def balanced(cls, n: int, p: int, nsr: float, seed: int = 0) -> "DesignSpec":
        return cls(n, p, balanced_sizes(n), nsr, seed)

    @classmethod
    def unbalanced(cls, n: int, p: int, nsr: float, seed: int = 0) -> "DesignSpec":
        return cls(n, p, unbalanced_sizes(n), nsr, seed)

    @classmethod
    def pure_noise(cls, n: int, p: int, sigma2: float = 1.0, seed: int = 0, T: int = 1) -> "DesignSpec":
        """A single flat cluster of N(0, sigma2) noise with ``T`` equal pc segments."""
        return cls(n, p, (n,), None, seed, np.zeros((1, p)), SegmentBoundaries.equal(p, T), sigma2)

    @property
    def k0(self) -> int:
        return len(self.cluster_sizes)

    @property
    def signal_variance(self) -> float:
        return float(np.mean(np.var(self.signals, axis=1)))

    @property
    def sigma2(self) -> float:
        if self.noise_var is not None:
            return float(self.noise_var)
        return self.nsr * self.signal_variance

    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.k0), self.cluster_sizes)

    def with_seed(self, seed: int) -> "DesignSpec":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "k0": self.k0,
            "cluster_sizes": list(self.cluster_sizes),
            "nsr": self.nsr,
            "sigma2": self.sigma2,
            "seed": self.seed,
            "segments": list(self.segments.cutpoints) if self.segments is not None else None,
        }


def generator(seed: int) -> np.random.Generator:
    """PCG64 stream for a seed; reproducible across platforms."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def generate(spec: DesignSpec, sigma2: float | None = None) -> DataMatrix:
    """Draw ``Y = signal + N(0, sigma2)`` noise, rows grouped by cluster in order.

    ``sigma2`` overrides the design's noise variance (``0`` gives the bare
    signal).
    """
    s2 = spec.sigma2 if sigma2 is None else float(sigma2)
    noise = generator(spec.seed).standard_normal((spec.n, spec.p))
    return DataMatrix(spec.signals[spec.labels()] + np.sqrt(s2) * noise)


@dataclass(frozen=True)
class ReplicationRecord:
    index: int
    seed: int
    k_hat: int | None
    error: str | None = None


@dataclass(frozen=True, eq=False)
class ReplicationReport:
    """Outcome of ``B`` replications.

    Replications with no accepted K up to the cap count as overestimates.
    Replications that raised are kept in ``records`` but excluded from the
    frequencies.
    """

    spec: DesignSpec
    config: EstimatorConfig
    records: tuple[ReplicationRecord, ...]

    @property
    def B(self) -> int:
        return len(self.records)

    @property
    def histogram(self) -> dict[int, int]:
        counts = Counter(r.k_hat for r in self.records if r.k_hat is not None)
        return dict(sorted(counts.items()))

    @property
    def n_no_acceptance(self) -> int:
        return sum(1 for r in self.records if r.k_hat is None and r.error is None)

    @property
    def n_errors(self) -> int:
        return sum(1 for r in self.records if r.error is not None)

    def frequencies(self) -> dict[str, Fraction]:
        k0 = self.spec.k0
        done = [r for r in self.records if r.error is None]
        if not done:
            raise CluStErrError("every replication failed; no frequencies available")
        under = sum(1 for r in done if r.k_hat is not None and r.k_hat < k0)
        exact = sum(1 for r in done if r.k_hat == k0)
        over = len(done) - under - exact
        m = len(done)
        return {"under": Fraction(under, m), "exact": Fraction(exact, m), "over": Fraction(over, m)}

    def frequency(self, k: int) -> float:
        done = sum(1 for r in self.records if r.error is None)
        return self.histogram.get(k, 0) / done

    def to_dict(self) -> dict:
        return {
            "design": self.spec.to_dict(),
            "config": self.config.to_dict(),
            "B": self.B,
            "histogram": {str(k): v for k, v in self.histogram.items()},
            "no_acceptance": self.n_no_acceptance,
            "errors": self.n_errors,
            "frequencies": {k: float(v) for k, v in self.frequencies().items()},
            "records": [
                {"index": r.index, "seed": r.seed, "k_hat": r.k_hat, "error": r.error}
                for r in self.records
            ],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def write_histogram_csv(self, path) -> None:
        """One row per estimated K with its count and relative frequency."""
        done = self.B - self.n_errors
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["K", "count", "frequency"])
            for k, c in self.histogram.items():
                w.writerow([k, c, f"{c / done:.6f}"])
            if self.n_no_acceptance:
                w.writerow(["none", self.n_no_acceptance, f"{self.n_no_acceptance / done:.6f}"])

    def write_frequency_csv(self, path) -> None:
        """Under/exact/over frequencies as one table row, labelled by nsr."""
        f = self.frequencies()
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["nsr", "n", "p", "P(K<K0)", "P(K=K0)", "P(K>K0)"])
            w.writerow([self.spec.nsr, self.spec.n, self.spec.p,
                        f"{float(f['under']):.3f}", f"{float(f['exact']):.3f}", f"{float(f['over']):.3f}"])


def default_config(spec: DesignSpec, cfg: EstimatorConfig | None = None) -> EstimatorConfig:
    """Fill in the design's true segments for the pc variance estimator.

    Without an explicit ``cfg`` the rows are not centered: generated data
    carry no random intercepts, and the reference frequencies for these
    designs are only reproduced on the raw rows.
    """
    if cfg is None:
        cfg = EstimatorConfig(variance_method="pc" if spec.segments is not None else "lip", center=False)
    if cfg.segments is None and spec.segments is not None and cfg.variance_method in (None, "pc"):
        cfg = replace(cfg, segments=spec.segments)
    return cfg


def _one(task) -> ReplicationRecord:
    index, spec, cfg = task
    try:
        result = run(generate(spec), cfg)
    except CluStErrError as exc:
        return ReplicationRecord(index, spec.seed, None, f"{type(exc).__name__}: {exc}")
    return ReplicationRecord(index, spec.seed, result.k_hat)


def replicate(spec: DesignSpec, B: int, cfg: EstimatorConfig | None = None,
              workers: int = 1) -> ReplicationReport:
    """Run the estimator on ``B`` datasets seeded ``spec.seed + b``."""
    if B < 1:
        raise ConfigError(f"B must be >= 1, got {B}")
    cfg = default_config(spec, cfg)
    kcap = cfg.resolve(spec.n, spec.p).kcap
    if kcap < spec.k0:
        raise ConfigError(f"kcap={kcap} is below the true number of clusters {spec.k0}")
    tasks = [(b, spec.with_seed(spec.seed + b), cfg) for b in range(B)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_one, tasks, chunksize=max(1, B // (4 * workers))))
    else:
        records = [_one(t) for t in tasks]
    for r in records:
        if r.error:
            log.warning("replication %d (seed %d) failed: %s", r.index, r.seed, r.error)
    return ReplicationReport(spec, cfg, tuple(records))
