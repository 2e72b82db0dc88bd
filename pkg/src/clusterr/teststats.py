"""Individual and aggregate test statistics for a fixed K-cluster partition."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import as_array
from .exceptions import ConfigError, UndefinedRescalingError
from .kmeans import Partition, residuals
from .noise import NoiseEstimate
from .null import NullDistribution

_RESCALE_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class IndividualStats:
    K: int
    delta: np.ndarray
    partition: Partition

    @property
    def n(self) -> int:
        return self.delta.shape[0]


@dataclass(frozen=True, eq=False)
class BlockLayout:
    N: int
    blocks: tuple[np.ndarray, ...]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    @property
    def L(self) -> int:
        return len(self.blocks)


def scaled_residual_ss(x, partition: Partition, noise: NoiseEstimate) -> np.ndarray:
    """Per-subject ``(1/sqrt(p)) * sum_j ((e_ij / sigma)^2 - 1) / kappa``."""
    eps = residuals(x, partition)
    p = eps.shape[1]
    return np.sum(eps * eps / noise.sigma2 - 1.0, axis=1) / (math.sqrt(p) * noise.kappa)


def individual_stats(x, partition: Partition, noise: NoiseEstimate) -> IndividualStats:
    if partition.n != as_array(x).shape[0]:
        raise ConfigError("partition and data cover different numbers of subjects")
    delta = scaled_residual_ss(x, partition, noise)
    delta.setflags(write=False)
    return IndividualStats(partition.K, delta, partition)


def max_statistic(stats: IndividualStats) -> float:
    return float(np.max(stats.delta))


def block_layout(partition: Partition, N: int) -> BlockLayout:
    """Order subjects cluster by cluster (ascending inside each) and cut into blocks of N."""
    n = partition.n
    if not 1 <= N <= n:
        raise ConfigError(f"block length must lie in 1..{n}, got {N}")
    # stable sort keeps ascending subject order inside each cluster
    order = np.argsort(partition.assignment, kind="stable")
    blocks = tuple(order[start:start + N] for start in range(0, n, N))
    return BlockLayout(int(N), blocks)


def blocked_statistic(stats: IndividualStats, layout: BlockLayout) -> float:
    """Maximum over blocks of the block sum of ``delta`` divided by ``sqrt(N)``.

    The short final block, if any, is still divided by the nominal ``sqrt(N)``;
    its null law accounts for the smaller block size.
    """
    order = np.concatenate(layout.blocks)
    starts = np.cumsum([0, *layout.sizes[:-1]])
    sums = np.add.reduceat(stats.delta[order], starts)
    return float(np.max(sums / math.sqrt(layout.N)))


def fdr_statistic(stats: IndividualStats, alpha: float, null: NullDistribution) -> float:
    """``max_i delta_(i) / q_chi(i alpha / n)`` with ``delta`` sorted in decreasing order.

    The null hypothesis is rejected when the result exceeds 1, which is the
    same as some ``delta_(i)`` exceeding its step-wise critical value.
    """
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if null.n != stats.n:
        raise ConfigError(f"null distribution is for n={null.n}, statistics have n={stats.n}")
    q = null.rescaling_quantiles(alpha)
    if np.any(q <= _RESCALE_EPS):
        i = int(np.argmax(q <= _RESCALE_EPS)) + 1
        raise UndefinedRescalingError(
            f"rescaling quantile q_chi({i} * alpha / n) = {q[i - 1]!r} is not positive; "
            "use a smaller alpha"
        )
    ordered = np.sort(stats.delta)[::-1]
    return float(np.max(ordered / q))
