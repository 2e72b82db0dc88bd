"""Deterministic k-means on row-centered data.

Distances are the per-feature mean squared difference
``rho(i, i') = (1/p) * sum_j (x_ij - x_i'j)**2``. Seeding is a
farthest-point recursion: the first seed is subject 0, and every further
seed is the member of the widest starting cluster that lies farthest from
that cluster's seed. All argmin/argmax ties resolve to the smallest index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import as_array
from .exceptions import ConfigError

DEFAULT_MAX_ITER = 100
_ROW_CHUNK = 4096


@dataclass(frozen=True)
class SeedSet:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ConfigError(f"seed indices must be distinct, got {idx}")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class Partition:
    """A k-means partition of the subjects.

    ``within_ss`` is the sum over subjects of the distance to their own
    cluster mean, i.e. the total squared residual divided by ``p``.
    ``ss_history`` holds that quantity for the starting clusters and for
    every partition visited by the Lloyd iterations.
    """

    assignment: np.ndarray
    centers: np.ndarray
    within_ss: float
    n_iter: int = 0
    converged: bool = True
    ss_history: tuple[float, ...] = field(default=())

    def __post_init__(self):
        a = np.array(self.assignment, dtype=np.intp, copy=True)
        c = np.array(self.centers, dtype=np.float64, copy=True)
        if a.ndim != 1 or c.ndim != 2:
            raise ConfigError("assignment must be 1-d and centers 2-d")
        K = c.shape[0]
        if a.size and (a.min() < 0 or a.max() >= K):
            raise ConfigError(f"cluster ids must lie in 0..{K - 1}")
        if np.any(np.bincount(a, minlength=K) == 0):
            raise ConfigError("every cluster of a partition must be non-empty")
        a.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "centers", c)

    @property
    def K(self) -> int:
        return self.centers.shape[0]

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)


def pair_distance(x, i: int, i2: int) -> float:
    """Mean squared difference between the rows ``i`` and ``i2``."""
    y = as_array(x)
    d = y[i] - y[i2]
    return float(np.mean(d * d))


def distances_to(x, points) -> np.ndarray:
    """``(n, m)`` matrix of distances from every row of ``x`` to every point."""
    y = as_array(x)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    out = np.empty((y.shape[0], pts.shape[0]))
    for start in range(0, y.shape[0], _ROW_CHUNK):
        block = y[start:start + _ROW_CHUNK]
        diff = block[:, None, :] - pts[None, :, :]
        out[start:start + _ROW_CHUNK] = np.mean(diff * diff, axis=2)
    return out


def _nearest(dist: np.ndarray, seeds) -> np.ndarray:
    assign = np.argmin(dist, axis=1)
    # a seed always starts in its own cluster, even when it duplicates another seed
    assign[list(seeds)] = np.arange(len(seeds))
    return assign


class FarthestPointSeeder:
    """Incrementally builds the nested seed sequence ``i_1, i_2, ...``.

    The seeds for ``K`` clusters are a prefix of the seeds for ``K + 1``,
    so a sequential search over ``K`` can extend one seeder instead of
    reseeding from scratch.
    """

    def __init__(self, x):
        self._x = as_array(x)
        self.seeds: list[int] = [0]
        self._dist = [distances_to(self._x, self._x[0])[:, 0]]

    @property
    def n(self) -> int:
        return self._x.shape[0]

    def distance_matrix(self, K: int) -> np.ndarray:
        return np.column_stack(self._dist[:K])

    def _next_seed(self) -> int:
        dist = self.distance_matrix(len(self.seeds))
        assign = _nearest(dist, self.seeds)
        own = dist[np.arange(self.n), assign]
        rho_max = np.full(len(self.seeds), -np.inf)
        np.maximum.at(rho_max, assign, own)
        k_star = int(np.argmax(rho_max))
        candidates = np.where(assign == k_star, own, -np.inf)
        candidates[self.seeds] = -np.inf
        if np.isfinite(candidates).any() and candidates.max() > 0:
            return int(np.argmax(candidates))
        # every subject coincides with a seed: fall back to the first unused index
        unused = np.ones(self.n, dtype=bool)
        unused[self.seeds] = False
        return int(np.argmax(unused))

    def seeds_for(self, K: int) -> SeedSet:
        if not 1 <= K <= self.n:
            raise ConfigError(f"K must lie in 1..{self.n}, got {K}")
        while len(self.seeds) < K:
            nxt = self._next_seed()
            self.seeds.append(nxt)
            self._dist.append(distances_to(self._x, self._x[nxt])[:, 0])
        return SeedSet(tuple(self.seeds[:K]))


def choose_seeds(x, K: int) -> SeedSet:
    return FarthestPointSeeder(x).seeds_for(K)


def starting_assignment(x, seeds: SeedSet) -> np.ndarray:
    """Assign every subject to its nearest seed."""
    y = as_array(x)
    dist = distances_to(y, y[list(seeds.indices)])
    return _nearest(dist, seeds.indices)


def cluster_means(x, assignment: np.ndarray, K: int) -> np.ndarray:
    y = as_array(x)
    sums = np.zeros((K, y.shape[1]))
    np.add.at(sums, assignment, y)
    counts = np.bincount(assignment, minlength=K)
    return sums / counts[:, None]


def _fill_empty(assign: np.ndarray, own: np.ndarray, K: int) -> np.ndarray:
    counts = np.bincount(assign, minlength=K)
    own = own.copy()
    for k in np.flatnonzero(counts == 0):
        # donor must keep at least one member
        eligible = counts[assign] >= 2
        i = int(np.argmax(np.where(eligible, own, -np.inf)))
        counts[assign[i]] -= 1
        assign[i] = k
        counts[k] = 1
        own[i] = 0.0
    return assign


def lloyd(x, seeds: SeedSet, max_iter: int = DEFAULT_MAX_ITER) -> Partition:
    """Run Lloyd iterations from the nearest-seed starting clusters.

    Stops once an iteration leaves the assignment unchanged or after
    ``max_iter`` iterations; in the latter case the partition is returned
    with ``converged=False``. A cluster that empties during reassignment is
    re-seeded with the subject farthest from its current center.
    """
    if max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1, got {max_iter}")
    y = as_array(x)
    n = y.shape[0]
    K = len(seeds)
    if K > n or any(not 0 <= i < n for i in seeds.indices):
        raise ConfigError(f"invalid seeds {seeds.indices} for n={n}")
    rows = np.arange(n)
    assign = starting_assignment(y, seeds)
    history = []
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        centers = cluster_means(y, assign, K)
        dist = distances_to(y, centers)
        history.append(float(dist[rows, assign].sum()))
        new = np.argmin(dist, axis=1)
        new = _fill_empty(new, dist[rows, new], K)
        if np.array_equal(new, assign):
            converged = True
            break
        assign = new
    centers = cluster_means(y, assign, K)
    resid = y - centers[assign]
    within = float(np.mean(resid * resid, axis=1).sum())
    if not converged:
        history.append(within)
    return Partition(assign, centers, within, n_iter, converged, tuple(history))


def kmeans(x, K: int, max_iter: int = DEFAULT_MAX_ITER) -> Partition:
    return lloyd(x, choose_seeds(x, K), max_iter)


def residuals(x, partition: Partition) -> np.ndarray:
    """Cluster-specific residuals: each row minus its cluster mean."""
    y = as_array(x)
    return y - partition.centers[partition.assignment]
