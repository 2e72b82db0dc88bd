"""Estimators of the error variance sigma^2 and the normalization constant kappa.

Three strategies are available:

``lip``
    first differences along the feature axis; suited to smooth trends.
``pc``
    first differences inside known segments on which the signal is
    piecewise constant.
``rss``
    residuals of an odd/even column split: cluster the odd columns, then
    measure the spread of the even columns around those clusters' means.

``kappa`` is defined through the fourth moment ``theta4`` as
``sqrt(theta4 / sigma2**2 - 1)``; it equals ``sqrt(2)`` for Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import DataMatrix, as_array, center_rows
from .exceptions import ConfigError, DataError, DegenerateNoiseError
from .kmeans import DEFAULT_MAX_ITER, cluster_means, kmeans

METHODS = ("lip", "pc", "rss")
DEFAULT_KMAX = 20
_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class NoiseEstimate:
    sigma2: float
    kappa: float
    theta4: float
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown variance method {self.method!r}")
        if not (self.sigma2 > 0 and self.kappa > 0):
            raise DegenerateNoiseError(
                f"invalid noise estimate sigma2={self.sigma2}, kappa={self.kappa}",
                self.sigma2, self.theta4, self.method,
            )

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class SegmentBoundaries:
    """1-based cutpoints ``1 = j_0 < j_1 < ... < j_T = p + 1``.

    Segment ``t`` covers columns ``j_{t-1} <= j < j_t``.
    """

    cutpoints: tuple[int, ...]

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cutpoints)
        if len(cuts) < 2 or cuts[0] != 1:
            raise ConfigError(f"cutpoints must start at 1 and have at least two entries, got {cuts}")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ConfigError(f"cutpoints must be strictly increasing, got {cuts}")
        object.__setattr__(self, "cutpoints", cuts)

    @classmethod
    def from_cutpoints(cls, cuts, p: int) -> "SegmentBoundaries":
        """Build from a cutpoint list, adding the endpoints 1 and p + 1 if absent."""
        cuts = sorted(int(c) for c in cuts)
        if not cuts or cuts[0] != 1:
            cuts.insert(0, 1)
        if cuts[-1] != p + 1:
            cuts.append(p + 1)
        seg = cls(tuple(cuts))
        seg.check(p)
        return seg

    @classmethod
    def equal(cls, p: int, T: int) -> "SegmentBoundaries":
        """``T`` segments of equal length ``p / T``."""
        if T < 1 or p % T:
            raise ConfigError(f"cannot split p={p} into {T} equal segments")
        return cls(tuple(1 + t * (p // T) for t in range(T + 1)))

    @property
    def T(self) -> int:
        return len(self.cutpoints) - 1

    def check(self, p: int) -> None:
        if self.cutpoints[-1] != p + 1:
            raise ConfigError(f"last cutpoint must be p + 1 = {p + 1}, got {self.cutpoints[-1]}")

    def within_mask(self, p: int) -> np.ndarray:
        """Mask over the ``p - 1`` differences ``Y_j - Y_{j-1}`` (j = 2..p) inside a segment."""
        self.check(p)
        j = np.arange(2, p + 1)
        return ~np.isin(j, self.cutpoints)


def _estimate(sigma2: float, theta4: float, method: str, scale: float) -> NoiseEstimate:
    if not sigma2 > _EPS * scale:
        raise DegenerateNoiseError(
            f"{method}: estimated error variance {sigma2!r} is zero or numerically negligible",
            sigma2, theta4, method,
        )
    ratio = theta4 / sigma2**2
    if not ratio > 1.0:
        raise DegenerateNoiseError(
            f"{method}: theta4 / sigma2^2 = {ratio!r} <= 1, kappa is undefined",
            sigma2, theta4, method,
        )
    return NoiseEstimate(float(sigma2), math.sqrt(ratio - 1.0), float(theta4), method)


def _mean_square(y: np.ndarray) -> float:
    return max(float(np.mean(y * y)), np.finfo(np.float64).tiny)


def _difference_estimate(y: np.ndarray, mask: np.ndarray, method: str) -> NoiseEstimate:
    d = np.diff(y, axis=1)[:, mask]
    if d.size == 0:
        raise DataError(f"{method}: no within-segment differences available (p - T = 0)")
    d2 = d * d
    sigma2 = float(np.mean(d2)) / 2.0
    theta4 = float(np.mean(d2 * d2)) / 2.0 - 3.0 * sigma2**2
    # intercepts cancel in the differences, so compare against the centered data
    return _estimate(sigma2, theta4, method, _mean_square(center_rows(y).values))


def _checked(data) -> np.ndarray:
    if not isinstance(data, DataMatrix):
        data = DataMatrix(data)
    return data.require_estimable().values


def estimate_lip(data) -> NoiseEstimate:
    y = _checked(data)
    return _difference_estimate(y, np.ones(y.shape[1] - 1, dtype=bool), "lip")


def estimate_pc(data, segments: SegmentBoundaries) -> NoiseEstimate:
    y = _checked(data)
    return _difference_estimate(y, segments.within_mask(y.shape[1]), "pc")


def split_halves(data) -> tuple[np.ndarray, np.ndarray]:
    """Odd (1-based) columns and even columns, each row-centered on its own."""
    y = as_array(data)
    return center_rows(y[:, 0::2]).values, center_rows(y[:, 1::2]).values


def estimate_rss(data, kmax: int = DEFAULT_KMAX, max_iter: int = DEFAULT_MAX_ITER) -> NoiseEstimate:
    y = _checked(data)
    n, p = y.shape
    if p < 6:
        raise DataError(f"rss: need p >= 6 so that each half has 3 columns, got p={p}")
    if not 1 <= kmax <= n:
        raise ConfigError(f"rss: kmax must lie in 1..{n}, got {kmax}")
    half_a, half_b = split_halves(y)
    part = kmeans(half_a, kmax, max_iter)
    # the partition comes from one half, the cluster means from the other
    means_b = cluster_means(half_b, part.assignment, part.K)
    eps_b = half_b - means_b[part.assignment]
    m = p // 2
    e2 = eps_b * eps_b
    sigma2 = float(e2.sum()) / (n * m)
    theta4 = float((e2 * e2).sum()) / (n * m)
    return _estimate(sigma2, theta4, "rss", _mean_square(half_b))


def estimate_noise(data, method: str, segments: SegmentBoundaries | None = None,
                   kmax: int = DEFAULT_KMAX, max_iter: int = DEFAULT_MAX_ITER) -> NoiseEstimate:
    if method == "lip":
        return estimate_lip(data)
    if method == "pc":
        if segments is None:
            raise ConfigError("the pc variance method needs segment boundaries")
        return estimate_pc(data, segments)
    if method == "rss":
        return estimate_rss(data, kmax, max_iter)
    raise ConfigError(f"unknown variance method {method!r}; choose from {METHODS}")


def rss_curve(x, k_range, max_iter: int = DEFAULT_MAX_ITER) -> list[tuple[int, float]]:
    """Average squared residual ``RSS(K)`` of the k-means partition for each K."""
    y = as_array(x)
    n = y.shape[0]
    out = []
    for K in k_range:
        if not 1 <= K <= n:
            raise ConfigError(f"K must lie in 1..{n}, got {K}")
        part = kmeans(y, K, max_iter)
        out.append((int(K), part.within_ss / n))
    return out
