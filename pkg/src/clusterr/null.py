"""Null distributions of the test statistics.

Under the null hypothesis every individual statistic behaves like
``Z = (chi2_p - p) / sqrt(2 p)``. A block of ``m`` such variables summed and
divided by ``sqrt(N)`` follows ``(chi2_{m p} - m p) / sqrt(2 p N)``. The
statistics are maxima over independent copies, so their CDFs are products
of chi-square CDFs, evaluated here in log space so that ``n`` in the tens of
thousands and p-values close to 0 or 1 stay accurate.

Everything rests on the regularized incomplete gamma function, implemented
below with the usual series / continued-fraction split.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import ConfigError

_EPS = np.finfo(np.float64).eps
_TINY = 1e-300
_LOG_2PI = math.log(2.0 * math.pi)


def _stirling_correction(a):
    # lgamma(a) - [(a - 1/2) log a - a + log(2 pi)/2], accurate to 1e-16 for a >= 30
    a2 = a * a
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * a2)) / a2) / a2) / a


def _log_prefactor(a, x):
    """log(x**a * exp(-x) / Gamma(a)), free of the cancellation in a log x - x."""
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = (x - a) / a
        big = -a * (d - np.log1p(d)) + 0.5 * np.log(a) - 0.5 * _LOG_2PI - _stirling_correction(a)
        uniq, inv = np.unique(a, return_inverse=True)
        lg = np.array([math.lgamma(v) for v in uniq])[inv].reshape(a.shape)
        small = a * np.log(x) - x - lg
        out = np.where((a >= 30.0) & (d >= -0.5), big, small)
    return np.where(x > 0, out, -np.inf)


def _max_iter(a) -> int:
    return int(50 + 12 * math.sqrt(float(np.max(a)) + 1.0))


def _series(a, x, logpre):
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
    term = np.ones_like(x)
    total = np.ones_like(x)
    ap = a.copy()
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_max_iter(a)):
        ap = ap + 1.0
        term = np.where(active, term * x / ap, term)
        total = np.where(active, total + term, total)
        active &= np.abs(term) > np.abs(total) * _EPS * 0.25
        if not active.any():
            break
    with np.errstate(divide="ignore"):
        return logpre - np.log(a) + np.log(total)


def _continued_fraction(a, x, logpre):
    # Q(a, x) by the modified Lentz method
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _max_iter(a) + 1):
        an = -i * (i - a)
        b = b + 2.0
        d_new = an * d + b
        d_new = np.where(np.abs(d_new) < _TINY, _TINY, d_new)
        c_new = b + an / c
        c_new = np.where(np.abs(c_new) < _TINY, _TINY, c_new)
        d_new = 1.0 / d_new
        delta = d_new * c_new
        h = np.where(active, h * delta, h)
        d = np.where(active, d_new, d)
        c = np.where(active, c_new, c)
        active &= np.abs(delta - 1.0) > _EPS * 0.5
        if not active.any():
            break
    return logpre + np.log(h)


def log_regularized_gamma(a, x):
    """Return ``(log P(a, x), log Q(a, x))`` for the regularized incomplete gamma.

    ``P`` is the lower and ``Q = 1 - P`` the upper regularized function.
    Both are returned in log space and each is accurate in its own tail.
    """
    a, x = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(x, dtype=np.float64))
    a = a.astype(np.float64, copy=True)
    x = x.astype(np.float64, copy=True)
    if np.any(a <= 0):
        raise ValueError("shape parameter a must be positive")
    log_p = np.empty(x.shape)
    log_q = np.empty(x.shape)

    nonpos = x <= 0
    log_p[nonpos] = -np.inf
    log_q[nonpos] = 0.0
    inf = np.isposinf(x)
    log_p[inf] = 0.0
    log_q[inf] = -np.inf

    finite = ~nonpos & ~inf
    use_series = finite & (x < a + 1.0)
    use_cf = finite & ~use_series
    if use_series.any():
        aa, xx = a[use_series], x[use_series]
        lp = _series(aa, xx, _log_prefactor(aa, xx))
        log_p[use_series] = lp
        log_q[use_series] = np.log1p(-np.exp(lp))
    if use_cf.any():
        aa, xx = a[use_cf], x[use_cf]
        lq = _continued_fraction(aa, xx, _log_prefactor(aa, xx))
        log_q[use_cf] = lq
        log_p[use_cf] = np.log1p(-np.exp(lq))
    return log_p, log_q


def regularized_gamma_p(a, x):
    return np.exp(log_regularized_gamma(a, x)[0])


def regularized_gamma_q(a, x):
    return np.exp(log_regularized_gamma(a, x)[1])


def _scalar_or_array(v):
    return float(v) if np.ndim(v) == 0 else v


def _log_block_cdf(p: int, m, N: int, x):
    """log P(Lambda <= x), log P(Lambda > x) for Lambda = (chi2_{mp} - mp)/sqrt(2pN)."""
    dof = m * p
    chi = dof + np.asarray(x, dtype=np.float64) * math.sqrt(2.0 * p * N)
    return log_regularized_gamma(0.5 * dof, 0.5 * chi)


def chi2_rescaled_cdf(p: int, x):
    """CDF of ``(chi2_p - p) / sqrt(2 p)``; zero below ``-sqrt(p / 2)``."""
    _check_p(p)
    return _scalar_or_array(np.exp(_log_block_cdf(p, 1, 1, x)[0]))


def _check_p(p):
    if int(p) != p or p < 1:
        raise ConfigError(f"p must be a positive integer, got {p}")


class _MaxOfBlocks:
    """Distribution of the maximum of independent rescaled block sums."""

    def __init__(self, p: int, counts, N: int | None = None):
        _check_p(p)
        counts = {int(m): int(c) for m, c in dict(counts).items()}
        if not counts or min(counts) < 1 or min(counts.values()) < 1:
            raise ConfigError("block sizes and counts must be positive and non-empty")
        self.p = int(p)
        self.N = int(N) if N is not None else max(counts)
        if self.N < 1:
            raise ConfigError(f"block length must be >= 1, got {N}")
        self.sizes = np.array(sorted(counts), dtype=np.float64)
        self.counts = np.array([counts[m] for m in sorted(counts)], dtype=np.float64)
        # below the largest per-block support point some block CDF is zero
        self.lower = -float(self.sizes.min()) * p / math.sqrt(2.0 * p * self.N)

    @classmethod
    def from_sizes(cls, p: int, block_sizes, N: int | None = None) -> "_MaxOfBlocks":
        return cls(p, Counter(int(m) for m in block_sizes), N)

    @classmethod
    def iid(cls, p: int, n: int) -> "_MaxOfBlocks":
        if int(n) != n or n < 1:
            raise ConfigError(f"n must be a positive integer, got {n}")
        return cls(p, {1: int(n)}, 1)

    def log_cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        total = np.zeros(x.shape)
        for m, c in zip(self.sizes, self.counts):
            total = total + c * _log_block_cdf(self.p, m, self.N, x)[0]
        return total

    def cdf(self, x):
        return np.exp(self.log_cdf(x))

    def sf(self, x):
        with np.errstate(invalid="ignore"):
            out = -np.expm1(self.log_cdf(x))
        return np.where(np.isnan(out), 1.0, out)

    def quantile(self, alpha) -> np.ndarray:
        """(1 - alpha)-quantile, by bracketed bisection down to adjacent floats."""
        alpha = np.asarray(alpha, dtype=np.float64)
        if np.any((alpha <= 0) | (alpha >= 1)):
            raise ConfigError("alpha must lie strictly between 0 and 1")
        target = np.log1p(-alpha)
        lo = np.full(alpha.shape, self.lower)
        hi = np.maximum(lo + 1.0, 1.0)
        for _ in range(200):
            short = self.log_cdf(hi) < target
            if not short.any():
                break
            lo = np.where(short, hi, lo)
            hi = np.where(short, 2.0 * hi + 1.0, hi)
        for _ in range(2100):
            mid = 0.5 * (lo + hi)
            open_ = (mid > lo) & (mid < hi) & (hi - lo > _EPS * np.abs(mid))
            if not open_.any():
                break
            below = self.log_cdf(mid) < target
            lo = np.where(open_ & below, mid, lo)
            hi = np.where(open_ & ~below, mid, hi)
        # hi is the smallest float found with F(hi) >= 1 - alpha
        return hi


def max_quantile(p: int, n: int, alpha):
    """(1 - alpha)-quantile of the maximum of ``n`` iid rescaled chi2_p variables."""
    return _scalar_or_array(_MaxOfBlocks.iid(p, n).quantile(alpha))


def max_pvalue(p: int, n: int, h):
    """P(max of n iid rescaled chi2_p variables > h)."""
    return _scalar_or_array(_MaxOfBlocks.iid(p, n).sf(h))


def blocked_cdf(p: int, block_sizes, x, N: int | None = None):
    return _scalar_or_array(_MaxOfBlocks.from_sizes(p, block_sizes, N).cdf(x))


def blocked_quantile(p: int, block_sizes, alpha, N: int | None = None):
    """(1 - alpha)-quantile of the maximum over blocks.

    ``N`` is the nominal block length dividing every block sum; it defaults
    to the largest block size.
    """
    return _scalar_or_array(_MaxOfBlocks.from_sizes(p, block_sizes, N).quantile(alpha))


def blocked_pvalue(p: int, block_sizes, h, N: int | None = None):
    return _scalar_or_array(_MaxOfBlocks.from_sizes(p, block_sizes, N).sf(h))


def pointwise_quantile(p: int, beta):
    """(1 - beta)-quantile of a single rescaled chi2_p variable."""
    return max_quantile(p, 1, beta)


def block_sizes_for(n: int, N: int) -> list[int]:
    """Sizes of the consecutive blocks of length ``N`` covering ``n`` indices."""
    if not 1 <= N <= n:
        raise ConfigError(f"block length must lie in 1..{n}, got {N}")
    full, rest = divmod(n, N)
    return [N] * full + ([rest] if rest else [])


@dataclass(frozen=True)
class NullDistribution:
    """Null law of one of the three aggregate statistics.

    ``mode`` is ``"max"``, ``"blocked"`` or ``"fdr"``. For the blocked mode
    ``block_length`` is the nominal length ``N`` and ``block_sizes`` the
    actual sizes (the last block may be short).
    """

    p: int
    n: int
    mode: str = "max"
    block_length: int = 1
    block_sizes: tuple[int, ...] = ()

    def __post_init__(self):
        _check_p(self.p)
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.mode not in ("max", "blocked", "fdr"):
            raise ConfigError(f"unknown null mode {self.mode!r}")
        if self.mode == "blocked":
            if sum(self.block_sizes) != self.n:
                raise ConfigError("block sizes must sum to n")
        else:
            object.__setattr__(self, "block_length", 1)
            object.__setattr__(self, "block_sizes", ())

    @classmethod
    def for_max(cls, p: int, n: int) -> "NullDistribution":
        return cls(p, n, "max")

    @classmethod
    def for_blocked(cls, p: int, n: int, N: int) -> "NullDistribution":
        return cls(p, n, "blocked", N, tuple(block_sizes_for(n, N)))

    @classmethod
    def for_fdr(cls, p: int, n: int) -> "NullDistribution":
        return cls(p, n, "fdr")

    def _law(self) -> _MaxOfBlocks:
        if self.mode == "blocked":
            return _MaxOfBlocks.from_sizes(self.p, self.block_sizes, self.block_length)
        return _MaxOfBlocks.iid(self.p, self.n)

    def cdf(self, x):
        return _scalar_or_array(self._law().cdf(x))

    def quantile(self, alpha):
        if self.mode == "fdr":
            return 1.0
        return _scalar_or_array(self._law().quantile(alpha))

    def pvalue(self, h):
        if self.mode == "fdr":
            raise ConfigError("the FDR statistic has no p-value; compare it with 1")
        return _scalar_or_array(self._law().sf(h))

    def rescaling_quantiles(self, alpha: float) -> np.ndarray:
        """``q_chi(i alpha / n)`` for ``i = 1..n``."""
        return _rescaling_quantiles(self.p, self.n, float(alpha))


@lru_cache(maxsize=16)
def _rescaling_quantiles(p: int, n: int, alpha: float) -> np.ndarray:
    betas = alpha * np.arange(1, n + 1) / n
    q = np.asarray(pointwise_quantile(p, betas), dtype=np.float64).reshape(n)
    q.setflags(write=False)
    return q
