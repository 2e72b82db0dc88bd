"""End-to-end acceptance criteria, each at its stated tolerance.

Simulation criteria use replication seeds 1, 2, ..., B. The summary at the
end of the pytest run prints one PASS/FAIL line per criterion.
"""

import json
import math
from functools import lru_cache

import numpy as np
import pytest
from scipy.stats import chi2

from clusterr.cli import main
from clusterr.data import save_csv
from clusterr.estimator import EstimatorConfig, run
from clusterr.noise import SegmentBoundaries, estimate_pc
from clusterr.null import NullDistribution, blocked_quantile, max_quantile, pointwise_quantile
from clusterr.simulation import DesignSpec, default_config, generate, replicate
from clusterr.teststats import IndividualStats, block_layout, blocked_statistic, fdr_statistic, max_statistic

SEED = 1


@lru_cache(maxsize=None)
def study(n, p, nsr, B, statistic="max"):
    spec = DesignSpec.balanced(n, p, nsr, seed=SEED)
    return replicate(spec, B, default_config(spec, EstimatorConfig(variance_method="pc", statistic=statistic,
                                                                   center=False)))


def fmt(f):
    return " ".join(f"{k}={float(v):.3f}" for k, v in f.items())


@pytest.mark.acceptance("1", "NSR=1, (1000, 30), B=200: P(K=10) in [0.89, 0.99], P(K>10) <= 0.11")
def test_c1_balanced_nsr1(measured):
    f = study(1000, 30, 1.0, 200).frequencies()
    measured(fmt(f))
    assert 0.89 <= f["exact"] <= 0.99
    assert f["over"] <= 0.11


@pytest.mark.acceptance("2", "NSR=2, (1000, 30), B=100: P(K<10) >= 0.45")
def test_c2_balanced_nsr2(measured):
    f = study(1000, 30, 2.0, 100).frequencies()
    measured(fmt(f))
    assert f["under"] >= 0.45


@pytest.mark.acceptance("3", "NSR=1.5, (2000, 50), B=100: P(K=10) in [0.80, 0.96]")
def test_c3_larger_sample_point(measured):
    f = study(2000, 50, 1.5, 100).frequencies()
    measured(fmt(f))
    assert 0.80 <= f["exact"] <= 0.96


@pytest.mark.acceptance("4", "blocked N=p, NSR=2, B=100: P(K=10) >= 0.60 and above the max statistic")
def test_c4_blocked_statistic(measured):
    blocked = study(1000, 30, 2.0, 100, "blocked").frequencies()
    plain = study(1000, 30, 2.0, 100).frequencies()
    measured(f"blocked {fmt(blocked)}; max exact={float(plain['exact']):.3f}")
    assert blocked["exact"] > plain["exact"]
    assert blocked["exact"] >= 0.60


@pytest.mark.acceptance("5", "pure noise, (1000, 30), B=300: P(K>1) in [0.02, 0.09]")
def test_c5_null_size(measured):
    spec = DesignSpec.pure_noise(1000, 30, seed=SEED)
    f = replicate(spec, 300).frequencies()
    measured(fmt(f))
    assert 0.02 <= f["over"] <= 0.09


@pytest.mark.acceptance("6", "q(0.05) vs empirical 95th percentile of 1e5 simulated maxima within 1%")
@pytest.mark.parametrize("p,n", [(5, 10), (30, 1000), (12, 24311)])
def test_c6_quantile_oracle(measured, p, n):
    rng = np.random.default_rng(SEED)
    reps, chunk = 100_000, max(1, 2_000_000 // n)
    maxima = np.concatenate([
        rng.chisquare(p, size=(min(chunk, reps - s), n)).max(axis=1) for s in range(0, reps, chunk)
    ])
    empirical = np.quantile((maxima - p) / math.sqrt(2 * p), 0.95)
    q = max_quantile(p, n, 0.05)
    rel = abs(q - empirical) / abs(empirical)
    measured(f"(p={p}, n={n}) q={q:.5f} empirical={empirical:.5f} rel={rel:.4f}")
    assert rel <= 0.01


@pytest.mark.acceptance("7", "kappa_pc on N(0,1), (1000, 30): within 5% of sqrt(2) in >= 95 of 100")
def test_c7_kappa_gaussian(measured):
    seg = SegmentBoundaries.equal(30, 5)
    hits = 0
    for b in range(100):
        y = generate(DesignSpec.pure_noise(1000, 30, seed=SEED + b)).values
        hits += abs(estimate_pc(y, seg).kappa - math.sqrt(2)) <= 0.05 * math.sqrt(2)
    measured(f"{hits}/100")
    assert hits >= 95


@pytest.mark.acceptance("8", "exact reductions: blocked N=1 = max, unit-block q_B = q, FDR = enumeration")
def test_c8_exact_reductions(measured):
    rng = np.random.default_rng(SEED)
    # blocked statistic with unit blocks on real runs and synthetic deltas
    spec = DesignSpec.balanced(500, 30, 1.0, seed=SEED)
    y = generate(spec)
    cfg = default_config(spec)
    a = run(y, cfg)
    b = run(y, cfg, statistic="blocked", block_size=1)
    assert [r.statistic for r in a.trace.records] == [r.statistic for r in b.trace.records]
    assert [r.pvalue for r in a.trace.records] == [r.pvalue for r in b.trace.records]
    part = a.partition
    for _ in range(50):
        s = IndividualStats(part.K, rng.standard_normal(part.n), part)
        assert blocked_statistic(s, block_layout(part, 1)) == max_statistic(s)
    # unit-block null equals the iid maximum
    for p, n in [(5, 10), (30, 1000), (12, 24311)]:
        for alpha in (0.01, 0.05, 0.2):
            assert blocked_quantile(p, [1] * n, alpha, 1) == max_quantile(p, n, alpha)
            assert NullDistribution.for_blocked(p, n, 1).quantile(alpha) == NullDistribution.for_max(p, n).quantile(alpha)
    # FDR decision against step-wise enumeration
    p, n, alpha = 20, 10, 0.05
    null = NullDistribution.for_fdr(p, n)
    ours = [pointwise_quantile(p, i * alpha / n) for i in range(1, n + 1)]
    ref = [(chi2.isf(i * alpha / n, p) - p) / math.sqrt(2 * p) for i in range(1, n + 1)]
    rejections = 0
    for _ in range(50):
        delta = rng.normal(1.5, 1.5, size=n)
        ordered = sorted(delta, reverse=True)
        got = fdr_statistic(IndividualStats(1, delta, part), alpha, null) > 1
        assert got == any(d > q for d, q in zip(ordered, ours))
        assert got == any(d > q for d, q in zip(ordered, ref))
        rejections += got
    measured(f"FDR rejections {rejections}/50")
    assert 0 < rejections < 50


def smooth_design(n, p, seed):
    # four smooth mean-zero profiles, so the Lipschitz difference estimator applies
    t = np.linspace(0, 2 * math.pi, p)
    prof = np.array([np.sin(t + phase) for phase in (0, math.pi / 2, math.pi, 3 * math.pi / 2)])
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 4
    return 2.0 * prof[labels] + rng.standard_normal((n, p))


@pytest.mark.acceptance("9", "CSV path accepts (24311, 12) with lip and (3167, 60) with pc, five segments")
def test_c9_real_data_shapes(measured, tmp_path):
    first = tmp_path / "a.csv"
    save_csv(smooth_design(24311, 12, SEED), first)
    code_a = main(["cluster", str(first), "--variance-method", "lip", "--out-dir", str(tmp_path / "a")])
    ra = json.loads((tmp_path / "a" / "result.json").read_text())

    spec = DesignSpec(3167, 60, (317,) * 7 + (316,) * 3, 0.5, seed=SEED)
    second = tmp_path / "b.csv"
    save_csv(generate(spec).values, second)
    code_b = main(["cluster", str(second), "--variance-method", "pc", "--segments", "13,25,37,49",
                   "--out-dir", str(tmp_path / "b")])
    rb = json.loads((tmp_path / "b" / "result.json").read_text())
    measured(f"(24311, 12) exit={code_a} kHat={ra['kHat']}; (3167, 60) exit={code_b} kHat={rb['kHat']}")
    assert code_a == 0 and len(ra["assignments"]) == 24311 and ra["varianceMethod"] == "lip"
    assert code_b == 0 and len(rb["assignments"]) == 3167 and rb["config"]["segments"] == [1, 13, 25, 37, 49, 61]
