import math

import numpy as np
import pytest

import clusterr.estimator as est_mod
from clusterr.estimator import EstimatorConfig, pvalue_curve, recompute_statistic, run
from clusterr.exceptions import ConfigError, DataError, DegenerateNoiseError
from clusterr.noise import SegmentBoundaries
from clusterr.simulation import DesignSpec, balanced_sizes, default_config, generate


def two_blobs(seed, n=100, p=10, sd=0.1, level=10.0):
    rng = np.random.default_rng(seed)
    y = sd * rng.standard_normal((n, p))
    y[: n // 2] += level
    y[n // 2:] -= level
    return y


def contrast_blobs(seed, n=100, p=10, sd=0.1, level=10.0):
    # mean-zero row patterns survive row-centering
    y = two_blobs(seed, n, p, sd, level)
    y[:, : p // 2] *= -1
    return y


def fit(y, cfg=None, **kw):
    # the row patterns jump once, at the midpoint, so the pc estimator is told where
    kw.setdefault("segments", SegmentBoundaries.equal(y.shape[1], 2))
    return run(y, cfg, **kw)


def assert_stopping(result):
    recs = result.trace.records
    assert [r.K for r in recs] == list(range(1, len(recs) + 1))
    if result.trace.pvalue_is_probability:
        assert all(0.0 <= r.pvalue <= 1.0 for r in recs)
        accept = [r.pvalue > result.config.alpha for r in recs]
    else:
        accept = [r.statistic <= 1.0 for r in recs]
    assert [not a for a in accept] == [r.rejected for r in recs]
    if result.accepted:
        assert result.k_hat == accept.index(True) + 1 == len(recs)
        assert result.partition.K == result.k_hat == result.trace.accepted
    else:
        assert not any(accept) and len(recs) == result.config.kcap
        assert result.partition is None and result.trace.accepted is None


class TestConfig:
    def test_defaults(self):
        cfg = EstimatorConfig().resolve(100, 12)
        assert (cfg.block_size, cfg.kcap, cfg.variance_method) == (12, 50, "lip")
        assert EstimatorConfig().resolve(20, 12).kcap == 20

    def test_segments_imply_pc(self):
        cfg = EstimatorConfig(segments=SegmentBoundaries((1, 4, 7))).resolve(10, 6)
        assert cfg.variance_method == "pc"

    @pytest.mark.parametrize("kw", [
        {"alpha": 0.0}, {"alpha": 1.0}, {"statistic": "mean"}, {"variance_method": "pc"},
        {"variance_method": "mad"}, {"kcap": 0}, {"kcap": 101}, {"max_iter": 0},
        {"statistic": "blocked", "block_size": 101},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            EstimatorConfig(**kw).resolve(100, 10)

    def test_to_dict(self):
        d = EstimatorConfig(segments=SegmentBoundaries((1, 3, 6))).resolve(10, 5).to_dict()
        assert d["segments"] == [1, 3, 6] and d["variance_method"] == "pc" and d["center"] is True


class TestRun:
    def test_two_levels_uncentered(self):
        # rows at +10 and -10 are identical after centering, so they are kept raw
        for seed in range(20):
            r = run(two_blobs(seed), center=False)
            assert r.k_hat == 2
            assert_stopping(r)
            labels = r.partition.assignment
            assert len(set(labels[:50])) == 1 and len(set(labels[50:])) == 1

    def test_two_patterns_centered(self):
        for seed in range(20):
            r = fit(contrast_blobs(seed))
            assert r.k_hat == 2
            assert_stopping(r)

    def test_first_pvalue_tiny_under_strong_signal(self):
        r = fit(contrast_blobs(0))
        assert r.trace.records[0].pvalue <= 1e-6

    def test_no_acceptance(self):
        r = fit(contrast_blobs(1), kcap=1)
        assert not r.accepted and r.k_hat is None
        assert len(pvalue_curve(r)) == 1
        assert all(pv <= 0.05 for _, pv in pvalue_curve(r))
        assert_stopping(r)

    def test_pvalue_curve(self):
        r = fit(contrast_blobs(2))
        curve = pvalue_curve(r)
        assert [k for k, _ in curve] == [1, 2]
        assert curve[-1][1] > 0.05

    @pytest.mark.parametrize("statistic", ["max", "blocked", "fdr"])
    def test_statistics_agree_on_easy_data(self, statistic):
        r = fit(contrast_blobs(3), statistic=statistic)
        assert r.k_hat == 2
        assert_stopping(r)
        assert r.trace.pvalue_is_probability == (statistic != "fdr")

    def test_fdr_threshold_slot(self):
        r = fit(contrast_blobs(4), statistic="fdr")
        assert all(rec.threshold == 1.0 and rec.pvalue == rec.statistic for rec in r.trace.records)

    def test_blocked_unit_equals_max(self):
        y = contrast_blobs(5)
        a, b = fit(y), fit(y, statistic="blocked", block_size=1)
        assert [r.statistic for r in a.trace.records] == [r.statistic for r in b.trace.records]
        assert [r.pvalue for r in a.trace.records] == [r.pvalue for r in b.trace.records]

    def test_deterministic(self):
        y = contrast_blobs(6)
        a, b = fit(y, statistic="blocked"), fit(y.copy(), statistic="blocked")
        assert a.trace == b.trace
        np.testing.assert_array_equal(a.partition.assignment, b.partition.assignment)

    def test_noise_estimated_once(self, monkeypatch):
        calls = []
        real = est_mod.estimate_noise

        def counting(*args, **kw):
            calls.append(1)
            return real(*args, **kw)

        monkeypatch.setattr(est_mod, "estimate_noise", counting)
        r = run(np.random.default_rng(7).standard_normal((60, 10)), kcap=5, alpha=0.5)
        assert len(calls) == 1
        assert len(r.trace.records) >= 1

    def test_overrides_keep_base(self):
        cfg = EstimatorConfig(alpha=0.1)
        r = fit(contrast_blobs(8), cfg, statistic="blocked")
        assert r.config.alpha == 0.1 and r.config.statistic == "blocked"

    def test_degenerate_noise_propagates(self):
        with pytest.raises(DegenerateNoiseError):
            run(np.tile(np.arange(6.0), (10, 1)))

    def test_too_small(self):
        with pytest.raises(DataError):
            run(np.zeros((1, 5)))

    def test_rss_method(self):
        r = run(contrast_blobs(9, sd=1.0, level=3.0, p=12), variance_method="rss", kmax=4)
        assert r.noise.method == "rss"
        assert_stopping(r)

    def test_reference_design_low_noise(self):
        spec = DesignSpec(500, 30, balanced_sizes(500), 0.25, seed=3)
        r = run(generate(spec), default_config(spec))
        assert r.k_hat == 10
        assert_stopping(r)


class TestRecompute:
    @pytest.mark.parametrize("statistic", ["max", "blocked", "fdr"])
    def test_round_trip(self, statistic):
        y = contrast_blobs(10, sd=1.0, level=2.0, p=12)
        r = fit(y, statistic=statistic)
        assert r.accepted
        h = recompute_statistic(y, r.partition.assignment, r.noise.sigma2, r.noise.kappa, statistic,
                                block_size=r.config.block_size)
        assert h == pytest.approx(r.trace.records[-1].statistic, rel=1e-9, abs=1e-12)

    def test_uncentered(self):
        y = two_blobs(11, sd=1.0, level=2.0)
        r = run(y, center=False)
        h = recompute_statistic(y, r.partition.assignment, r.noise.sigma2, r.noise.kappa, center=False)
        assert h == pytest.approx(r.trace.records[-1].statistic, rel=1e-9)
        assert math.isfinite(h)
