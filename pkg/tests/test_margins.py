import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from copulaeda.margins import (DegenerateSampleError, KernelMargin, NormalMargin, fit_kernel,
                               fit_margin, fit_normal)

samples = st.lists(st.floats(-100, 100), min_size=5, max_size=60).filter(
    lambda v: np.std(v) > 1e-3)


def normal_like(n=100):
    # evenly spaced normal scores rescaled to unit sample standard deviation
    z = special.ndtri((np.arange(1, n + 1) - 0.5) / n)
    return z / np.std(z, ddof=1)


def test_fit_normal_example():
    m = fit_normal([0, 0, 0, 2, 2, 2])
    assert m.mu == 1.0 and m.sigma2 == pytest.approx(1.2, abs=1e-15)


@pytest.mark.parametrize("fit", [fit_normal, fit_kernel])
def test_constant_sample_is_degenerate(fit):
    with pytest.raises(DegenerateSampleError):
        fit([3.0] * 7)


def test_fit_normal_affine():
    x = np.random.default_rng(0).normal(size=40)
    m, m2 = fit_normal(x), fit_normal(-3 * x + 5)
    assert m2.mu == pytest.approx(-3 * m.mu + 5)
    assert m2.sigma2 == pytest.approx(9 * m.sigma2)


def test_kernel_bandwidth_rule():
    # a flat sample has IQR / 1.34 above its standard deviation, so h = 0.9 sd N^-0.2
    x = np.linspace(-1, 1, 100)
    x = x / np.std(x, ddof=1)
    assert fit_kernel(x).bandwidth == pytest.approx(0.9 * 100 ** -0.2, rel=1e-12)
    assert fit_kernel(x).bandwidth == pytest.approx(0.3585, abs=1e-3)
    x = normal_like()
    q1, q3 = np.quantile(x, [0.25, 0.75])
    assert fit_kernel(x).bandwidth == pytest.approx(0.9 * min(1.0, (q3 - q1) / 1.34) * 0.398107,
                                                    rel=1e-5)
    assert fit_kernel(4 * x).bandwidth == pytest.approx(4 * fit_kernel(x).bandwidth)


def test_kernel_bandwidth_uses_iqr_for_heavy_tails():
    x = np.concatenate([np.linspace(-1, 1, 50), [-1e3, 1e3]])
    q1, q3 = np.quantile(x, [0.25, 0.75])
    assert fit_kernel(x).bandwidth == pytest.approx(0.9 * (q3 - q1) / 1.34 * x.size ** -0.2)


def test_kernel_sample_sorted_and_validated():
    m = KernelMargin([3.0, 1.0, 2.0], 0.5)
    np.testing.assert_array_equal(m.sample, [1, 2, 3])
    with pytest.raises(ValueError):
        KernelMargin([1.0, 2.0], 0.0)
    with pytest.raises(ValueError):
        NormalMargin(0.0, -1.0)


def test_cdf_examples():
    assert NormalMargin(0.0, 1.0).cdf(0.0) == 0.5
    k = fit_kernel(normal_like())
    assert k.cdf(0.0) == pytest.approx(0.5, abs=1e-12)


def test_kernel_cdf_matches_direct_sum():
    rng = np.random.default_rng(1)
    k = fit_kernel(rng.gamma(2.0, size=37))
    for t in np.linspace(-2, 12, 15):
        direct = sum(special.ndtr((t - y) / k.bandwidth) for y in k.sample) / k.sample.size
        assert k.cdf(t) == pytest.approx(direct, abs=1e-12)


def test_quantile_examples():
    assert NormalMargin(3.0, 4.0).quantile(0.5) == 3.0
    assert KernelMargin([-1.0, 1.0], 0.7).quantile(0.5) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        NormalMargin(0, 1).quantile(1.0)


@pytest.mark.parametrize("n_queries", [5, 50_000])
def test_kernel_quantile_round_trip(n_queries):
    # the small batch uses direct Newton, the large batch the interpolated grid
    rng = np.random.default_rng(2)
    k = fit_kernel(rng.standard_t(3, size=80))
    x = np.linspace(k.sample[0], k.sample[-1], n_queries)
    np.testing.assert_allclose(k.quantile(k.cdf(x)), x, atol=1e-7)
    u = rng.uniform(1e-9, 1 - 1e-9, n_queries)
    np.testing.assert_allclose(k.cdf(k.quantile(u)), u, atol=1e-9)


def test_kernel_tail_limits():
    k = fit_kernel(normal_like(30))
    lo, hi = k.support
    assert k.cdf(lo) < 1e-20 and k.cdf(hi) > 1 - 1e-15


@settings(max_examples=50, deadline=None)
@given(samples, st.sampled_from(["normal", "kernel"]))
def test_cdf_monotone_and_round_trip(sample, kind):
    m = fit_margin(kind, sample)
    lo, hi = min(sample) - 5, max(sample) + 5
    assert np.all(np.diff(m.cdf(np.linspace(lo, hi, 1000))) >= 0)
    x = np.linspace(min(sample), max(sample), 7)
    u = m.cdf(x)
    inner = (u > 1e-12) & (u < 1 - 1e-12)
    q = m.quantile(u[inner])
    np.testing.assert_allclose(m.cdf(q), u[inner], atol=1e-9)
    # in x the round trip is only well conditioned where the density is not tiny
    scale = max(1.0, np.ptp(sample))
    steep = m.pdf(x[inner]) * scale > 1e-3
    np.testing.assert_allclose(q[steep], x[inner][steep], atol=1e-7 * scale)


def test_fit_margin_unknown_kind():
    with pytest.raises(ValueError):
        fit_margin("beta", [1.0, 2.0])
