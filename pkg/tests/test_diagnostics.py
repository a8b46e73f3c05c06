"""ACF / ESS / summary tests with closed-form chains as oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besov_rto.diagnostics import (
    DegenerateChainError,
    InsufficientSamplesError,
    acf,
    ess,
    summarize,
)


class _FakeResult:
    def __init__(self, f_samples, n_accepted=None, acceptance_rate=0.5, wall_time=1.0):
        self.f_samples = np.asarray(f_samples, dtype=np.float64)
        self.n_accepted = self.f_samples.shape[0] if n_accepted is None else n_accepted
        self.acceptance_rate = acceptance_rate
        self.wall_time = wall_time


class TestAcf:
    def test_lag_zero_is_one(self):
        chain = np.random.default_rng(0).standard_normal(500)
        assert acf(chain, 10)[0] == 1.0

    def test_alternating_chain(self):
        chain = np.tile([1.0, -1.0], 100)
        rho = acf(chain, 5)
        assert rho[1] == pytest.approx(-1.0, abs=0.02)

    def test_iid_chain_white(self):
        n = 10_000
        chain = np.random.default_rng(1).standard_normal(n)
        rho = acf(chain, 200)
        frac_small = np.mean(np.abs(rho[1:]) < 3 / np.sqrt(n))
        assert frac_small > 0.97

    def test_constant_chain_degenerate(self):
        with pytest.raises(DegenerateChainError):
            acf(np.full(100, 3.3), 5)

    def test_too_short(self):
        with pytest.raises(ValueError):
            acf(np.arange(5.0), 2)

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(64)
        rho = acf(x, 8)
        xc = x - x.mean()
        for t in range(9):
            direct = np.dot(xc[: 64 - t], xc[t:]) / 64
            assert rho[t] == pytest.approx(direct / (np.dot(xc, xc) / 64), abs=1e-12)


class TestEss:
    def test_iid_chain(self):
        chain = np.random.default_rng(2).standard_normal(10_000)
        assert 0.8 <= ess(chain) / 10_000 <= 1.2

    def test_ar1_closed_form(self):
        # AR(1) with coefficient rho has ESS/N = (1-rho)/(1+rho) = 1/3
        rng = np.random.default_rng(3)
        n, rho = 100_000, 0.5
        eps = rng.standard_normal(n) * np.sqrt(1 - rho**2)
        chain = np.empty(n)
        chain[0] = rng.standard_normal()
        for i in range(1, n):
            chain[i] = rho * chain[i - 1] + eps[i]
        assert ess(chain) / n == pytest.approx(1.0 / 3.0, rel=0.15)

    def test_two_identical_iid_chains(self):
        chain = np.random.default_rng(5).standard_normal(5000)
        two = np.stack([chain, chain])
        assert ess(two) == pytest.approx(2 * 5000, rel=0.2)

    @settings(max_examples=20, deadline=None)
    @given(
        a=st.floats(-10, 10, allow_nan=False).filter(lambda v: abs(v) > 1e-3),
        b=st.floats(-10, 10, allow_nan=False),
        seed=st.integers(0, 2**31),
    )
    def test_affine_invariance(self, a, b, seed):
        # scale/shift free up to float rounding in the FFT autocovariance
        chain = np.random.default_rng(seed).standard_normal(400)
        assert ess(a * chain + b) == pytest.approx(ess(chain), rel=1e-9)

    def test_anticorrelated_clamped(self):
        chain = np.tile([1.0, -1.0], 500) + 1e-6 * np.random.default_rng(0).standard_normal(1000)
        value = ess(chain)
        assert np.isfinite(value) and value > 0

    def test_degenerate_propagates(self):
        with pytest.raises(DegenerateChainError):
            ess(np.ones(100))


class TestSummarize:
    def test_constant_samples(self):
        c = np.array([1.0, -2.0, 0.5])
        stats = summarize(_FakeResult(np.tile(c, (200, 1))))
        np.testing.assert_array_equal(stats.mean, c)
        np.testing.assert_array_equal(stats.ci_upper - stats.ci_lower, 0.0)
        assert np.all(np.isnan(stats.ess_per_coordinate))  # degenerate-flagged

    def test_iid_normal_ci_width(self):
        rng = np.random.default_rng(6)
        samples = rng.standard_normal((10_000, 5))
        stats = summarize(_FakeResult(samples))
        width = stats.ci_upper - stats.ci_lower
        np.testing.assert_allclose(width, 3.92, rtol=0.05)

    def test_ess_order_statistics(self):
        rng = np.random.default_rng(7)
        stats = summarize(_FakeResult(rng.standard_normal((2000, 8))))
        assert stats.ess_min <= stats.ess_median <= stats.ess_max

    def test_insufficient_samples(self):
        samples = np.random.default_rng(8).standard_normal((200, 3))
        with pytest.raises(InsufficientSamplesError):
            summarize(_FakeResult(samples, n_accepted=40))

    def test_permutation_leaves_mean_and_quantiles(self):
        rng = np.random.default_rng(9)
        samples = rng.standard_normal((500, 4))
        a = summarize(_FakeResult(samples))
        b = summarize(_FakeResult(samples[rng.permutation(500)]))
        # quantiles sort, so they are exactly permutation invariant; the
        # mean only up to summation order
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-13)
        np.testing.assert_array_equal(a.ci_lower, b.ci_lower)
        np.testing.assert_array_equal(a.ci_upper, b.ci_upper)

    def test_wider_level_widens_intervals(self):
        rng = np.random.default_rng(10)
        samples = rng.standard_normal((2000, 3))
        narrow = summarize(_FakeResult(samples), ci_level=0.9)
        wide = summarize(_FakeResult(samples), ci_level=0.99)
        assert np.all(wide.ci_upper - wide.ci_lower > narrow.ci_upper - narrow.ci_lower)
