import math

import numpy as np
import pytest

from app.services.gaussian_field import (
    NoiseSeed,
    as_generator,
    complex_gaussians,
    covariance_kernel,
    covariance_kernel_direct,
    kernel_bound_check,
    kernel_bound_study,
    kernel_parseval,
    sample_mu_eps,
    sample_mu_eps_array,
    torus_distance,
)
from app.services.spectral_core import local_amplitude, to_grid_array


class TestNoiseSeed:
    def test_same_key_same_stream(self):
        a = NoiseSeed(7, 3).generator().standard_normal(5)
        b = NoiseSeed(7, 3).generator().standard_normal(5)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = NoiseSeed(7, 0).generator().standard_normal(5)
        b = NoiseSeed(7, 1).generator().standard_normal(5)
        assert not np.array_equal(a, b)

    def test_seed_is_masked_to_u64(self):
        assert NoiseSeed(2**64 + 5).seed == 5
        assert NoiseSeed(-1).seed == 2**64 - 1

    def test_child_keeps_master(self):
        child = NoiseSeed(11, 0).child(4)
        assert (child.seed, child.stream) == (11, 4)

    def test_as_generator_accepts_int(self):
        assert np.array_equal(as_generator(9).random(3), NoiseSeed(9).generator().random(3))


class TestMuEps:
    def test_moments(self, rng):
        samples = sample_mu_eps_array(4, rng, size=200_000)
        second = np.mean(np.abs(samples) ** 2, axis=0)
        fourth = np.mean(np.abs(samples) ** 4, axis=0)
        square = np.mean(samples**2, axis=0)
        assert np.allclose(second, 1.0, atol=0.02)
        assert np.allclose(fourth, 2.0, atol=0.06)
        assert np.all(np.abs(square) < 0.02)

    def test_variance_factor(self, rng):
        z = complex_gaussians(rng, (100_000,), 0.25)
        assert np.mean(np.abs(z) ** 2) == pytest.approx(0.25, rel=0.02)
        assert np.mean(z.real**2) == pytest.approx(np.mean(z.imag**2), rel=0.05)

    def test_pointwise_field_is_standard_gaussian(self, rng):
        N = 16
        rows = sample_mu_eps_array(N, rng, size=20_000)
        values = to_grid_array(local_amplitude(N) * rows, 64)
        assert np.var(values) == pytest.approx(1.0, rel=0.04)

    def test_sample_is_field(self):
        field = sample_mu_eps(8, NoiseSeed(1))
        assert field.N == 8


class TestKernel:
    def test_closed_form_matches_direct_sum(self, rng):
        for M in (16, 64, 512):
            x = rng.uniform(-math.pi, math.pi, size=1000)
            assert np.max(np.abs(covariance_kernel(M, x) - covariance_kernel_direct(M, x))) <= 1e-9

    def test_value_at_zero(self):
        assert covariance_kernel(10, 0.0) == pytest.approx(20.0)
        assert covariance_kernel(10, 2.0 * math.pi) == pytest.approx(20.0)
        assert covariance_kernel(10, 1e-9) == pytest.approx(20.0)

    def test_scalar_in_scalar_out(self):
        assert isinstance(covariance_kernel(4, 0.3), float)

    def test_parseval_value(self):
        for M in (16, 128, 512):
            check = kernel_parseval(M)
            assert check.exact == pytest.approx((2.0 * math.pi) ** 2 * 2 * M)
            assert check.rel_error <= 1e-8

    def test_torus_distance(self):
        assert torus_distance(2.0 * math.pi - 0.1) == pytest.approx(0.1)
        assert torus_distance(-0.3) == pytest.approx(0.3)

    def test_bound_check(self):
        report = kernel_bound_check(32)
        assert report.within_triangle_bound
        assert report.fitted_C >= 2.0
        assert report.parseval_ratio == pytest.approx(1.0, abs=1e-8)

    def test_fitted_constant_is_stable_in_M(self):
        study = kernel_bound_study((16, 32, 64, 128))
        assert study.stable
        assert all(2.0 <= r.fitted_C <= 2.0 * math.pi + 1e-9 for r in study.reports)
