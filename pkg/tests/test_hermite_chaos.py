import math

import numpy as np
import pytest

from app.errors import ChaosError
from app.services.gaussian_field import sample_mu_eps, sample_mu_eps_array
from app.services.hermite_chaos import (
    ChaosFunctional,
    canonical_key,
    chaos_expand,
    evaluate,
    evaluate_real,
    gaussian_expectation,
    gradient_energy,
    hermite,
    hermite_coeffs,
    hermite_polynomial,
    hermite_table,
    key_weight,
    lp_block_bound,
    lp_block_bound_study,
    lp_block_range,
    lp_block_variance,
    negate_key,
    psi,
    second_moment,
    tilt_derivative_check,
    wick_power,
)
from app.services.spectral_core import (
    FourierMode,
    apply_pointwise,
    cos_mode,
    dealiased_grid_size,
    full_spectrum,
    local_amplitude,
)

X2 = [0.0, 0.0, 1.0]
X3 = [0.0, 0.0, 0.0, 1.0]
X4_MINUS_3X2 = [0.0, 0.0, -3.0, 0.0, 1.0]


class TestHermitePolynomials:
    def test_low_orders(self):
        x = np.linspace(-3, 3, 13)
        assert np.allclose(hermite(0, x), 1.0)
        assert np.allclose(hermite(2, x), x**2 - 1)
        assert np.allclose(hermite(3, x), x**3 - 3 * x)
        assert np.allclose(hermite(4, x), x**4 - 6 * x**2 + 3)

    def test_table_matches_recursion(self):
        x = np.linspace(-2, 2, 7)
        table = hermite_table(6, x)
        for n in range(7):
            assert np.allclose(table[n], hermite(n, x))

    def test_polynomial_form(self):
        assert np.allclose(hermite_polynomial(3).coef, [0.0, -3.0, 0.0, 1.0])

    def test_negative_order(self):
        with pytest.raises(ChaosError):
            hermite(-1, 0.0)

    def test_orthogonality(self):
        for m in range(5):
            for n in range(5):
                value = gaussian_expectation(lambda x: hermite(m, x) * hermite(n, x))
                expected = math.factorial(n) if m == n else 0.0
                assert value == pytest.approx(expected, abs=1e-10)


class TestHermiteCoeffs:
    @pytest.mark.parametrize(
        "G, expected",
        [
            (X2, [1.0, 0.0, 1.0]),
            (X3, [0.0, 3.0, 0.0, 1.0]),
            (X4_MINUS_3X2, [0.0, 0.0, 3.0, 0.0, 1.0]),
        ],
    )
    def test_monomials(self, G, expected):
        spectrum = hermite_coeffs(G)
        assert spectrum.nmax == len(expected) - 1
        assert np.allclose(spectrum.c, expected, atol=1e-12)

    def test_exact_zeros_above_degree(self):
        spectrum = hermite_coeffs(X2, nmax=6)
        assert all(spectrum.coefficient(n) == 0.0 for n in range(3, 7))
        assert spectrum.coefficient(40) == 0.0

    def test_odd_part_is_exactly_zero(self):
        spectrum = hermite_coeffs([1.0, 0.0, 2.0, 0.0, 0.5])
        assert spectrum.coefficient(1) == 0.0
        assert spectrum.coefficient(3) == 0.0

    def test_bessel_identity_for_polynomials(self):
        spectrum = hermite_coeffs(X4_MINUS_3X2)
        # E[(U⁴ − 3U²)²] = 105 − 90 + 27
        assert spectrum.second_moment == pytest.approx(42.0)
        assert spectrum.bessel_sum() == pytest.approx(42.0)
        assert spectrum.tail == pytest.approx(0.0, abs=1e-9)

    def test_callable_needs_nmax(self):
        with pytest.raises(ChaosError) as exc:
            hermite_coeffs(np.cos)
        assert exc.value.code == "nmax_required"

    def test_cosine_spectrum(self):
        spectrum = hermite_coeffs(np.cos, nmax=6)
        damp = math.exp(-0.5)
        assert spectrum.converged
        assert spectrum.coefficient(0) == pytest.approx(damp, abs=1e-12)
        assert spectrum.coefficient(2) == pytest.approx(-damp / 2, abs=1e-12)
        assert spectrum.coefficient(4) == pytest.approx(damp / 24, abs=1e-12)
        assert spectrum.coefficient(3) == pytest.approx(0.0, abs=1e-14)

    def test_empty_polynomial(self):
        with pytest.raises(ChaosError):
            hermite_coeffs([])

    def test_gradient_identity(self):
        for G in (X2, X3, X4_MINUS_3X2, [0.3, -1.0, 0.7, 0.2]):
            assert hermite_coeffs(G).gradient_sum() == pytest.approx(gradient_energy(G), rel=1e-10)

    def test_psi(self):
        assert psi(X2, 0.7) == pytest.approx(0.49 + 1.0)
        assert psi(X4_MINUS_3X2, 0.5) == pytest.approx(0.5**4 + 3 * 0.25)

    @pytest.mark.parametrize("n", range(5))
    def test_tilt_derivatives(self, n):
        assert tilt_derivative_check(X4_MINUS_3X2, n).passed

    def test_tilt_order_limit(self):
        with pytest.raises(ChaosError):
            tilt_derivative_check(X2, 5)


class TestChaosFunctional:
    def test_keys(self):
        assert canonical_key([3, -1, 3]) == ((-1, 1), (3, 2))
        assert negate_key(((-1, 1), (3, 2))) == ((-3, 2), (1, 1))
        assert key_weight(((-1, 1), (3, 2))) == 2

    def test_mode_outside_rejected(self):
        with pytest.raises(ChaosError):
            ChaosFunctional.monomial(2, [3])
        with pytest.raises(ChaosError):
            ChaosFunctional.monomial(2, [0])

    def test_zero_terms_dropped(self):
        phi = ChaosFunctional(3, {((1, 1),): 0.0, ((2, 1),): 1.0})
        assert phi.term_count == 1

    def test_arithmetic(self):
        a = ChaosFunctional.monomial(3, [1, -1], 2.0)
        b = ChaosFunctional.monomial(3, [1, -1], 0.5)
        assert (a - b).terms[canonical_key([1, -1])] == 1.5
        assert (a - a).term_count == 0

    def test_wick_square_of_mode_pair(self):
        # ⟦η_1 η_{−1}⟧ = |η_1|² − 1
        phi = ChaosFunctional.monomial(1, [1, -1])
        eta = sample_mu_eps(1, 5)
        assert evaluate(phi, eta) == pytest.approx(abs(eta.coeffs[0]) ** 2 - 1.0)

    def test_wick_power_is_hermite(self):
        # ‖cos(x)/√π‖ = 1, поэтому ⟦⟨η, φ⟩^n⟧ = H_n(⟨η, φ⟩)
        N = 3
        phi = cos_mode(N, 1)
        eta = sample_mu_eps(N, 11)
        y = evaluate(ChaosFunctional.linear(N, phi), eta)
        assert abs(y.imag) < 1e-12
        for n in range(5):
            assert evaluate(wick_power(N, phi, n), eta) == pytest.approx(hermite(n, y.real), abs=1e-10)

    def test_linear_functional_is_real(self):
        assert ChaosFunctional.linear(4, cos_mode(4, 2)).is_real()

    def test_second_moment_monte_carlo(self, rng):
        phi = ChaosFunctional(2, {canonical_key([1, 1]): 1.0, canonical_key([1, -2]): 0.5j})
        rows = sample_mu_eps_array(2, rng, size=40_000)
        values = np.array([evaluate(phi, full_spectrum(row)) for row in rows])
        assert second_moment(phi) == pytest.approx(2.0 + 0.25)
        assert np.mean(np.abs(values) ** 2) == pytest.approx(2.25, rel=0.05)
        assert abs(np.mean(values)) < 0.05

    def test_real_functional_evaluates_to_float(self, rng):
        phi = chaos_expand(X3, 4, cos_mode(4, 1))
        for _ in range(5):
            eta = sample_mu_eps(4, rng)
            value = evaluate(phi, eta)
            assert abs(value.imag) < 1e-10
            real = evaluate_real(phi, eta)
            assert isinstance(real, float)
            assert real == value.real

    def test_evaluate_real_rejects_mode_projection(self):
        phi = chaos_expand(X2, 4, FourierMode(-1))
        assert not phi.is_real()
        with pytest.raises(ChaosError):
            evaluate_real(phi, sample_mu_eps(4, 3))

    def test_evaluate_checks_shape(self):
        phi = ChaosFunctional.monomial(3, [1])
        with pytest.raises(ChaosError):
            evaluate(phi, np.zeros(5))
        with pytest.raises(ChaosError):
            evaluate(phi, sample_mu_eps(2, 1))


class TestChaosExpand:
    @pytest.mark.parametrize("G", [X2, X3, X4_MINUS_3X2])
    @pytest.mark.parametrize("ell", [1, 2])
    def test_matches_pointwise_grid(self, G, ell, rng):
        N = 4
        phi = chaos_expand(G, N, FourierMode(-ell))
        c0 = hermite_coeffs(G).coefficient(0)
        grid = dealiased_grid_size(N, len(G) - 1)
        for row in sample_mu_eps_array(N, rng, size=5):
            modes = apply_pointwise(
                local_amplitude(N) * row,
                lambda y: np.polynomial.Polynomial(G)(y) - c0,
                grid,
                N,
            )
            assert abs(evaluate(phi, full_spectrum(row)) - modes[ell - 1]) <= 1e-8

    def test_sum_of_modes_matches_target(self):
        phi = chaos_expand(X2, 5, FourierMode(-3))
        for key in phi.terms:
            assert sum(k * m for k, m in key) == 3

    def test_conjugate_test_function(self):
        plus = chaos_expand(X3, 4, FourierMode(-2))
        minus = chaos_expand(X3, 4, FourierMode(2))
        for key, coef in plus.terms.items():
            assert minus.terms[negate_key(key)] == pytest.approx(np.conj(coef))

    def test_term_budget(self):
        with pytest.raises(ChaosError) as exc:
            chaos_expand(X4_MINUS_3X2, 16, FourierMode(-1), term_budget=10)
        assert exc.value.code == "term_budget"

    def test_lp_block_variance_sums_to_total(self):
        N = 4
        total = sum(lp_block_variance(X2, N, q) for q in range(-1, 4))
        # E‖Π(u² − 1)‖² по модам 1..2N
        direct = sum(
            second_moment(chaos_expand(X2, N, FourierMode(s * ell)))
            for ell in range(1, 2 * N + 1)
            for s in (1, -1)
        )
        assert total == pytest.approx(direct, rel=1e-12)
        assert lp_block_variance(X2, N, 0) == 0.0


class TestLPBlockBound:
    def test_block_range(self):
        assert lp_block_range(X2, 8) == [-1, 1, 2, 3, 4]
        assert lp_block_range(X3, 4) == [-1, 1, 2, 3]

    @pytest.mark.parametrize("N", [8, 16])
    def test_lowest_block_sets_the_constant(self, N):
        # E|Δ_{−1}Φ|² = 4π(N−1)/N², граница ε/2 = 1/(4N)
        bound = lp_block_bound(X2, N)
        assert bound.ratios[-1] == pytest.approx(16.0 * math.pi * (N - 1) / N, rel=1e-9)
        assert max(bound.ratios, key=bound.ratios.get) == -1
        assert bound.constant == bound.ratios[-1]

    def test_constant_is_uniform_in_N(self):
        study = lp_block_bound_study(X2, (8, 16, 32))
        assert study.stable
        assert study.C == pytest.approx(15.5 * math.pi, rel=1e-9)
        assert study.C_spread == pytest.approx(15.5 / 14.0, rel=1e-9)

    def test_spread_limit_is_enforced(self):
        study = lp_block_bound_study(X2, (2, 32), max_spread=1.05)
        # 16π·1/2 против 16π·31/32
        assert study.C_spread == pytest.approx(31.0 / 16.0, rel=1e-9)
        assert not study.stable
