import math

import numpy as np
import pytest

from app.errors import AnalysisError, BlowupError
from app.services.bg_analysis import (
    VARIANT_A,
    VARIANT_B,
    GRIDS,
    ScalingGrid,
    antisymmetric_qv_report,
    bg_bound,
    bg_residual_value,
    bg_residual_variance,
    bg_scaling_study,
    burgers_integral,
    burgers_study,
    functional_path,
    ito_sup_value,
    ito_trick_check,
    martingale_qv_report,
    negative_norm_value,
    quadratic_variation,
    residual_path,
    richardson_stationarity,
    square_mode_path,
    stationarity_ensemble,
    stationarity_report,
    stationarity_times,
    time_average_study,
    time_average_value,
    time_index,
    window_second_moments,
)
from app.services.gaussian_field import sample_mu_eps_array
from app.services.sde_simulator import SimConfig, simulate, time_reverse
from app.services.spectral_core import local_amplitude

X2 = (0.0, 0.0, 1.0)


@pytest.fixture(scope="module")
def burgers_traj():
    return simulate(SimConfig(N=8, T=0.25, F=X2, seed=4))


class TestHelpers:
    def test_time_index(self, burgers_traj):
        assert time_index(burgers_traj, 0.0) == 0
        assert time_index(burgers_traj, 0.25) == burgers_traj.records - 1
        with pytest.raises(AnalysisError) as exc:
            time_index(burgers_traj, 0.5)
        assert exc.value.code == "time_outside"

    def test_stationarity_times(self):
        assert stationarity_times(101) == [33, 66, 100]
        assert stationarity_times(2) == [1]


class TestStationarity:
    def test_exact_measure_passes(self, rng):
        samples = sample_mu_eps_array(3, rng, size=3 * 400).reshape(400, 3, 3)
        reports = stationarity_report(samples, times=[0.1, 0.2, 0.3])
        assert all(r.passed for r in reports)
        names = {r.name for r in reports}
        assert {"stationarity_second", "stationarity_fourth", "stationarity_mixed_re"} <= names
        assert reports[0].threshold > 4.0

    def test_wrong_variance_is_caught(self, rng):
        samples = math.sqrt(1.5) * sample_mu_eps_array(2, rng, size=2000).reshape(1000, 2, 2)
        reports = stationarity_report(samples, cross=False)
        assert not all(r.passed for r in reports if r.name == "stationarity_second")

    def test_small_ensemble(self, rng):
        with pytest.raises(AnalysisError) as exc:
            stationarity_report(sample_mu_eps_array(2, rng, size=50).reshape(50, 1, 2))
        assert exc.value.code == "ensemble_too_small"

    def test_shape(self):
        with pytest.raises(AnalysisError):
            stationarity_report(np.zeros((200, 4)))

    def test_richardson_exact_samples(self, rng):
        coarse = sample_mu_eps_array(2, rng, size=400).reshape(200, 1, 2)
        fine = sample_mu_eps_array(2, rng, size=400).reshape(200, 1, 2)
        assert all(r.passed for r in richardson_stationarity(coarse, fine))

    @pytest.mark.slow
    def test_ou_ensemble_is_stationary(self):
        config = SimConfig(N=4, T=0.25, F=(0.0,), seed=1, record_drift=False, record_noise=False)
        samples, times = stationarity_ensemble(config, 200)
        assert samples.shape == (200, 3, 4)
        assert times[-1] == pytest.approx(0.25)
        assert all(r.passed for r in stationarity_report(samples, times))


class TestQuadraticVariation:
    def test_smooth_path_scales_linearly(self):
        dt = 1.0 / 1024
        t = dt * np.arange(1025)
        fit = quadratic_variation(t * (1 + 1j), dt)
        assert fit.exponent == pytest.approx(1.0)
        assert fit.metadata["finest"] == pytest.approx(2.0 * dt)

    def test_brownian_path_is_flat(self, rng):
        dt = 1e-4
        path = np.concatenate([[0.0], np.cumsum(rng.standard_normal(8192) * math.sqrt(dt))])
        fit = quadratic_variation(path, dt)
        assert abs(fit.exponent) < 0.1
        assert fit.metadata["finest"] == pytest.approx(8192 * dt, rel=0.05)

    def test_zero_path(self):
        fit = quadratic_variation(np.zeros(64), 0.1)
        assert fit.exponent == math.inf

    def test_levels(self):
        with pytest.raises(AnalysisError):
            quadratic_variation(np.zeros(64), 0.1, levels=3)
        with pytest.raises(AnalysisError):
            quadratic_variation(np.zeros(5), 0.1)

    def test_martingale_and_antisymmetric_parts(self):
        traj = simulate(SimConfig(N=16, T=1.0, F=X2, dt=1e-4, seed=3, record_noise=False))
        assert martingale_qv_report(traj, 1).passed
        assert antisymmetric_qv_report(traj, 1).passed


class TestBurgers:
    def test_square_of_single_mode(self):
        c = 0.3 - 0.4j
        states = np.zeros((2, 4), dtype=np.complex128)
        states[:, 0] = c
        path = square_mode_path(states, 1, 2)
        assert np.allclose(path, c * c / math.sqrt(2 * math.pi), atol=1e-14)
        assert np.allclose(square_mode_path(states, 1, -2), np.conj(path))
        assert np.all(square_mode_path(states, 1, 3) == 0)

    def test_cutoff_check(self, burgers_traj):
        with pytest.raises(AnalysisError) as exc:
            burgers_integral(burgers_traj, 16, 1)
        assert exc.value.code == "cutoff_too_large"

    def test_integral_starts_at_zero(self, burgers_traj):
        path = burgers_integral(burgers_traj, 4, 1)
        assert path[0] == 0
        assert path.shape == (burgers_traj.records,)

    @pytest.mark.slow
    def test_study_structure(self):
        study = burgers_study(Ms=(2, 4, 8, 16), N=32, t=0.125, ensemble=10, seed=2)
        assert len(study.reports) == 8
        assert [g.name for g in study.gates] == ["burgers_increment_C_max", "burgers_cauchy_trend"]
        assert all(r.estimate > 0 for r in study.reports)


class TestBoltzmannGibbs:
    def test_variant_b_vanishes_for_quadratic_flux(self, burgers_traj):
        residual = residual_path(burgers_traj, 1, burgers_traj.N, VARIANT_B)
        assert np.max(np.abs(residual)) < 1e-9

    def test_variant_a_vanishes_for_linear_flux(self):
        traj = simulate(SimConfig(N=8, T=0.05, F=(0.0, 2.0), seed=6))
        residual = residual_path(traj, 2, traj.N, VARIANT_A)
        assert np.max(np.abs(residual)) < 1e-9

    def test_variant_b_removes_transport_and_square(self):
        traj = simulate(SimConfig(N=8, T=0.05, F=(0.0, 1.0, 1.0), seed=6))
        residual = residual_path(traj, 2, traj.N, VARIANT_B)
        assert np.max(np.abs(residual)) < 1e-9

    def test_reversed_residual_uses_reversed_drift(self, burgers_traj):
        forward = residual_path(burgers_traj, 1, 8, VARIANT_A)
        backward = residual_path(time_reverse(burgers_traj), 1, 8, VARIANT_A)
        assert np.allclose(backward, -forward[::-1], atol=1e-12)

    def test_variant_a_is_drift_for_even_flux(self, burgers_traj):
        residual = residual_path(burgers_traj, 1, 8, VARIANT_A)
        assert np.allclose(residual[:-1], burgers_traj.drift[:, 0])

    def test_bad_variant_and_interval(self, burgers_traj):
        with pytest.raises(AnalysisError):
            residual_path(burgers_traj, 1, 8, "C")
        with pytest.raises(AnalysisError):
            bg_residual_value(burgers_traj, 1, 0.2, 0.1, 8, VARIANT_A)

    def test_bound(self):
        assert bg_bound(X2, 16, 2, 0.25, 4, VARIANT_A) == pytest.approx(0.125 * 4 * 4.0)
        expected = 0.25 * 4 * (0.25 + math.log(16) ** 2 / 32) * 4.0
        assert bg_bound(X2, 16, 2, 0.25, 4, VARIANT_B) == pytest.approx(expected)

    def test_variance_from_values(self):
        report = bg_residual_variance([1.0, 1j, -1.0, 2.0], 1, 0.0, 0.25, 4, VARIANT_A, F=X2, N=16)
        assert report.estimate == pytest.approx(7.0 / 4.0)
        assert report.metadata["C"] == pytest.approx(report.estimate / report.threshold)
        with pytest.raises(AnalysisError) as exc:
            bg_residual_variance([1.0, 2.0], 1, 0.0, 0.25, 4, VARIANT_A)
        assert exc.value.code == "missing_records"

    def test_variance_from_trajectories(self, burgers_traj):
        report = bg_residual_variance([burgers_traj, burgers_traj], 1, 0.0, 0.125, 8, VARIANT_A)
        assert report.metadata["N"] == 8
        assert report.mc_stderr == 0.0

    def test_blown_trajectory_rejected(self):
        blown = simulate(SimConfig(N=4, T=0.05, F=X2, blowup_threshold=1e-3))
        with pytest.raises(BlowupError):
            bg_residual_value(blown, 1, 0.0, 0.01, 4, VARIANT_A)

    def test_window_second_moments(self):
        path = np.ones(5, dtype=np.complex128)
        assert window_second_moments(path, 0.5, 2) == pytest.approx(1.0)
        ramp = np.arange(5, dtype=np.float64)
        # интегралы по окнам [0, 1] и [1, 2]: 1 и 3
        assert window_second_moments(ramp, 0.5, 2) == pytest.approx((1.0**2 + 3.0**2) / 2.0)
        with pytest.raises(AnalysisError):
            window_second_moments(path, 0.5, 0)
        with pytest.raises(AnalysisError):
            window_second_moments(path, 0.5, 8)

    def test_grids(self):
        small = GRIDS["small"]
        assert small.lags[0] == 2.0**-8
        assert small.lags[-1] == 2.0**-4
        assert small.ensemble == 64
        assert small.ells == (1, 2)
        assert small.T == 0.5
        assert GRIDS["full"].Ns == (16, 32, 64)
        assert GRIDS["full"].ensemble == 200

    @pytest.mark.slow
    def test_scaling_study_structure(self):
        grid = ScalingGrid(Ns=(8, 16), lags=GRIDS["small"].lags, Ms=(1, 2, 4, 8), lag_B=0.25, ensemble=8)
        study = bg_scaling_study(grid, seed=3)
        assert len(study.fits) == 4
        assert len(study.reports) == 2 * 2 * (5 + 4)
        assert all("C_M" in r.metadata for r in study.reports if r.name == "bg_residual_B")
        assert [g.name for g in study.gates][-3:] == [
            "bg_A_constant_spread",
            "bg_B_constant_spread",
            "bg_A_ratio_trend",
        ]

    @pytest.mark.slow
    def test_small_grid_gates_pass(self):
        study = bg_scaling_study("small", seed=0, threads=2)
        assert [g.name for g in study.gates if not g.passed] == []
        assert study.passed

    @pytest.mark.slow
    def test_wrong_quadratic_coefficient_fails(self):
        grid = ScalingGrid(Ns=(16,), lags=GRIDS["small"].lags, Ms=(1, 2, 4, 8), lag_B=0.25, ensemble=16)
        study = bg_scaling_study(grid, seed=0, threads=2, c2_override=0.0)
        failed = {g.name for g in study.gates if not g.passed}
        assert "bg_B_constant_spread" in failed
        assert not study.passed
        spread = next(g for g in study.gates if g.name == "bg_B_constant_spread")
        # остаток B не зависит от M, поэтому C_M растёт ровно как M
        assert spread.estimate >= 8.0 * (1 - 1e-9)


class TestTimeAverages:
    def test_constant_functional(self, burgers_traj):
        assert time_average_value(burgers_traj, [1.0], 0.125) == pytest.approx(0.0, abs=1e-12)
        assert negative_norm_value(burgers_traj, [1.0], 0.125) == pytest.approx(0.0, abs=1e-12)

    def test_study_shape(self):
        study = time_average_study(X2, Ns=(4, 8), t=1.0 / 32, ensemble=3, seed=1)
        assert [r.metadata["N"] for r in study.reports] == [4, 8]
        assert study.trend.name == "time_average_trend"

    def test_functional_path_of_identity(self, burgers_traj):
        path = functional_path(burgers_traj, [0.0, 1.0], 2)
        assert np.allclose(path, local_amplitude(8) * burgers_traj.mode_path(2), atol=1e-12)

    def test_ito_sup_value(self, burgers_traj):
        assert ito_sup_value(burgers_traj, X2, 1) >= 0.0

    @pytest.mark.slow
    def test_ito_trick_constant_is_bounded(self):
        report = ito_trick_check(X2, 4, 1, 0.5, ensemble=40, seed=5)
        assert report.passed
        assert report.metadata["energy"] > 0
