"""Наборы проверок для ``verify``: каждый возвращает список отчётов и фитов.

Сетка ``small`` укладывается в минуты на ноутбуке, ``full`` — прогон с
приёмочными размерами ансамблей.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from app.errors import AnalysisError
from app.services import bg_analysis
from app.services.chaos_generator import (
    apply_generator,
    eigenvalue,
    generator_rate_check,
    ou_flow_check,
    semigroup_representation,
    solve_poisson,
)
from app.services.gaussian_field import (
    NoiseSeed,
    covariance_kernel,
    covariance_kernel_direct,
    kernel_bound_study,
    sample_mu_eps,
    sample_mu_eps_array,
)
from app.services.hermite_chaos import (
    ChaosFunctional,
    canonical_key,
    chaos_expand,
    evaluate,
    gradient_energy,
    hermite_coeffs,
    hermite_polynomial,
    lp_block_bound_study,
    tilt_derivative_check,
)
from app.services.sde_simulator import (
    SimConfig,
    antisymmetry_check,
    decompose,
    divergence_check,
    generator_antisymmetry_check,
    linear_coefficient,
    quadratic_coefficient,
    simulate,
)
from app.services.spectral_core import (
    FourierMode,
    apply_pointwise,
    cos_mode,
    dealiased_grid_size,
    full_spectrum,
    local_amplitude,
)
from app.services.stats import ScalingFit, StatReport, flag_gate, tolerance_gate

logger = logging.getLogger(__name__)

GRID_CHOICES = ("small", "full")

X2 = (0.0, 0.0, 1.0)
X3 = (0.0, 0.0, 0.0, 1.0)
X4_MINUS_3X2 = (0.0, 0.0, -3.0, 0.0, 1.0)


@dataclass
class SuiteResult:
    suite: str
    reports: List[StatReport] = field(default_factory=list)
    fits: List[ScalingFit] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return NoiseSeed(seed, stream).generator()


def random_functional(rng: np.random.Generator, N: int, max_order: int, terms: int = 4) -> ChaosFunctional:
    """Случайный Φ без константы: до ``terms`` мономов порядка 1..max_order."""
    out: Dict[tuple, complex] = {}
    for _ in range(terms):
        order = int(rng.integers(1, max_order + 1))
        modes = []
        for _ in range(order):
            k = int(rng.integers(1, N + 1))
            modes.append(k if rng.random() < 0.5 else -k)
        key = canonical_key(modes)
        out[key] = out.get(key, 0j) + complex(rng.normal(), rng.normal())
    return ChaosFunctional(N, out)


def _random_polynomial(rng: np.random.Generator, degree: int, parity: str = "any") -> List[float]:
    coeffs = rng.normal(size=degree + 1)
    if parity == "even":
        coeffs[1::2] = 0.0
    elif parity == "odd":
        coeffs[0::2] = 0.0
    return coeffs.tolist()


# ---------------- poisson ----------------


def poisson_suite(grid: str, seed: int, threads: int) -> SuiteResult:
    rng = _rng(seed, 0)
    result = SuiteResult("poisson")

    worst = 0.0
    for _ in range(1000):
        N = int(rng.integers(1, 33))
        phi = random_functional(rng, N, max_order=4)
        worst = max(worst, apply_generator(solve_poisson(phi)).max_abs_difference(phi))
    result.reports.append(flag_gate("poisson_round_trip", worst, worst <= 1e-13, gate="upper", ensemble=1000))

    lam = eigenvalue(canonical_key([2, -3]))
    result.reports.append(tolerance_gate("generator_eigenvalue", lam, -13.0, 0.0))
    mismatches = 0
    for _ in range(100):
        modes = [int(k) for k in rng.integers(-16, 17, size=int(rng.integers(1, 5))) if k != 0] or [1]
        if eigenvalue(canonical_key(modes)) != -float(sum(k * k for k in modes)):
            mismatches += 1
    result.reports.append(flag_gate("generator_eigenvalue_random", mismatches, mismatches == 0, ensemble=100))

    for G, label in ((X2, "x2"), (X3, "x3")):
        for N in (4, 8):
            eta = sample_mu_eps(N, _rng(seed, N))
            psi = solve_poisson(chaos_expand(G, N, FourierMode(-1)))
            target = evaluate(psi, eta)
            value = semigroup_representation(G, N, 1, eta)
            tol = 1e-6 * max(1.0, abs(target))
            result.reports.append(
                tolerance_gate(f"poisson_semigroup_{label}", abs(value - target), 0.0, tol, N=N, ell=1)
            )

    samples = 2000 if grid == "small" else 20000
    # cos-мода даёт вещественный Φ
    phi = chaos_expand(X2, 4, cos_mode(4, 1))
    x0 = sample_mu_eps(4, _rng(seed, 99))
    result.reports.append(ou_flow_check(phi, x0, 0.1, samples, _rng(seed, 100)))
    result.reports.append(generator_rate_check(phi, x0, 0.01, samples, _rng(seed, 101)))
    return result


# ---------------- antisym ----------------


def antisym_suite(grid: str, seed: int, threads: int) -> SuiteResult:
    result = SuiteResult("antisym")
    Ns = (16,) if grid == "small" else (16, 64)
    for F in (X2, X3, X4_MINUS_3X2):
        for N in Ns:
            report = antisymmetry_check(F, N, samples=100, seed=seed)
            report.metadata["M"] = len(F) - 1
            result.reports.append(report)
        result.reports.append(divergence_check(F, 8, points=20, seed=seed + 1))
    phi = chaos_expand(X2, 4, FourierMode(-1))
    psi = chaos_expand(X2, 4, FourierMode(1))
    samples = 400 if grid == "small" else 4000
    result.reports.append(generator_antisymmetry_check(X2, phi, psi, samples, seed))
    return result


# ---------------- chaos ----------------


def chaos_suite(grid: str, seed: int, threads: int) -> SuiteResult:
    """Разложение по хаосам против сетки, градиентное тождество, чётность, наклон."""
    result = SuiteResult("chaos")
    H4 = hermite_polynomial(4).coef.tolist()
    Ns = (4, 8) if grid == "small" else (4, 8, 16)
    samples = 20 if grid == "small" else 100
    for G, label in ((X2, "x2"), (X3, "x3"), (H4, "h4")):
        degree = len(G) - 1
        for N in Ns:
            phi = chaos_expand(G, N, FourierMode(-1))
            spec = hermite_coeffs(G)
            grid_size = dealiased_grid_size(N, degree)
            rng = _rng(seed, 1000 * degree + N)
            worst = 0.0
            for row in sample_mu_eps_array(N, rng, size=samples):
                modes = apply_pointwise(
                    local_amplitude(N) * row,
                    lambda y: np.polynomial.Polynomial(G)(y) - spec.coefficient(0),
                    grid_size,
                    N,
                )
                worst = max(worst, abs(evaluate(phi, full_spectrum(row)) - modes[0]))
            result.reports.append(
                flag_gate(f"chaos_master_{label}", worst, worst <= 1e-8, gate="upper", N=N, ell=1, ensemble=samples)
            )

    rng = _rng(seed, 7)
    worst = 0.0
    for _ in range(10):
        G = _random_polynomial(rng, int(rng.integers(1, 7)))
        target = gradient_energy(G)
        worst = max(worst, abs(hermite_coeffs(G).gradient_sum() - target) / max(1.0, target))
    result.reports.append(flag_gate("gradient_identity", worst, worst <= 1e-10, gate="upper", ensemble=10))

    worst_even = max(abs(linear_coefficient(_random_polynomial(rng, 6, "even"))) for _ in range(5))
    worst_odd = max(abs(quadratic_coefficient(_random_polynomial(rng, 5, "odd"))) for _ in range(5))
    result.reports.append(flag_gate("even_c1_zero", worst_even, worst_even <= 1e-12, gate="upper", ensemble=5))
    result.reports.append(flag_gate("odd_c2_zero", worst_odd, worst_odd <= 1e-12, gate="upper", ensemble=5))

    for n in range(5):
        check = tilt_derivative_check(X4_MINUS_3X2, n)
        result.reports.append(
            tolerance_gate(f"tilt_c{n}", check.c_finite_difference, check.c_quadrature, check.tolerance)
        )
    lp_Ns = (8, 16, 32) if grid == "small" else (8, 16, 32, 64)
    lp = lp_block_bound_study(X2, lp_Ns)
    for bound in lp.bounds:
        result.reports.append(
            flag_gate("lp_block_constant", bound.constant, math.isfinite(bound.constant), gate="recorded", N=bound.N)
        )
    result.reports.append(flag_gate("lp_block_C_spread", lp.C_spread, lp.stable, gate="upper"))
    return result


# ---------------- kernel ----------------


def kernel_suite(grid: str, seed: int, threads: int) -> SuiteResult:
    result = SuiteResult("kernel")
    Ms = (16, 32, 64) if grid == "small" else (16, 32, 64, 128, 256, 512)
    rng = _rng(seed, 0)
    for M in Ms:
        x = rng.uniform(-np.pi, np.pi, size=1000)
        diff = float(np.max(np.abs(covariance_kernel(M, x) - covariance_kernel_direct(M, x))))
        result.reports.append(flag_gate("kernel_closed_form", diff, diff <= 1e-9, gate="upper", M=M, ensemble=1000))
    study = kernel_bound_study(Ms)
    for report in study.reports:
        rel = abs(report.parseval_ratio - 1.0)
        result.reports.append(flag_gate("kernel_parseval", rel, rel <= 1e-8, gate="upper", M=report.M))
        result.reports.append(
            flag_gate("kernel_triangle", report.max_abs, report.within_triangle_bound, gate="upper", M=report.M)
        )
    result.reports.append(flag_gate("kernel_C_spread", study.C_spread, study.stable, gate="upper"))
    return result


# ---------------- stationarity ----------------


def stationarity_suite(grid: str, seed: int, threads: int, *, noise_variance_factor: float = 1.0) -> SuiteResult:
    result = SuiteResult("stationarity")
    size = 100 if grid == "small" else 400
    N = 8 if grid == "small" else 16
    T = 0.25 if grid == "small" else 0.5

    ou = SimConfig(N=N, T=T, F=(0.0,), seed=seed, record_drift=False, record_noise=False,
                   noise_variance_factor=noise_variance_factor)
    samples, times = bg_analysis.stationarity_ensemble(ou, size, threads)
    result.reports.extend(bg_analysis.stationarity_report(samples, times, prefix="ou_"))

    coarse_cfg = SimConfig(N=N, T=T, F=X2, seed=seed + 1, record_drift=False, record_noise=False,
                           noise_variance_factor=noise_variance_factor)
    fine_cfg = SimConfig(N=N, T=T, F=X2, dt=coarse_cfg.dt / 2, seed=seed + 2, record_drift=False,
                         record_noise=False, noise_variance_factor=noise_variance_factor)
    coarse, times = bg_analysis.stationarity_ensemble(coarse_cfg, size, threads)
    fine, _ = bg_analysis.stationarity_ensemble(fine_cfg, size, threads)
    result.reports.extend(bg_analysis.richardson_stationarity(coarse, fine, times))
    return result


# ---------------- qv ----------------


def qv_suite(grid: str, seed: int, threads: int) -> SuiteResult:
    result = SuiteResult("qv")
    T = 1.0
    config = SimConfig(N=16, T=T, F=X2, dt=1e-4, seed=seed, record_noise=False)
    traj = simulate(config)
    if not traj.completed:
        raise AnalysisError("blowup", "траектория для КВ взорвалась")
    ells = (1, 2, 4) if grid == "full" else (1,)
    for ell in ells:
        report = bg_analysis.martingale_qv_report(traj, ell, levels=4)
        result.reports.append(report)
        result.reports.append(bg_analysis.antisymmetric_qv_report(traj, ell, levels=4))
    dec = decompose(traj, 1)
    result.fits.append(bg_analysis.quadratic_variation(dec.M, traj.dt, 4, name="qv_martingale"))
    result.fits.append(bg_analysis.quadratic_variation(dec.A, traj.dt, 4, name="qv_antisymmetric"))
    return result


# ---------------- bg-scaling и прочее ----------------


def bg_scaling_suite(grid: str, seed: int, threads: int, *, c2_override=None) -> SuiteResult:
    study = bg_analysis.bg_scaling_study(grid, X2, seed, threads, c2_override=c2_override)
    return SuiteResult("bg-scaling", reports=study.reports + study.gates, fits=study.fits)


def burgers_suite(grid: str, seed: int, threads: int) -> SuiteResult:
    ensemble = 40 if grid == "small" else 200
    study = bg_analysis.burgers_study(ensemble=ensemble, seed=seed, threads=threads)
    return SuiteResult("burgers", reports=study.reports + study.gates)


def ito_suite(grid: str, seed: int, threads: int) -> SuiteResult:
    ensemble = 40 if grid == "small" else 200
    return SuiteResult("ito", reports=bg_analysis.ito_trick_study(ensemble=ensemble, seed=seed, threads=threads))


def time_average_suite(grid: str, seed: int, threads: int) -> SuiteResult:
    ensemble = 20 if grid == "small" else 100
    result = SuiteResult("time-average")
    sup = bg_analysis.time_average_study(X2, ensemble=ensemble, seed=seed, threads=threads)
    hneg = bg_analysis.time_average_study(
        hermite_polynomial(2).coef.tolist(), ensemble=ensemble, seed=seed, threads=threads, negative_norm=True,
    )
    result.reports.extend(sup.reports + [sup.trend] + hneg.reports + [hneg.trend])
    return result


SUITES: Dict[str, Callable[[str, int, int], SuiteResult]] = {
    "poisson": poisson_suite,
    "antisym": antisym_suite,
    "chaos": chaos_suite,
    "kernel": kernel_suite,
    "stationarity": stationarity_suite,
    "qv": qv_suite,
    "bg-scaling": bg_scaling_suite,
    "burgers": burgers_suite,
    "ito": ito_suite,
    "time-average": time_average_suite,
}


def run_suite(name: str, grid: str = "small", seed: int = 0, threads: int = 1) -> SuiteResult:
    if name not in SUITES:
        raise AnalysisError("unknown_suite", f"неизвестный набор {name!r}; доступны: {', '.join(SUITES)}")
    if grid not in GRID_CHOICES:
        raise AnalysisError("unknown_grid", f"сетка {grid!r}: ожидается small или full")
    logger.info("[VERIFY] %s (grid=%s, seed=%d, threads=%d)", name, grid, seed, threads)
    result = SUITES[name](grid, seed, threads)
    failed = sum(1 for r in result.reports if not r.passed)
    logger.info("[VERIFY] %s: %d отчётов, провалено %d", name, len(result.reports), failed)
    return result


__all__ = ["GRID_CHOICES", "SUITES", "SuiteResult", "random_functional", "run_suite"]
