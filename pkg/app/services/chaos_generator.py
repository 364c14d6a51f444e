"""Генератор ОУ ℒ₀ на мономах Вика, уравнение Пуассона и форма энергии.

ℒ₀⟦η_{k₁}⋯η_{k_n}⟧ = −(k₁² + ⋯ + k_n²)⟦η_{k₁}⋯η_{k_n}⟧ — оператор диагонален,
поэтому всё здесь сводится к покомпонентной арифметике над ChaosFunctional.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from app.errors import ChaosError, PoissonError
from app.services.gaussian_field import RandomSource, as_generator, complex_gaussians
from app.services.hermite_chaos import (
    ChaosFunctional,
    MonomialKey,
    Nonlinearity,
    as_nonlinearity,
    evaluate,
    evaluate_real,
    hermite_coeffs,
    second_moment,
)
from app.services.spectral_core import (
    FourierField,
    apply_pointwise,
    dealiased_grid_size,
    full_spectrum,
    local_amplitude,
    wavenumbers,
)
from app.services.stats import StatReport, mean_and_stderr, z_gate

logger = logging.getLogger(__name__)


def eigenvalue(key: MonomialKey) -> float:
    return -float(sum(m * k * k for k, m in key))


def apply_generator(phi: ChaosFunctional) -> ChaosFunctional:
    return phi.map_terms(lambda key, c: c * eigenvalue(key))


def solve_poisson(phi: ChaosFunctional) -> ChaosFunctional:
    """Ψ с ℒ₀Ψ = Φ. Компонента нулевого хаоса не проецируется молча, а отвергается."""
    if phi.constant_term != 0:
        raise PoissonError(
            "order_zero",
            f"у правой части есть константа {phi.constant_term!r}: уравнение Пуассона неразрешимо",
        )
    return phi.map_terms(lambda key, c: c / eigenvalue(key))


def ou_semigroup(phi: ChaosFunctional, t: float) -> ChaosFunctional:
    """P_tΦ = Σ e^{−tΣk_i²}·терм."""
    return phi.map_terms(lambda key, c: c * math.exp(t * eigenvalue(key)))


def dk_derivative(phi: ChaosFunctional, k: int) -> ChaosFunctional:
    """D_k = ∂/∂η_k: снимает одну копию η_k с весом кратности."""
    if k == 0 or abs(k) > phi.N:
        raise ChaosError("mode_outside", f"мода {k} вне Y_{phi.N}")
    terms = {}
    for key, coef in phi.terms.items():
        lowered = []
        mult = 0
        for mode, m in key:
            if mode == k:
                mult = m
                if m > 1:
                    lowered.append((mode, m - 1))
            else:
                lowered.append((mode, m))
        if mult:
            new_key = tuple(lowered)
            terms[new_key] = terms.get(new_key, 0j) + mult * coef
    return ChaosFunctional(phi.N, terms)


@dataclass
class EnergyReport:
    expected_energy: float
    ito_bound: float
    term_count: int
    T: float


def energy(psi: ChaosFunctional, T: float = 1.0) -> EnergyReport:
    """E[ℰ(Ψ)] = Σ_{0<|k|≤N} k² E|D_kΨ|²; при p = 2 оценка Itô trick равна T·E[ℰ]."""
    total = 0.0
    modes = {abs(k) for key in psi.terms for k, _ in key}
    for k in sorted(modes):
        for signed in (k, -k):
            total += k * k * second_moment(dk_derivative(psi, signed))
    return EnergyReport(expected_energy=total, ito_bound=T * total, term_count=psi.term_count, T=T)


def energy_density(psi: ChaosFunctional, eta: Union[FourierField, np.ndarray]) -> float:
    """ℰ(Ψ)(η) = Σ k²|D_kΨ(η)|² в одной точке, для MC-проверки ожидания."""
    total = 0.0
    for k in range(1, psi.N + 1):
        for signed in (k, -k):
            total += k * k * abs(evaluate(dk_derivative(psi, signed), eta)) ** 2
    return total


# ---------------- оракулы ----------------


def _scaled_hermite_table(nmax: int, y: np.ndarray, variance: float) -> np.ndarray:
    # σ^n H_n(y/σ) без деления на σ: P_{n+1} = yP_n − nσ²P_{n−1}
    out = np.empty((nmax + 1,) + y.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = y
    for m in range(1, nmax):
        out[m + 1] = y * out[m] - m * variance * out[m - 1]
    return out


def semigroup_representation(
    G: Nonlinearity,
    N: int,
    ell: int,
    eta: FourierField,
    *,
    nodes: int = 64,
    t_min: float = 1e-8,
    t_max: float = 60.0,
) -> complex:
    """−∫₀^∞ ⟨⟦G⟧(λ e^{tΔ}Π_0^N η), e_{−ℓ}⟩ dt без хаос-разложения.

    ⟦G⟧ — виково упорядоченная G: Σ c_n σ_t^n H_n(Y/σ_t), σ_t² = Var(λ(e^{tΔ}Πη)(x)).
    Интеграл считается Гауссом–Лежандром по log t на [t_min, t_max].
    """
    if ell == 0 or abs(ell) > N:
        raise ChaosError("mode_outside", f"мода {ell} вне Y_{N}")
    spec = hermite_coeffs(G)
    nl = as_nonlinearity(G)
    degree = nl.degree if nl.degree is not None else spec.nmax
    lam = local_amplitude(N)
    k = wavenumbers(N)
    grid = dealiased_grid_size(N, degree)

    s_nodes, s_weights = np.polynomial.legendre.leggauss(nodes)
    a, b = math.log(t_min), math.log(t_max)
    s = 0.5 * (b - a) * s_nodes + 0.5 * (b + a)
    w = 0.5 * (b - a) * s_weights

    total = 0j
    for s_j, w_j in zip(s, w):
        t = math.exp(s_j)
        damp = np.exp(-k * k * t)
        variance = float(np.sum(damp**2)) / N
        coeffs = lam * damp * eta.coeffs[:N]

        def wick_g(y: np.ndarray) -> np.ndarray:
            table = _scaled_hermite_table(spec.nmax, y, variance)
            return np.tensordot(spec.c[1:], table[1:], axes=1)

        projected = apply_pointwise(coeffs, wick_g, grid, N)
        value = projected[abs(ell) - 1] if ell > 0 else np.conj(projected[abs(ell) - 1])
        total += w_j * t * value
    return complex(-total)


def ou_flow_check(
    phi: ChaosFunctional,
    x0: FourierField,
    t: float,
    samples: int,
    seed: RandomSource,
    threshold: float = 4.0,
) -> StatReport:
    """E[Φ(X_t) | X_0 = x0] по точному ОУ-потоку против P_tΦ(x0)."""
    rng = as_generator(seed)
    N = phi.N
    k = wavenumbers(N)
    decay = np.exp(-k * k * t)
    noise = complex_gaussians(rng, (samples, N), 1.0 - decay**2)
    states = decay * x0.coeffs[:N] + noise
    values = [evaluate_real(phi, full_spectrum(row)) for row in states]
    mean, err = mean_and_stderr(values)
    target = evaluate_real(ou_semigroup(phi, t), x0)
    return z_gate("ou_flow", mean, err, target, threshold, N=N, lag=t, ensemble=samples)


def generator_rate_check(
    phi: ChaosFunctional,
    x0: FourierField,
    t: float,
    samples: int,
    seed: RandomSource,
    threshold: float = 4.0,
) -> StatReport:
    """d/dt E[Φ(X_t)] в нуле против (ℒ₀Φ)(x0).

    Разностная оценка (E[Φ(X_t)] − Φ(x0))/t смещена на O(t); смещение известно
    точно из P_t и добавляется к MC-ошибке в квадратуре.
    """
    report = ou_flow_check(phi, x0, t, samples, seed, threshold)
    base = evaluate_real(phi, x0)
    rate = (report.estimate - base) / t
    exact_rate = (report.target - base) / t
    generator_value = evaluate_real(apply_generator(phi), x0)
    bias = abs(exact_rate - generator_value)
    logger.debug("[VERIFY] ℒ₀Φ(x0)=%.6g, смещение разности=%.3g", generator_value, bias)
    return z_gate(
        "generator_rate",
        rate,
        math.hypot(report.mc_stderr / t, bias),
        generator_value,
        threshold,
        N=phi.N,
        lag=t,
        ensemble=samples,
    )


__all__ = [
    "EnergyReport",
    "apply_generator",
    "dk_derivative",
    "eigenvalue",
    "energy",
    "energy_density",
    "generator_rate_check",
    "ou_flow_check",
    "ou_semigroup",
    "semigroup_representation",
    "solve_poisson",
]
