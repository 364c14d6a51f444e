"""Инвариантная мера μ^ε (усечённый белый шум) и ядро Дирихле.

Случайность только через ``NoiseSeed``: пара (master seed, stream) задаёт ключ
счётчикового генератора Philox. Траектория j ансамбля берёт stream j, поэтому
результат не зависит от того, в каком порядке воркеры разобрали задачи.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from app.services.spectral_core import FourierField, next_pow2

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1
NEAR_ZERO = 1e-6  # порог |1 − cos x|, ниже которого ядро считается прямой суммой


@dataclass(frozen=True)
class NoiseSeed:
    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "seed", int(self.seed) & SEED_MASK)
        object.__setattr__(self, "stream", int(self.stream) & SEED_MASK)

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, stream: int) -> "NoiseSeed":
        return NoiseSeed(self.seed, stream)


RandomSource = Union[NoiseSeed, np.random.Generator, int]


def as_generator(source: RandomSource) -> np.random.Generator:
    if isinstance(source, np.random.Generator):
        return source
    if isinstance(source, NoiseSeed):
        return source.generator()
    return NoiseSeed(int(source)).generator()


def complex_gaussians(rng: np.random.Generator, shape, variance: Union[float, np.ndarray] = 1.0) -> np.ndarray:
    """Комплексные гауссианы с E|z|² = variance: Re, Im независимы, N(0, variance/2)."""
    scale = np.sqrt(np.asarray(variance, dtype=np.float64) / 2.0)
    g = rng.standard_normal(tuple(shape) + (2,))
    return scale * (g[..., 0] - 1j * g[..., 1])


def sample_mu_eps_array(N: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    shape = (N,) if size is None else (size, N)
    return complex_gaussians(rng, shape)


def sample_mu_eps(N: int, seed: RandomSource) -> FourierField:
    """η_k, 0 < k ≤ N, с E[η_k η_{−k}] = E|η_k|² = 1; η_{−k} = conj η_k."""
    return FourierField(N, sample_mu_eps_array(N, as_generator(seed)))


# ---------------- ядро Σ_{0<|k|≤M} e^{ikx} ----------------


def covariance_kernel_direct(M: int, x) -> Union[float, np.ndarray]:
    xs = np.asarray(x, dtype=np.float64)
    k = np.arange(1, M + 1, dtype=np.float64)
    value = 2.0 * np.cos(np.multiply.outer(xs, k)).sum(axis=-1)
    return float(value) if value.ndim == 0 else value


def covariance_kernel(M: int, x) -> Union[float, np.ndarray]:
    """[cos(Mx) − cos((M+1)x)]/(1 − cos x) − 1, в форме sin((M+½)x)/sin(x/2) − 1.

    Около x ≡ 0 (mod 2π) переключаемся на прямую сумму, предел 2M.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty_like(xs)
    near = np.abs(1.0 - np.cos(xs)) < NEAR_ZERO
    far = ~near
    if np.any(far):
        xf = xs[far]
        out[far] = np.sin((M + 0.5) * xf) / np.sin(0.5 * xf) - 1.0
    if np.any(near):
        out[near] = np.atleast_1d(covariance_kernel_direct(M, xs[near]))
    if np.ndim(x) == 0:
        return float(out[0])
    return out


def torus_distance(x) -> np.ndarray:
    """|x| по модулю 2π, значения в [0, π]."""
    r = np.mod(np.asarray(x, dtype=np.float64), 2.0 * np.pi)
    return np.minimum(r, 2.0 * np.pi - r)


@dataclass
class KernelParseval:
    M: int
    double_integral: float
    exact: float

    @property
    def rel_error(self) -> float:
        return abs(self.double_integral - self.exact) / self.exact


def kernel_parseval(M: int) -> KernelParseval:
    """∬_{𝕋²} K(x − x′)² dx dx′ = 2π·∫_𝕋 K² dx, точное значение (2π)²·2M.

    K² есть тригонометрический многочлен степени 2M, поэтому формула трапеций на
    G > 2M точках точна.
    """
    G = next_pow2(4 * M + 2)
    x = 2.0 * np.pi * np.arange(G) / G
    single = (2.0 * np.pi / G) * float(np.sum(np.asarray(covariance_kernel(M, x)) ** 2))
    return KernelParseval(M=M, double_integral=2.0 * np.pi * single, exact=(2.0 * np.pi) ** 2 * 2 * M)


@dataclass
class KernelBoundReport:
    M: int
    fitted_C: float  # sup |K(x)| / min{M, |x|⁻¹}
    max_abs: float
    within_triangle_bound: bool  # |K| ≤ 2M всюду
    parseval_ratio: float  # ∬K² / ((2π)²·2M)
    envelope_ratio: float  # ∬K² / M, должно быть ограничено по M


def kernel_bound_check(M: int, points_per_mode: int = 32) -> KernelBoundReport:
    x = np.pi * np.arange(1, points_per_mode * M + 1) / (points_per_mode * M)
    values = np.abs(np.asarray(covariance_kernel(M, x)))
    envelope = np.minimum(float(M), 1.0 / torus_distance(x))
    fitted = float(np.max(values / envelope))
    # x = 0 отдельно: там |K| = 2M, огибающая M
    fitted = max(fitted, 2.0)
    parseval = kernel_parseval(M)
    max_abs = float(max(np.max(values), 2 * M))
    return KernelBoundReport(
        M=M,
        fitted_C=fitted,
        max_abs=max_abs,
        within_triangle_bound=bool(np.all(values <= 2 * M + 1e-9)),
        parseval_ratio=parseval.double_integral / parseval.exact,
        envelope_ratio=parseval.double_integral / M,
    )


@dataclass
class KernelBoundStudy:
    reports: List[KernelBoundReport]
    C_spread: float  # max C / min C по сетке M

    @property
    def stable(self) -> bool:
        return self.C_spread <= 1.2 and all(r.within_triangle_bound for r in self.reports)


DEFAULT_KERNEL_MS = (16, 32, 64, 128, 256, 512)


def kernel_bound_study(Ms: Sequence[int] = DEFAULT_KERNEL_MS) -> KernelBoundStudy:
    reports = [kernel_bound_check(M) for M in Ms]
    cs = [r.fitted_C for r in reports]
    spread = max(cs) / min(cs)
    logger.info("[VERIFY] kernel: C=%s spread=%.3f", ["%.3f" % c for c in cs], spread)
    return KernelBoundStudy(reports=reports, C_spread=spread)


__all__ = [
    "KernelBoundReport",
    "KernelBoundStudy",
    "KernelParseval",
    "NoiseSeed",
    "as_generator",
    "complex_gaussians",
    "covariance_kernel",
    "covariance_kernel_direct",
    "kernel_bound_check",
    "kernel_bound_study",
    "kernel_parseval",
    "sample_mu_eps",
    "sample_mu_eps_array",
    "torus_distance",
]
