"""Фурье-представление вещественных полей на торе 𝕋 = ℝ/2πℤ.

Соглашения (во всём пакете одни и те же):

* базис e_k = e^{ikx}/√(2π), коэффициент û(k) = ⟨u, e_{−k}⟩;
* спаривание ⟨f, g⟩ = ∫ f g dx без комплексного сопряжения;
* пространство Y_N — моды 0 < |k| ≤ N, нулевая мода всегда отсутствует.

``FourierField`` хранит только k = 1..N; коэффициенты при k < 0 восстанавливаются
из вещественности: û(−k) = conj û(k).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from app.errors import SpectralError

SQRT_2PI = float(np.sqrt(2.0 * np.pi))
SQRT_PI = float(np.sqrt(np.pi))


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FourierField:
    """Вещественное поле из Y_N: ``coeffs[k-1]`` = û(k), k = 1..N."""

    N: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.N < 1:
            raise SpectralError("bad_cutoff", f"N должно быть ≥ 1, получено {self.N}")
        arr = np.asarray(self.coeffs, dtype=np.complex128)
        if arr.shape != (self.N,):
            raise SpectralError(
                "bad_shape", f"ожидалось {self.N} коэффициентов, получено {arr.shape}"
            )
        object.__setattr__(self, "coeffs", _frozen(arr))

    @classmethod
    def zeros(cls, N: int) -> "FourierField":
        return cls(N, np.zeros(N, dtype=np.complex128))

    def coefficient(self, k: int) -> complex:
        if k == 0 or abs(k) > self.N:
            return 0j
        value = self.coeffs[abs(k) - 1]
        return complex(value) if k > 0 else complex(np.conj(value))

    def spectrum(self) -> np.ndarray:
        """Полный спектр длины 2N+1, индекс k+N, k = −N..N."""
        return full_spectrum(self.coeffs)

    def __add__(self, other: "FourierField") -> "FourierField":
        n = max(self.N, other.N)
        return FourierField(n, _embed(self.coeffs, n) + _embed(other.coeffs, n))

    def __sub__(self, other: "FourierField") -> "FourierField":
        return self + other.scaled(-1.0)

    def scaled(self, factor: float) -> "FourierField":
        return FourierField(self.N, self.coeffs * float(factor))

    def allclose(self, other: "FourierField", atol: float = 1e-12) -> bool:
        n = max(self.N, other.N)
        return bool(np.allclose(_embed(self.coeffs, n), _embed(other.coeffs, n), rtol=0.0, atol=atol))


@dataclass(frozen=True)
class FourierMode:
    """Комплексная мода e_k (не вещественное поле): единственный коэффициент û(k) = 1."""

    k: int

    def __post_init__(self) -> None:
        if self.k == 0:
            raise SpectralError("zero_mode", "нулевая мода не принадлежит Y_N")


@dataclass(frozen=True, eq=False)
class GridField:
    """Значения поля в узлах x_j = 2πj/G."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise SpectralError("bad_shape", "ожидается одномерный массив значений")
        object.__setattr__(self, "samples", _frozen(arr))

    @property
    def G(self) -> int:
        return int(self.samples.size)

    @property
    def x(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.G) / self.G


Field = Union[FourierField, FourierMode]


# ---------------- массивные хелперы (горячие циклы симулятора) ----------------


def wavenumbers(N: int) -> np.ndarray:
    return np.arange(1, N + 1, dtype=np.float64)


def _embed(coeffs: np.ndarray, N: int) -> np.ndarray:
    out = np.zeros(N, dtype=np.complex128)
    m = min(N, coeffs.shape[-1])
    out[:m] = coeffs[:m]
    return out


def full_spectrum(coeffs: np.ndarray) -> np.ndarray:
    N = coeffs.shape[-1]
    out = np.zeros(2 * N + 1, dtype=np.complex128)
    out[N + 1:] = coeffs
    out[:N] = np.conj(coeffs[::-1])
    return out


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def grid_size(N: int, factor: int = 4) -> int:
    """Степень двойки ≥ max(factor·N, 2N+2)."""
    return next_pow2(max(factor * N, 2 * N + 2))


def dealiased_grid_size(N: int, degree: int, oversample: int = 4) -> int:
    """Сетка, на которой F(u) степени ``degree`` проецируется на Y_N без алиасинга."""
    return next_pow2(max((max(degree, 1) + 1) * N + 2, oversample * N))


def to_grid_array(coeffs: np.ndarray, G: int) -> np.ndarray:
    """Коэффициенты k=1..N (последняя ось) → значения на сетке из G точек."""
    N = coeffs.shape[-1]
    if G < 2 * N + 2:
        raise SpectralError("grid_too_small", f"сетка G={G} меньше 2N+2={2 * N + 2}")
    half = np.zeros(coeffs.shape[:-1] + (G // 2 + 1,), dtype=np.complex128)
    half[..., 1:N + 1] = coeffs
    return (G / SQRT_2PI) * np.fft.irfft(half, n=G, axis=-1)


def from_grid_array(samples: np.ndarray, N: int) -> np.ndarray:
    """Значения на сетке → û(k), k=1..N; моды выше G/2−1 обнуляются."""
    G = samples.shape[-1]
    spec = np.fft.rfft(samples, axis=-1) * (SQRT_2PI / G)
    out = np.zeros(samples.shape[:-1] + (N,), dtype=np.complex128)
    m = min(N, G // 2 - 1) if G > 2 else 0
    if m > 0:
        out[..., :m] = spec[..., 1:m + 1]
    return out


def epsilon(N: int) -> float:
    """Связь 2N·ε = 1."""
    return 1.0 / (2.0 * N)


def local_amplitude(N: int) -> float:
    """λ = (2πε)^{1/2}: λ·Π_0^N η(x) — ровно стандартная гауссиана в каждой точке."""
    return float(np.sqrt(np.pi / N))


def apply_pointwise(coeffs: np.ndarray, func, G: int, N_out: int) -> np.ndarray:
    """Π_0^{N_out} func(u) для u с коэффициентами ``coeffs``; func берёт значения на сетке."""
    samples = to_grid_array(coeffs, G)
    values = func(samples)
    if not np.all(np.isfinite(values)):
        raise SpectralError("non_finite", "нелинейность дала inf/nan на сетке")
    return from_grid_array(values, N_out)


# ---------------- операции ----------------


def project(field: Union[FourierField, GridField], N: int) -> FourierField:
    """Π_0^N: убрать нулевую моду и всё, что выше N."""
    if N < 1:
        raise SpectralError("bad_cutoff", f"N должно быть ≥ 1, получено {N}")
    if isinstance(field, GridField):
        return FourierField(N, from_grid_array(field.samples, N))
    return FourierField(N, _embed(field.coeffs, N))


def derivative(field: FourierField) -> FourierField:
    return FourierField(field.N, 1j * wavenumbers(field.N) * field.coeffs)


def _coefficient(field: Field, k: int) -> complex:
    if isinstance(field, FourierMode):
        return 1.0 + 0j if k == field.k else 0j
    return field.coefficient(k)


def _cutoff(field: Field) -> int:
    return abs(field.k) if isinstance(field, FourierMode) else field.N


def inner_product(f: Field, g: Field) -> complex:
    """⟨f, g⟩ = Σ_k f̂(k) ĝ(−k), без сопряжения."""
    if isinstance(f, FourierField) and isinstance(g, FourierField):
        n = max(f.N, g.N)
        a, b = _embed(f.coeffs, n), _embed(g.coeffs, n)
        return complex(np.sum(a * np.conj(b)) + np.sum(np.conj(a) * b))
    if isinstance(f, FourierMode):
        return _coefficient(g, -f.k)
    return _coefficient(f, -g.k)  # type: ignore[union-attr]


def lp_block(field: FourierField, q: int) -> FourierField:
    """Резкий диадический блок: q = −1 — |k| ≤ 1, иначе 2^q ≤ |k| < 2^{q+1} без |k| = 1.

    Мода k = 1 принадлежит только q = −1, поэтому блок q = 0 пуст и Σ_q Δ_q = id.
    """
    k = np.arange(1, field.N + 1)
    if q < -1:
        mask = np.zeros(field.N, dtype=bool)
    elif q == -1:
        mask = k <= 1
    else:
        mask = (k >= max(2**q, 2)) & (k < 2 ** (q + 1))
    return FourierField(field.N, np.where(mask, field.coeffs, 0j))


def lp_block_count(N: int) -> int:
    """Сколько блоков q = −1, 0, 1, ... нужно, чтобы покрыть моды до N."""
    return max(0, int(N).bit_length() - 1) + 1


def sobolev_norm(field: Field, s: float) -> float:
    """(Σ_{0<|k|≤N} |k|^{2s} |û(k)|²)^{1/2}."""
    if isinstance(field, FourierMode):
        return float(abs(field.k) ** s)
    weights = wavenumbers(field.N) ** (2.0 * s)
    return float(np.sqrt(2.0 * np.sum(weights * np.abs(field.coeffs) ** 2)))


def phase_shift(field: FourierField, a: float) -> FourierField:
    """Сдвиг на a: значения на сетке u(x) ↦ u(x − a)."""
    return FourierField(field.N, np.exp(-1j * wavenumbers(field.N) * a) * field.coeffs)


def to_grid(field: FourierField, G: int | None = None) -> GridField:
    return GridField(to_grid_array(field.coeffs, G if G is not None else grid_size(field.N)))


def from_grid(grid: GridField, N: int | None = None) -> FourierField:
    n = N if N is not None else grid.G // 2 - 1
    return project(grid, n)


def to_real_coordinates(field: FourierField) -> np.ndarray:
    """Y_N ≅ ℝ^{2N} в базисе cos(kx)/√π, sin(kx)/√π: [a_1..a_N, b_1..b_N]."""
    c = field.coeffs
    return np.concatenate([np.sqrt(2.0) * c.real, -np.sqrt(2.0) * c.imag])


def from_real_coordinates(values: np.ndarray) -> FourierField:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size % 2:
        raise SpectralError("bad_shape", "ожидается вектор длины 2N")
    N = values.size // 2
    return FourierField(N, (values[:N] - 1j * values[N:]) / np.sqrt(2.0))


def cos_mode(N: int, k: int) -> FourierField:
    """cos(kx)/√π как элемент Y_N."""
    coords = np.zeros(2 * N)
    coords[k - 1] = 1.0
    return from_real_coordinates(coords)


def sin_mode(N: int, k: int) -> FourierField:
    coords = np.zeros(2 * N)
    coords[N + k - 1] = 1.0
    return from_real_coordinates(coords)


__all__ = [
    "FourierField",
    "FourierMode",
    "GridField",
    "apply_pointwise",
    "cos_mode",
    "dealiased_grid_size",
    "derivative",
    "epsilon",
    "from_grid",
    "from_grid_array",
    "from_real_coordinates",
    "full_spectrum",
    "grid_size",
    "inner_product",
    "local_amplitude",
    "lp_block",
    "lp_block_count",
    "next_pow2",
    "phase_shift",
    "project",
    "sin_mode",
    "sobolev_norm",
    "to_grid",
    "to_grid_array",
    "to_real_coordinates",
    "wavenumbers",
]
