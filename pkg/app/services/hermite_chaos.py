"""Полиномы Эрмита, коэффициенты c_n(G) и хаос-разложение G(λΠ_0^N η(x)).

Мономы Вика ⟦η_{k₁}⋯η_{k_n}⟧ храним канонически: отсортированный кортеж пар
(мода, кратность). Для каждого |k| пара (η_k, η_{−k}) — комплексная координата
независимой вещественной пары (g^c, g^s), и ⟦η_k^a η_{−k}^b⟧ — комплексный
полином Эрмита H_{a,b}(η_k, η_{−k}). Отсюда диагональные вторые моменты:
E|⟦·⟧|² = Π a! b!.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import hermite_e

from app.errors import ChaosError
from app.services.spectral_core import (
    FourierField,
    FourierMode,
    full_spectrum,
    local_amplitude,
)

logger = logging.getLogger(__name__)

MonomialKey = Tuple[Tuple[int, int], ...]
Nonlinearity = Union[Sequence[float], Polynomial, Callable[[np.ndarray], np.ndarray]]

DEFAULT_TERM_BUDGET = 500_000
GAUSS_NORM = math.sqrt(2.0 * math.pi)


# ---------------- полиномы Эрмита ----------------


def hermite(n: int, x):
    """Вероятностный H_n: H_{n+1} = xH_n − nH_{n−1}."""
    if n < 0:
        raise ChaosError("bad_order", f"порядок должен быть ≥ 0, получено {n}")
    x = np.asarray(x, dtype=np.float64)
    prev, cur = np.ones_like(x), x.copy()
    if n == 0:
        result = prev
    else:
        for m in range(1, n):
            prev, cur = cur, x * cur - m * prev
        result = cur
    return float(result) if result.ndim == 0 else result


def hermite_table(nmax: int, x: np.ndarray) -> np.ndarray:
    """Все H_0..H_nmax в узлах x; форма (nmax+1, len(x))."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = x
    for m in range(1, nmax):
        out[m + 1] = x * out[m] - m * out[m - 1]
    return out


def gauss_nodes(quad_order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Узлы и веса Гаусса–Эрмита для стандартной гауссовой меры ν."""
    nodes, weights = hermite_e.hermegauss(quad_order)
    return nodes, weights / GAUSS_NORM


def hermite_polynomial(n: int) -> Polynomial:
    basis = np.zeros(n + 1)
    basis[n] = 1.0
    return Polynomial(hermite_e.herme2poly(basis))


# ---------------- нелинейности ----------------


@dataclass(frozen=True)
class _Nonlinearity:
    func: Callable[[np.ndarray], np.ndarray]
    poly: Optional[Polynomial]

    @property
    def degree(self) -> Optional[int]:
        return None if self.poly is None else int(self.poly.degree())


def as_nonlinearity(G: Nonlinearity) -> _Nonlinearity:
    """Многочлен (список коэффициентов по возрастанию) или произвольная функция-хук."""
    if isinstance(G, Polynomial):
        poly = G.trim()
        return _Nonlinearity(poly, poly)
    if callable(G):
        return _Nonlinearity(G, None)
    coeffs = np.asarray(list(G), dtype=np.float64)
    if coeffs.size == 0:
        raise ChaosError("empty_polynomial", "пустой список коэффициентов")
    poly = Polynomial(coeffs).trim()
    return _Nonlinearity(poly, poly)


def _symmetric_expectation(values_pos: np.ndarray, values_neg: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # Складываем f(x) и f(−x) до суммирования: нечётные интегранды дают точный ноль.
    return np.sum(weights * (values_pos + values_neg), axis=-1)


def _folded_nodes(quad_order: int) -> Tuple[np.ndarray, np.ndarray, float]:
    nodes, weights = gauss_nodes(quad_order)
    half = quad_order // 2
    pos = nodes[quad_order - half:]
    w = weights[quad_order - half:]
    # при нечётном числе узлов средний узел x=0 идёт отдельно
    w0 = float(weights[half]) if quad_order % 2 else 0.0
    return pos, w, w0


def gaussian_expectation(func: Callable[[np.ndarray], np.ndarray], quad_order: int = 80) -> float:
    """E[f(U)], U ~ N(0, 1), по Гауссу–Эрмиту."""
    pos, w, w0 = _folded_nodes(quad_order)
    total = float(_symmetric_expectation(func(pos), func(-pos), w))
    if w0:
        total += w0 * float(func(np.zeros(1))[0])
    return total


# ---------------- спектр Эрмита ----------------


@dataclass(eq=False)
class HermiteSpectrum:
    c: np.ndarray
    nmax: int
    quad_order: int
    tail: float  # оценка Σ_{n>nmax} n! c_n² по неравенству Бесселя
    second_moment: float  # E[G(U)²]
    converged: bool = True

    def coefficient(self, n: int) -> float:
        return float(self.c[n]) if 0 <= n <= self.nmax else 0.0

    def bessel_sum(self) -> float:
        return float(sum(math.factorial(n) * self.c[n] ** 2 for n in range(self.nmax + 1)))

    def gradient_sum(self) -> float:
        """Σ_{n≥1} n·n!·c_n²; для многочлена равно E[G′(U)²]."""
        return float(sum(n * math.factorial(n) * self.c[n] ** 2 for n in range(1, self.nmax + 1)))


def default_quad_order(nmax: int) -> int:
    return max(40, 2 * nmax + 10)


def _coefficients(func, nmax: int, quad_order: int) -> Tuple[np.ndarray, float]:
    pos, w, w0 = _folded_nodes(quad_order)
    g_pos, g_neg = func(pos), func(-pos)
    h_pos, h_neg = hermite_table(nmax, pos), hermite_table(nmax, -pos)
    moments = _symmetric_expectation(g_pos * h_pos, g_neg * h_neg, w)
    second = float(_symmetric_expectation(g_pos**2, g_neg**2, w))
    if w0:
        g0 = float(func(np.zeros(1))[0])
        moments = moments + w0 * g0 * hermite_table(nmax, np.zeros(1))[:, 0]
        second += w0 * g0**2
    c = np.array([moments[n] / math.factorial(n) for n in range(nmax + 1)])
    return c, second


def hermite_coeffs(G: Nonlinearity, nmax: Optional[int] = None, quad_order: Optional[int] = None) -> HermiteSpectrum:
    """c_n(G) = E[G(U)H_n(U)]/n!, n = 0..nmax.

    Для многочлена nmax по умолчанию равен степени, коэффициенты выше степени —
    точные нули. Для функции-хука проверяем сходимость: повтор на quad_order+20
    узлах должен совпасть, иначе спектр помечается ``converged=False``.
    """
    nl = as_nonlinearity(G)
    if nmax is None:
        if nl.degree is None:
            raise ChaosError("nmax_required", "для произвольной функции нужен явный nmax")
        nmax = nl.degree
    if nmax < 0:
        raise ChaosError("bad_order", "nmax должно быть ≥ 0")
    order = quad_order if quad_order is not None else default_quad_order(nmax)

    c, second = _coefficients(nl.func, nmax, order)
    converged = True
    if nl.degree is not None:
        if order <= nl.degree:
            raise ChaosError("quadrature_too_small", f"quad_order={order} ≤ степени {nl.degree}")
        c[nl.degree + 1:] = 0.0
    else:
        c_fine, second_fine = _coefficients(nl.func, nmax, order + 20)
        scale = max(1.0, math.sqrt(abs(second_fine)))
        if np.max(np.abs(c_fine - c)) > 1e-8 * scale:
            converged = False
            logger.warning("[VERIFY] квадратура Гаусса–Эрмита не сошлась (quad_order=%d)", order)
    bessel = sum(math.factorial(n) * c[n] ** 2 for n in range(nmax + 1))
    tail = max(0.0, second - bessel)
    return HermiteSpectrum(c=c, nmax=nmax, quad_order=order, tail=tail, second_moment=second, converged=converged)


def psi(G: Nonlinearity, lam: float, quad_order: int = 80) -> float:
    """ψ_G(λ) = E[G(λ + U)]."""
    nl = as_nonlinearity(G)
    return gaussian_expectation(lambda x: nl.func(lam + x), quad_order)


def gradient_energy(G: Nonlinearity, quad_order: int = 80) -> float:
    """E[G′(U)²]; для функции-хука производная берётся численно."""
    nl = as_nonlinearity(G)
    if nl.poly is not None:
        dpoly = nl.poly.deriv()
        return gaussian_expectation(lambda x: dpoly(x) ** 2, quad_order)
    h = 1e-5
    return gaussian_expectation(lambda x: ((nl.func(x + h) - nl.func(x - h)) / (2 * h)) ** 2, quad_order)


@dataclass
class TiltCheck:
    n: int
    c_quadrature: float
    c_finite_difference: float
    tolerance: float

    @property
    def abs_error(self) -> float:
        return abs(self.c_quadrature - self.c_finite_difference)

    @property
    def passed(self) -> bool:
        return self.abs_error <= self.tolerance


def _central_difference(G: Nonlinearity, n: int, h: float) -> float:
    total = 0.0
    for j in range(n + 1):
        total += (-1) ** j * math.comb(n, j) * psi(G, (n / 2.0 - j) * h)
    return total / h**n


def tilt_derivative_check(G: Nonlinearity, n: int, h: float = 0.05, tolerance: float = 1e-4) -> TiltCheck:
    """c_n(G) против ψ_G^{(n)}(0)/n!: центральная разность порядка n с экстраполяцией Ричардсона по h, h/2."""
    if not 0 <= n <= 4:
        raise ChaosError("bad_order", "проверка наклона поддерживает n ≤ 4")
    spectrum = hermite_coeffs(G, nmax=max(n, as_nonlinearity(G).degree or n))
    coarse = _central_difference(G, n, h)
    fine = _central_difference(G, n, h / 2.0)
    fd = (4.0 * fine - coarse) / 3.0 / math.factorial(n)
    c = spectrum.coefficient(n)
    return TiltCheck(n=n, c_quadrature=c, c_finite_difference=fd, tolerance=tolerance * max(1.0, abs(c)))


# ---------------- хаос-функционалы ----------------


def canonical_key(modes: Iterable[int]) -> MonomialKey:
    return tuple(sorted(Counter(int(k) for k in modes).items()))


def key_order(key: MonomialKey) -> int:
    return sum(m for _, m in key)


def negate_key(key: MonomialKey) -> MonomialKey:
    return tuple(sorted((-k, m) for k, m in key))


def key_weight(key: MonomialKey) -> int:
    """E|⟦·⟧|² = Π m! по знаковым модам."""
    return math.prod(math.factorial(m) for _, m in key)


def merge_keys(a: MonomialKey, b: MonomialKey) -> MonomialKey:
    counts: Dict[int, int] = defaultdict(int)
    for k, m in a + b:
        counts[k] += m
    return tuple(sorted(counts.items()))


@dataclass(frozen=True, eq=False)
class ChaosFunctional:
    """Разреженная сумма мономов Вика с комплексными коэффициентами."""

    N: int
    terms: Mapping[MonomialKey, complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean: Dict[MonomialKey, complex] = {}
        for key, coef in self.terms.items():
            for k, m in key:
                if k == 0 or abs(k) > self.N:
                    raise ChaosError("mode_outside", f"мода {k} вне Y_{self.N}")
                if m < 1:
                    raise ChaosError("bad_multiplicity", f"кратность {m} у моды {k}")
            if coef != 0:
                clean[key] = complex(coef)
        object.__setattr__(self, "terms", MappingProxyType(clean))

    # --- конструкторы ---

    @classmethod
    def constant(cls, N: int, value: complex) -> "ChaosFunctional":
        return cls(N, {(): value})

    @classmethod
    def monomial(cls, N: int, modes: Sequence[int], coefficient: complex = 1.0) -> "ChaosFunctional":
        return cls(N, {canonical_key(modes): coefficient})

    @classmethod
    def linear(cls, N: int, phi: Union[FourierField, FourierMode]) -> "ChaosFunctional":
        """⟦⟨η, φ⟩⟧ = Σ_k φ̂(−k) η_k."""
        terms: Dict[MonomialKey, complex] = {}
        for k in list(range(-N, 0)) + list(range(1, N + 1)):
            coef = _phi_hat(phi, -k)
            if coef != 0:
                terms[((k, 1),)] = coef
        return cls(N, terms)

    # --- свойства ---

    @property
    def term_count(self) -> int:
        return len(self.terms)

    @property
    def orders(self) -> List[int]:
        return sorted({key_order(k) for k in self.terms})

    @property
    def max_order(self) -> int:
        return max((key_order(k) for k in self.terms), default=0)

    @property
    def constant_term(self) -> complex:
        return self.terms.get((), 0j)

    def is_real(self, tol: float = 1e-12) -> bool:
        for key, coef in self.terms.items():
            partner = self.terms.get(negate_key(key), 0j)
            if abs(partner - np.conj(coef)) > tol * max(1.0, abs(coef)):
                return False
        return True

    # --- арифметика ---

    def map_terms(self, fn: Callable[[MonomialKey, complex], complex]) -> "ChaosFunctional":
        return ChaosFunctional(self.N, {k: fn(k, c) for k, c in self.terms.items()})

    def scaled(self, factor: complex) -> "ChaosFunctional":
        return self.map_terms(lambda _k, c: c * factor)

    def __add__(self, other: "ChaosFunctional") -> "ChaosFunctional":
        n = max(self.N, other.N)
        merged: Dict[MonomialKey, complex] = dict(self.terms)
        for key, coef in other.terms.items():
            merged[key] = merged.get(key, 0j) + coef
        return ChaosFunctional(n, merged)

    def __sub__(self, other: "ChaosFunctional") -> "ChaosFunctional":
        return self + other.scaled(-1.0)

    def max_abs_difference(self, other: "ChaosFunctional") -> float:
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(k, 0j) - other.terms.get(k, 0j)) for k in keys), default=0.0)


def _phi_hat(phi: Union[FourierField, FourierMode], k: int) -> complex:
    if isinstance(phi, FourierMode):
        return 1.0 + 0j if k == phi.k else 0j
    return phi.coefficient(k)


def wick_product(a: ChaosFunctional, b: ChaosFunctional) -> ChaosFunctional:
    """⟦A⟧ ⋄ ⟦B⟧ = ⟦AB⟧: кратности складываются, коэффициенты перемножаются."""
    out: Dict[MonomialKey, complex] = defaultdict(complex)
    for ka, ca in a.terms.items():
        for kb, cb in b.terms.items():
            out[merge_keys(ka, kb)] += ca * cb
    return ChaosFunctional(max(a.N, b.N), dict(out))


def wick_power(N: int, phi: Union[FourierField, FourierMode], n: int) -> ChaosFunctional:
    """⟦⟨η, φ⟩^n⟧; при ‖φ‖ = 1 это H_n(⟨η, φ⟩)."""
    result = ChaosFunctional.constant(N, 1.0)
    linear = ChaosFunctional.linear(N, phi)
    for _ in range(n):
        result = wick_product(result, linear)
    return result


# ---------------- разложение G(λΠη) ----------------


def _multisets(N: int, size: int, target: int) -> Iterator[List[int]]:
    """Неубывающие последовательности мод из ±1..±N длины size с суммой target."""
    modes = [k for k in range(-N, N + 1) if k != 0]
    chosen: List[int] = []

    def rec(start: int, remaining: int, need: int) -> Iterator[List[int]]:
        if remaining == 0:
            if need == 0:
                yield list(chosen)
            return
        for idx in range(start, len(modes)):
            k = modes[idx]
            if remaining * k > need:
                return
            if k + (remaining - 1) * N < need:
                continue
            chosen.append(k)
            yield from rec(idx, remaining - 1, need - k)
            chosen.pop()

    yield from rec(0, size, target)


def _targets(phi: Union[FourierField, FourierMode]) -> List[Tuple[int, complex]]:
    # ⟨e^{iKx}, φ⟩ ≠ 0 только при φ̂(−K) ≠ 0
    if isinstance(phi, FourierMode):
        return [(-phi.k, 1.0 + 0j)]
    out = []
    for K in list(range(-phi.N, 0)) + list(range(1, phi.N + 1)):
        coef = phi.coefficient(-K)
        if coef != 0:
            out.append((K, coef))
    return out


def chaos_expand(
    G: Nonlinearity,
    N: int,
    phi: Union[FourierField, FourierMode],
    nmax: Optional[int] = None,
    *,
    term_budget: int = DEFAULT_TERM_BUDGET,
    spectrum: Optional[HermiteSpectrum] = None,
) -> ChaosFunctional:
    """⟨G(λΠ_0^N η) − c_0, φ⟩ как сумма мономов Вика.

    Вклад упорядоченного набора (k₁..k_n): c_n λ^n (2π)^{−(n−1)/2} φ̂(−Σk_i);
    канонический моном собирает n!/Π m! упорядоченных наборов.
    """
    spec = spectrum if spectrum is not None else hermite_coeffs(G, nmax)
    lam = local_amplitude(N)
    terms: Dict[MonomialKey, complex] = defaultdict(complex)
    targets = _targets(phi)
    for n in range(1, spec.nmax + 1):
        c_n = spec.coefficient(n)
        if c_n == 0.0:
            continue
        weight = c_n * lam**n * (2.0 * math.pi) ** (-(n - 1) / 2.0)
        for K, phi_coef in targets:
            for modes in _multisets(N, n, K):
                key = canonical_key(modes)
                count = math.factorial(n) // key_weight(key)
                terms[key] += weight * count * phi_coef
                if len(terms) > term_budget:
                    raise ChaosError(
                        "term_budget",
                        f"разложение превысило бюджет {term_budget} мономов (N={N}, n={n})",
                    )
    result = ChaosFunctional(N, dict(terms))
    logger.debug("[VERIFY] chaos_expand N=%d nmax=%d: %d мономов", N, spec.nmax, result.term_count)
    return result


# ---------------- вычисление и моменты ----------------


def _spectrum_of(N: int, eta: Union[FourierField, np.ndarray]) -> np.ndarray:
    if isinstance(eta, FourierField):
        if eta.N < N:
            raise ChaosError("mode_outside", f"образец из Y_{eta.N} меньше Y_{N}")
        return full_spectrum(eta.coeffs[:N])
    arr = np.asarray(eta, dtype=np.complex128)
    if arr.shape != (2 * N + 1,):
        raise ChaosError("bad_shape", f"ожидался спектр длины {2 * N + 1}")
    return arr


def _complex_hermite(z: complex, w: complex, a_max: int, b_max: int) -> np.ndarray:
    """H_{a,b}(z, w): H_{a+1,b} = zH_{a,b} − bH_{a,b−1}, H_{a,b+1} = wH_{a,b} − aH_{a−1,b}."""
    table = np.zeros((a_max + 1, b_max + 1), dtype=np.complex128)
    table[0, 0] = 1.0
    for a in range(a_max):
        table[a + 1, 0] = z * table[a, 0]
    for b in range(b_max):
        for a in range(a_max + 1):
            value = w * table[a, b]
            if a:
                value -= a * table[a - 1, b]
            table[a, b + 1] = value
    return table


def evaluate(phi: ChaosFunctional, eta: Union[FourierField, np.ndarray]) -> complex:
    """Значение Φ на образце η (поле из Y_N или полный спектр k = −N..N).

    Комплексное: проекции на e_{−ℓ} комплексны. Для вещественных Φ (``is_real``)
    мнимая часть на уровне округления, см. ``evaluate_real``.
    """
    N = phi.N
    spectrum = _spectrum_of(N, eta)

    need: Dict[int, List[int]] = defaultdict(lambda: [0, 0])
    for key in phi.terms:
        for k, m in key:
            slot = need[abs(k)]
            idx = 0 if k > 0 else 1
            slot[idx] = max(slot[idx], m)
    tables = {
        k: _complex_hermite(spectrum[N + k], spectrum[N - k], a, b) for k, (a, b) in need.items()
    }

    total = 0j
    for key, coef in phi.terms.items():
        powers: Dict[int, List[int]] = defaultdict(lambda: [0, 0])
        for k, m in key:
            powers[abs(k)][0 if k > 0 else 1] = m
        value = coef
        for k, (a, b) in powers.items():
            value *= tables[k][a, b]
        total += value
    return complex(total)


def evaluate_real(phi: ChaosFunctional, eta: Union[FourierField, np.ndarray]) -> float:
    if not phi.is_real():
        raise ChaosError("not_real", "функционал не вещественный: нет пары c(−key) = conj c(key)")
    return float(evaluate(phi, eta).real)



def second_moment(phi: ChaosFunctional) -> float:
    """E|Φ|² = Σ |c|² Π m!."""
    return float(sum(abs(c) ** 2 * key_weight(k) for k, c in phi.terms.items()))


def lp_block_variance(G: Nonlinearity, N: int, q: int, *, term_budget: int = DEFAULT_TERM_BUDGET) -> float:
    """E‖Δ_q(G(λΠ_0^N η) − c_0)‖²_{L²} из вторых моментов разложения по модам блока."""
    spec = hermite_coeffs(G)
    reach = spec.nmax * N
    if q < -1:
        return 0.0
    lo, hi = (1, 1) if q == -1 else (max(2**q, 2), min(2 ** (q + 1) - 1, reach))
    total = 0.0
    for ell in range(lo, hi + 1):
        for sign in (1, -1):
            phi = chaos_expand(G, N, FourierMode(-sign * ell), spectrum=spec, term_budget=term_budget)
            total += second_moment(phi)
    return total


def lp_block_range(G: Nonlinearity, N: int) -> List[int]:
    """Непустые блоки q для G(λΠ_0^N η): q = −1 и 1..⌊log₂(nmax·N)⌋."""
    reach = hermite_coeffs(G).nmax * N
    return [-1] + list(range(1, reach.bit_length()))


@dataclass
class LPBlockBound:
    N: int
    ratios: Dict[int, float]  # q → E|Δ_qΦ|² / min{ε2^q, 1}

    @property
    def constant(self) -> float:
        return max(self.ratios.values())


def lp_block_bound(G: Nonlinearity, N: int, *, term_budget: int = DEFAULT_TERM_BUDGET) -> LPBlockBound:
    """Отношения блочных дисперсий к min{ε2^q, 1}, ε = 1/(2N)."""
    eps = 1.0 / (2.0 * N)
    ratios = {}
    for q in lp_block_range(G, N):
        ratios[q] = lp_block_variance(G, N, q, term_budget=term_budget) / min(eps * 2.0**q, 1.0)
    return LPBlockBound(N=N, ratios=ratios)


@dataclass
class LPBoundStudy:
    bounds: List[LPBlockBound]
    C: float  # максимум по всей сетке (N, q)
    C_spread: float  # max C(N) / min C(N)
    max_spread: float = 2.0

    @property
    def stable(self) -> bool:
        return self.C_spread <= self.max_spread


DEFAULT_LP_NS = (8, 16, 32)


def lp_block_bound_study(
    G: Nonlinearity,
    Ns: Sequence[int] = DEFAULT_LP_NS,
    *,
    max_spread: float = 2.0,
    term_budget: int = DEFAULT_TERM_BUDGET,
) -> LPBoundStudy:
    """Одна константа C для E|Δ_qΦ|² ≤ C·min{ε2^q, 1} на всей сетке N."""
    bounds = [lp_block_bound(G, N, term_budget=term_budget) for N in Ns]
    cs = [b.constant for b in bounds]
    spread = max(cs) / min(cs)
    logger.info("[VERIFY] lp-блоки: C(N)=%s spread=%.3f", ["%.3f" % c for c in cs], spread)
    return LPBoundStudy(bounds=bounds, C=max(cs), C_spread=spread, max_spread=max_spread)


__all__ = [
    "ChaosFunctional",
    "HermiteSpectrum",
    "LPBlockBound",
    "LPBoundStudy",
    "MonomialKey",
    "Nonlinearity",
    "TiltCheck",
    "as_nonlinearity",
    "canonical_key",
    "chaos_expand",
    "default_quad_order",
    "evaluate",
    "evaluate_real",
    "gauss_nodes",
    "gaussian_expectation",
    "gradient_energy",
    "hermite",
    "hermite_coeffs",
    "hermite_polynomial",
    "hermite_table",
    "key_order",
    "key_weight",
    "lp_block_bound",
    "lp_block_bound_study",
    "lp_block_range",
    "lp_block_variance",
    "merge_keys",
    "negate_key",
    "psi",
    "second_moment",
    "tilt_derivative_check",
    "wick_power",
    "wick_product",
]
