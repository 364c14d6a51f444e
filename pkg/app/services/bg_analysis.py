"""Статистическая проверка: стационарность, квадратичная вариация,
нелинейность Бюргерса и остатки принципа Больцмана–Гиббса.

Функции с суффиксом ``_value``/``_samples`` — свёртки одной траектории: их
передают в ``ensemble_map`` через ``functools.partial``, и воркер возвращает
только несколько чисел.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.errors import AnalysisError
from app.services.chaos_generator import energy, solve_poisson
from app.services.hermite_chaos import (
    Nonlinearity,
    as_nonlinearity,
    chaos_expand,
    gradient_energy,
    hermite_coeffs,
)
from app.services.sde_simulator import (
    SimConfig,
    Trajectory,
    decompose,
    ensemble_map,
    linear_coefficient,
    quadratic_coefficient,
)
from app.services.spectral_core import (
    FourierMode,
    apply_pointwise,
    epsilon,
    from_grid_array,
    local_amplitude,
    next_pow2,
    to_grid_array,
    wavenumbers,
)
from app.services.stats import (
    ScalingFit,
    StatReport,
    bonferroni_threshold,
    fit_power_law,
    flag_gate,
    lower_gate,
    mean_and_stderr,
    richardson,
    tolerance_gate,
    upper_gate,
    z_gate,
)

logger = logging.getLogger(__name__)

MIN_STATIONARITY_ENSEMBLE = 100
MIN_QV_LEVELS = 4
CHUNK = 2048

Ensemble = Union[Sequence[Trajectory], Sequence[complex], np.ndarray]


# ---------------- общие хелперы ----------------


def time_index(traj: Trajectory, t: float) -> int:
    j = int(round(t / traj.dt))
    if j < 0 or j >= traj.records:
        raise AnalysisError("time_outside", f"t={t:g} вне записанного интервала [0, {traj.times[-1]:g}]")
    return j


def _pointwise_rows(states: np.ndarray, func, grid: int, n_out: int) -> np.ndarray:
    out = np.empty((states.shape[0], n_out), dtype=np.complex128)
    for start in range(0, states.shape[0], CHUNK):
        block = states[start:start + CHUNK]
        out[start:start + CHUNK] = apply_pointwise(block, func, grid, n_out)
    return out


def _select(modes: np.ndarray, ell: int) -> np.ndarray:
    if ell == 0:
        return np.zeros(modes.shape[0], dtype=np.complex128)
    column = modes[:, abs(ell) - 1]
    return column if ell > 0 else np.conj(column)


def _trapezoid(values: np.ndarray, dt: float, start: int, stop: int) -> complex:
    if stop <= start:
        return 0j
    seg = values[start:stop + 1]
    return complex(dt * (seg.sum() - 0.5 * (seg[0] + seg[-1])))


def _cumulative_trapezoid(values: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros(values.shape, dtype=np.result_type(values, np.float64))
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]), axis=0)
    return out


def _as_values(ensemble: Ensemble, reducer: Callable[[Trajectory], complex]) -> np.ndarray:
    items = list(ensemble)
    if items and isinstance(items[0], Trajectory):
        return np.array([reducer(t.require_completed()) for t in items])
    return np.asarray(items)


# ---------------- стационарность ----------------


def stationarity_times(records: int, count: int = 3) -> List[int]:
    """Индексы записей для проверки: равномерно по (0, T], без начального момента."""
    return sorted({max(1, (records - 1) * (i + 1) // count) for i in range(count)})


def stationarity_samples(traj: Trajectory, count: int = 3) -> np.ndarray:
    traj.require_completed()
    return traj.states[stationarity_times(traj.records, count)]


def stationarity_report(
    samples: np.ndarray,
    times: Optional[Sequence[float]] = None,
    *,
    cross: bool = True,
    sigma: float = 4.0,
    prefix: str = "",
) -> List[StatReport]:
    """Гейты μ^ε по ансамблю состояний формы (E, моменты, N).

    E[û_k] = 0, E|û_k|² = 1, E|û_k|⁴ = 2, E[û_k û_j] = E[û_k conj û_j] = 0 (k ≠ j),
    E[û_k²] = 0; порог по Бонферрони на всё семейство.
    """
    samples = np.asarray(samples)
    if samples.ndim != 3:
        raise AnalysisError("bad_shape", "ожидается массив (ансамбль, моменты, N)")
    size, n_times, N = samples.shape
    if size < MIN_STATIONARITY_ENSEMBLE:
        raise AnalysisError(
            "ensemble_too_small",
            f"для проверки стационарности нужно ≥ {MIN_STATIONARITY_ENSEMBLE} траекторий, есть {size}",
        )
    times = list(times) if times is not None else list(range(n_times))

    specs: List[Tuple[str, np.ndarray, float, Dict[str, object]]] = []
    for ti in range(n_times):
        x = samples[:, ti, :]
        for k in range(1, N + 1):
            col = x[:, k - 1]
            meta = {"N": N, "ell": k, "lag": times[ti], "ensemble": size}
            specs.append(("mean_re", col.real, 0.0, meta))
            specs.append(("mean_im", col.imag, 0.0, meta))
            specs.append(("second", np.abs(col) ** 2, 1.0, meta))
            specs.append(("fourth", np.abs(col) ** 4, 2.0, meta))
            if cross:
                sq = col * col
                specs.append(("square_re", sq.real, 0.0, meta))
                specs.append(("square_im", sq.imag, 0.0, meta))
        if cross:
            for k in range(1, N + 1):
                for j in range(k + 1, N + 1):
                    a, b = x[:, k - 1], x[:, j - 1]
                    meta = {"N": N, "ell": k, "M": j, "lag": times[ti], "ensemble": size}
                    prod, mixed = a * b, a * np.conj(b)
                    specs.append(("cross_re", prod.real, 0.0, meta))
                    specs.append(("cross_im", prod.imag, 0.0, meta))
                    specs.append(("mixed_re", mixed.real, 0.0, meta))
                    specs.append(("mixed_im", mixed.imag, 0.0, meta))

    threshold = bonferroni_threshold(len(specs), sigma)
    reports = []
    for name, values, target, meta in specs:
        mean, err = mean_and_stderr(values)
        reports.append(z_gate(f"{prefix}stationarity_{name}", mean, err, target, threshold, **meta))
    failed = sum(1 for r in reports if not r.passed)
    logger.info("[VERIFY] стационарность: %d гейтов, провалено %d (порог z=%.2f)", len(reports), failed, threshold)
    return reports


def richardson_stationarity(
    coarse: np.ndarray,
    fine: np.ndarray,
    times: Optional[Sequence[float]] = None,
    sigma: float = 4.0,
) -> List[StatReport]:
    """E|û_k|² на сетках dt и dt/2, экстраполяция 2m(dt/2) − m(dt) против 1."""
    if coarse.shape[1:] != fine.shape[1:]:
        raise AnalysisError("bad_shape", "ансамбли для экстраполяции должны совпадать по форме")
    _, n_times, N = coarse.shape
    times = list(times) if times is not None else list(range(n_times))
    threshold = bonferroni_threshold(n_times * N, sigma)
    reports = []
    for ti in range(n_times):
        for k in range(1, N + 1):
            m_c, e_c = mean_and_stderr(np.abs(coarse[:, ti, k - 1]) ** 2)
            m_f, e_f = mean_and_stderr(np.abs(fine[:, ti, k - 1]) ** 2)
            value, err = richardson(m_c, m_f, e_c, e_f)
            reports.append(
                z_gate("stationarity_richardson", value, err, 1.0, threshold,
                       N=N, ell=k, lag=times[ti], ensemble=coarse.shape[0])
            )
    return reports


def stationarity_ensemble(config: SimConfig, size: int, threads: int = 1, count: int = 3) -> Tuple[np.ndarray, List[float]]:
    """Состояния ансамбля в моменты ``stationarity_times`` и сами моменты."""
    samples = np.array(ensemble_map(config, size, partial(stationarity_samples, count=count), threads))
    times = [j * config.dt for j in stationarity_times(config.steps + 1, count)]
    return samples, times


def second_moment_value(traj: Trajectory, ell: int = 1) -> float:
    """|û_ℓ|² в конце траектории: свёртка для оценки смещения по dt."""
    return float(abs(traj.require_completed().states[-1, ell - 1]) ** 2)


# ---------------- усреднение по времени ----------------


def _full_grid(N: int, degree: int, oversample: int = 4) -> int:
    # моды G(λu) до degree·N извлекаются без алиасинга
    return next_pow2(max(2 * max(degree, 1) * N + 2, oversample * N))


def time_integral(traj: Trajectory, G: Nonlinearity, t: float) -> np.ndarray:
    """∫₀^t G(λu_s(x)) ds на сетке (трапеции по записям)."""
    nl = as_nonlinearity(G)
    degree = nl.degree if nl.degree is not None else 4
    lam = local_amplitude(traj.N)
    grid = _full_grid(traj.N, degree)
    stop = time_index(traj, t)
    total = np.zeros(grid)
    for start in range(0, stop + 1, CHUNK):
        block = traj.states[start:min(stop + 1, start + CHUNK)]
        values = nl.func(to_grid_array(lam * block, grid))
        weights = np.full(block.shape[0], traj.dt)
        if start == 0:
            weights[0] *= 0.5
        if start + block.shape[0] == stop + 1:
            weights[-1] *= 0.5
        total += weights @ values
    if stop == 0:
        total[:] = 0.0
    return total


def time_average_value(traj: Trajectory, G: Nonlinearity, t: float) -> float:
    """sup_x |∫₀^t G(λu_s(x)) ds − c₀(G)t|."""
    c0 = hermite_coeffs(G, nmax=0).coefficient(0)
    t_eff = time_index(traj, t) * traj.dt
    return float(np.max(np.abs(time_integral(traj.require_completed(), G, t) - c0 * t_eff)))


def negative_norm_value(traj: Trajectory, G: Nonlinearity, t: float, s: float = -0.6) -> float:
    """‖ε^{−1/2}∫₀^t (G(λu_s) − c₀) ds‖_{H^s}."""
    nl = as_nonlinearity(G)
    degree = nl.degree if nl.degree is not None else 4
    integral = time_integral(traj.require_completed(), G, t)
    n_out = degree * traj.N
    modes = from_grid_array(integral, n_out)
    weights = wavenumbers(n_out) ** (2.0 * s)
    norm = math.sqrt(2.0 * float(np.sum(weights * np.abs(modes) ** 2)))
    return norm / math.sqrt(epsilon(traj.N))


def time_average(G: Nonlinearity, ensemble: Ensemble, t: float, **metadata) -> StatReport:
    """E[sup_x |∫₀^t G ds − c₀t|] по ансамблю; гейт: тренд по N в ``time_average_study``."""
    values = _as_values(ensemble, lambda tr: time_average_value(tr, G, t)).astype(np.float64)
    mean, err = mean_and_stderr(values)
    metadata.setdefault("ensemble", len(values))
    return StatReport("time_average_sup", mean, err, None, 0.0, "trend", True, dict(metadata, lag=t))


@dataclass
class TimeAverageStudy:
    reports: List[StatReport]
    trend: StatReport


def time_average_study(
    G: Nonlinearity,
    Ns: Sequence[int] = (8, 16, 32, 64),
    t: float = 0.25,
    ensemble: int = 20,
    seed: int = 0,
    threads: int = 1,
    *,
    negative_norm: bool = False,
) -> TimeAverageStudy:
    """sup-отклонение (или H^{−1/2−}-норма ε^{−1/2}-масштабированного интеграла) по N."""
    reports = []
    for N in Ns:
        config = SimConfig(N=N, T=t, F=(0.0,), seed=seed, record_drift=False, record_noise=False)
        if negative_norm:
            values = ensemble_map(config, ensemble, partial(_negative_norm_reducer, G, t), threads)
            mean, err = mean_and_stderr(values)
            reports.append(StatReport("time_average_hneg", mean, err, None, 0.0, "trend", True,
                                      {"N": N, "lag": t, "ensemble": ensemble}))
        else:
            values = ensemble_map(config, ensemble, partial(_time_average_reducer, G, t), threads)
            reports.append(time_average(G, values, t, N=N))
    estimates = [r.estimate for r in reports]
    if negative_norm:
        ok = max(estimates) <= 2.0 * estimates[0]
        trend = flag_gate("time_average_hneg_bounded", max(estimates) / estimates[0], ok, gate="upper")
    else:
        ok = all(b < a for a, b in zip(estimates, estimates[1:]))
        trend = flag_gate("time_average_trend", estimates[-1] / estimates[0], ok, gate="trend")
    return TimeAverageStudy(reports=reports, trend=trend)


def _time_average_reducer(G, t, traj):
    return time_average_value(traj, G, t)


def _negative_norm_reducer(G, t, traj):
    return negative_norm_value(traj, G, t)


# ---------------- нелинейность Бюргерса ----------------


def square_mode_path(states: np.ndarray, M: int, ell: int) -> np.ndarray:
    """[(Π_0^M u)²]^(ℓ) по всем записям; при |ℓ| > 2M тождественный ноль."""
    if abs(ell) > 2 * M or ell == 0:
        return np.zeros(states.shape[0], dtype=np.complex128)
    grid = next_pow2(4 * M + 2)
    modes = _pointwise_rows(states[:, :M], np.square, grid, 2 * M)
    return _select(modes, ell)


def burgers_integral(traj: Trajectory, M: int, ell: int) -> np.ndarray:
    """⟨B^M_t, e_{−ℓ}⟩ = −∫₀^t ⟨(Π_0^M u_s)², ∂_x e_{−ℓ}⟩ ds по всем t_j."""
    if M > traj.N:
        raise AnalysisError("cutoff_too_large", f"M={M} больше N={traj.N}")
    values = 1j * ell * square_mode_path(traj.states, M, ell)
    return _cumulative_trapezoid(values, traj.dt)


def burgers_increment_value(traj: Trajectory, M: int, ell: int, s: float, t: float) -> complex:
    path = burgers_integral(traj.require_completed(), M, ell)
    return complex(path[time_index(traj, t)] - path[time_index(traj, s)])


def burgers_cauchy_value(traj: Trajectory, M: int, ell: int, t: float) -> complex:
    """B^{2M}_t − B^M_t."""
    j = time_index(traj, t)
    return complex(burgers_integral(traj, 2 * M, ell)[j] - burgers_integral(traj, M, ell)[j])


def _burgers_reducer(Ms: Tuple[int, ...], ell: int, s: float, t: float, traj: Trajectory) -> np.ndarray:
    traj.require_completed()
    i, j = time_index(traj, s), time_index(traj, t)
    paths = {M: burgers_integral(traj, M, ell) for M in sorted(set(Ms) | {2 * M for M in Ms})}
    increments = [paths[M][j] - paths[M][i] for M in Ms]
    cauchy = [paths[2 * M][j] - paths[M][j] for M in Ms]
    return np.array(increments + cauchy)


@dataclass
class BurgersStudy:
    reports: List[StatReport]
    gates: List[StatReport]


def burgers_study(
    Ms: Sequence[int] = (4, 8, 16, 32),
    ell: int = 1,
    s: float = 0.0,
    t: float = 0.25,
    ensemble: int = 40,
    seed: int = 0,
    threads: int = 1,
    N: Optional[int] = None,
) -> BurgersStudy:
    """Приращения B^M по стационарному ОУ: C(M) = E|B^M_t − B^M_s|²/(ℓ²|t−s|²M) и Коши по M.

    Гейт на верхнюю границу: C(M) ≤ 2·C(M_min). Разности B^{2M} − B^M убывают по M.
    """
    Ms = tuple(sorted(Ms))
    N = N if N is not None else 2 * Ms[-1]
    if 2 * Ms[-1] > N:
        raise AnalysisError("cutoff_too_large", f"для Коши по M нужно N ≥ {2 * Ms[-1]}")
    config = SimConfig(N=N, T=t, F=(0.0,), seed=seed, record_drift=False, record_noise=False)
    rows = np.array(ensemble_map(config, ensemble, partial(_burgers_reducer, Ms, ell, s, t), threads))
    second = np.abs(rows) ** 2
    lag = t - s
    reports, constants, cauchy = [], [], []
    for idx, M in enumerate(Ms):
        mean, err = mean_and_stderr(second[:, idx])
        scale = ell * ell * lag * lag * M
        constants.append(mean / scale)
        reports.append(StatReport("burgers_increment_C", mean / scale, err / scale, None, 0.0, "recorded", True,
                                  {"N": N, "M": M, "ell": ell, "lag": lag, "ensemble": ensemble}))
        c_mean, c_err = mean_and_stderr(second[:, len(Ms) + idx])
        cauchy.append(c_mean)
        reports.append(StatReport("burgers_cauchy", c_mean, c_err, None, 0.0, "recorded", True,
                                  {"N": N, "M": M, "ell": ell, "lag": t, "ensemble": ensemble}))
    gates = [
        upper_gate("burgers_increment_C_max", max(constants), 0.0, 2.0 * constants[0], N=N, ell=ell, lag=lag),
        flag_gate("burgers_cauchy_trend", cauchy[-1] / cauchy[0] if cauchy[0] > 0 else 0.0,
                  all(b < a for a, b in zip(cauchy, cauchy[1:])), gate="trend", N=N, ell=ell),
    ]
    logger.info("[VERIFY] Бюргерс: C(M)=%s", ", ".join(f"{c:.3g}" for c in constants))
    return BurgersStudy(reports=reports, gates=gates)


# ---------------- остатки Больцмана–Гиббса ----------------


VARIANT_A = "A"
VARIANT_B = "B"


def drift_path(traj: Trajectory) -> np.ndarray:
    """Дрейф во всех состояниях траектории (узлы трапеций), с учётом обращения времени."""
    return traj.drift_path()


def residual_path(
    traj: Trajectory,
    ell: int,
    M: int,
    variant: str,
    *,
    c2_override: Optional[float] = None,
) -> np.ndarray:
    """⟨остаток, e_{−ℓ}⟩ по записям.

    term1 — записанный дрейф; term2 = (c₁(F) − c1)λ^{−1}·iℓ·û(ℓ);
    term3 = c₂·iℓ·[(Π_0^M u)²]^(ℓ). Вариант A вычитает term2, B — term2 и term3.
    """
    if variant not in (VARIANT_A, VARIANT_B):
        raise AnalysisError("bad_variant", f"вариант {variant!r}: ожидается A или B")
    if M > traj.N:
        raise AnalysisError("cutoff_too_large", f"M={M} больше N={traj.N}")
    cfg = traj.config
    term1 = _select(drift_path(traj), ell)
    c1 = linear_coefficient(cfg.F)
    term2 = (c1 - cfg.c1) / local_amplitude(cfg.N) * 1j * ell * traj.mode_path(ell)
    residual = term1 - term2
    if variant == VARIANT_B:
        c2 = quadratic_coefficient(cfg.F) if c2_override is None else c2_override
        residual = residual - c2 * 1j * ell * square_mode_path(traj.states, M, ell)
    return residual


def bg_residual_value(
    traj: Trajectory,
    ell: int,
    s: float,
    t: float,
    M: int,
    variant: str,
    c2_override: Optional[float] = None,
) -> complex:
    """∫_s^t ⟨остаток, e_{−ℓ}⟩ dr по трапециям."""
    if not 0 <= s < t:
        raise AnalysisError("bad_interval", f"нужно 0 ≤ s < t, получено s={s:g}, t={t:g}")
    if t > s + 1:
        raise AnalysisError("bad_interval", "длина интервала не больше 1")
    path = residual_path(traj.require_completed(), ell, M, variant, c2_override=c2_override)
    return _trapezoid(path, traj.dt, time_index(traj, s), time_index(traj, t))


def bg_residual_pair(ell: int, M: int, lag: float, traj: Trajectory) -> np.ndarray:
    """Свёртка для ``ensemble_map``: ∫_0^lag остатков вариантов A и B."""
    return np.array([
        bg_residual_value(traj, ell, 0.0, lag, M, VARIANT_A),
        bg_residual_value(traj, ell, 0.0, lag, M, VARIANT_B),
    ])


def bg_bound(F: Sequence[float], N: int, ell: int, lag: float, M: int, variant: str) -> float:
    """Правая часть оценки без константы: A — τ^{3/2}ℓ²E[F′²], B — τℓ²(1/M + ε log²N)E[F′²]."""
    grad = gradient_energy(list(F))
    if variant == VARIANT_A:
        return lag**1.5 * ell**2 * grad
    return lag * ell**2 * (1.0 / M + epsilon(N) * math.log(N) ** 2) * grad


def _residual_report(
    second: np.ndarray,
    F: Sequence[float],
    N: int,
    ell: int,
    lag: float,
    M: int,
    variant: str,
) -> StatReport:
    """Отчёт по выборке |∫ остаток|²: оценка, граница, константы C и (для B) C_M."""
    mean, err = mean_and_stderr(second)
    bound = bg_bound(F, N, ell, lag, M, variant)
    constant = mean / bound if bound > 0 else (0.0 if mean == 0 else math.inf)
    metadata = {"N": N, "M": M, "ell": ell, "lag": lag, "ensemble": len(second), "C": constant}
    if variant == VARIANT_B:
        # часть границы от 1/M: C_M = M·оценка / (τℓ²E[F′²])
        scale = lag * ell**2 * gradient_energy(list(F))
        metadata["C_M"] = M * mean / scale if scale > 0 else math.inf
    return StatReport(
        name=f"bg_residual_{variant}",
        estimate=mean,
        mc_stderr=err,
        target=None,
        threshold=bound,
        gate="recorded",
        passed=bool(math.isfinite(constant)),
        metadata=metadata,
    )


def bg_residual_variance(
    ensemble: Ensemble,
    ell: int,
    s: float,
    t: float,
    M: int,
    variant: str,
    *,
    F: Optional[Sequence[float]] = None,
    N: Optional[int] = None,
    c2_override: Optional[float] = None,
) -> StatReport:
    """E|∫_s^t ⟨остаток, e_{−ℓ}⟩ dr|² и записанная константа C = оценка/граница.

    Ансамбль: траектории или уже посчитанные интегралы (тогда нужны F и N).
    """
    items = list(ensemble)
    if items and isinstance(items[0], Trajectory):
        F = items[0].config.F
        N = items[0].N
        for tr in items:
            tr.require_drift()
    if F is None or N is None:
        raise AnalysisError("missing_records", "для готовых интегралов нужно передать F и N")
    values = _as_values(items, lambda tr: bg_residual_value(tr, ell, s, t, M, variant, c2_override))
    second = np.abs(values.astype(np.complex128)) ** 2
    return _residual_report(second, F, N, ell, t - s, M, variant)


def window_second_moments(path: np.ndarray, dt: float, steps: int) -> float:
    """Среднее |∫ path|² по непересекающимся окнам из ``steps`` шагов на всей траектории.

    Траектория стартует из μ^ε, поэтому окна [jτ, (j+1)τ] одинаково распределены.
    """
    if steps < 1:
        raise AnalysisError("bad_interval", "окно должно содержать хотя бы один шаг")
    edges = _cumulative_trapezoid(path, dt)[::steps]
    increments = np.diff(edges)
    if increments.size == 0:
        raise AnalysisError("bad_interval", "окно длиннее траектории")
    return float(np.mean(np.abs(increments) ** 2))


@dataclass(frozen=True)
class ScalingGrid:
    Ns: Tuple[int, ...]
    lags: Tuple[float, ...]
    Ms: Tuple[int, ...]
    lag_B: float
    ensemble: int
    ells: Tuple[int, ...] = (1, 2)
    horizon: float = 0.5

    @property
    def T(self) -> float:
        return max(self.horizon, max(self.lags), self.lag_B)


# Показатель A фитуем на |t−s| ∈ [2⁻⁸, 2⁻⁴]: на длинных лагах при N = 16
# дисперсия уже выходит на линейный рост по τ.
SHORT_LAGS = tuple(2.0**-p for p in range(8, 3, -1))

GRIDS: Dict[str, ScalingGrid] = {
    "small": ScalingGrid(Ns=(16, 32), lags=SHORT_LAGS, Ms=(1, 2, 4, 8), lag_B=0.25, ensemble=64),
    "full": ScalingGrid(Ns=(16, 32, 64), lags=SHORT_LAGS, Ms=(1, 2, 4, 8), lag_B=0.25, ensemble=200),
}
MAX_CONSTANT_SPREAD = 4.0


def _scaling_reducer(grid: ScalingGrid, c2_override: Optional[float], traj: Trajectory) -> np.ndarray:
    """Строка ансамбля: для каждого ℓ оконные |∫ A|² по лагам, затем |∫ B|² по M."""
    traj.require_completed()
    out = []
    for ell in grid.ells:
        path_a = residual_path(traj, ell, traj.N, VARIANT_A)
        out.extend(window_second_moments(path_a, traj.dt, time_index(traj, lag)) for lag in grid.lags)
        steps_b = time_index(traj, grid.lag_B)
        for M in grid.Ms:
            path_b = residual_path(traj, ell, M, VARIANT_B, c2_override=c2_override)
            out.append(window_second_moments(path_b, traj.dt, steps_b))
    return np.array(out)


@dataclass
class ScalingStudy:
    fits: List[ScalingFit]
    reports: List[StatReport]
    gates: List[StatReport]

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)


def _spread(values: Sequence[float]) -> float:
    low = min(values)
    return max(values) / low if low > 0 else math.inf


def bg_scaling_study(
    grid: Union[str, ScalingGrid] = "small",
    F: Sequence[float] = (0.0, 0.0, 1.0),
    seed: int = 0,
    threads: int = 1,
    *,
    ensemble: Optional[int] = None,
    c2_override: Optional[float] = None,
) -> ScalingStudy:
    """Показатели по N: вариант A по |t−s|, вариант B по M (при ℓ = ells[0]).

    Константы проверяются на всей сетке: C для A по (N, ℓ, |t−s|), C_M для B
    по (N, ℓ, M). При неверном c₂ остаток B не зависит от M и C_M растёт как M.
    """
    g = GRIDS[grid] if isinstance(grid, str) else grid
    size = ensemble if ensemble is not None else g.ensemble
    fits: List[ScalingFit] = []
    reports: List[StatReport] = []
    gates: List[StatReport] = []
    constants_a: List[float] = []
    constants_b: List[float] = []
    trend: List[float] = []
    width = len(g.lags) + len(g.Ms)

    for N in g.Ns:
        config = SimConfig(N=N, T=g.T, F=tuple(F), seed=seed, record_noise=False)
        rows = np.array(ensemble_map(config, size, partial(_scaling_reducer, g, c2_override), threads))
        for e, ell in enumerate(g.ells):
            base = e * width
            var_a = []
            for i, lag in enumerate(g.lags):
                report = _residual_report(rows[:, base + i], F, N, ell, lag, N, VARIANT_A)
                reports.append(report)
                var_a.append(report.estimate)
                constants_a.append(report.metadata["C"])
            var_b = []
            for j, M in enumerate(g.Ms):
                report = _residual_report(rows[:, base + len(g.lags) + j], F, N, ell, g.lag_B, M, VARIANT_B)
                reports.append(report)
                var_b.append(report.estimate)
                constants_b.append(report.metadata["C_M"])
            if e:
                continue
            fit_a = fit_power_law("bg_A_lag_exponent", g.lags, var_a, N=N, ell=ell)
            fit_b = fit_power_law("bg_B_M_exponent", g.Ms, var_b, N=N, ell=ell)
            fits.extend([fit_a, fit_b])
            gates.append(lower_gate("bg_A_lag_exponent", fit_a.exponent, 1.4, N=N, ell=ell, ensemble=size))
            gates.append(flag_gate(
                "bg_B_M_exponent", fit_b.exponent, -1.4 <= fit_b.exponent <= -0.6,
                gate="range", N=N, ell=ell, ensemble=size,
            ))
            trend.append(constants_a[-1])  # самый длинный лаг
            logger.info("[VERIFY] bg N=%d: A exp=%.3f, B exp=%.3f", N, fit_a.exponent, fit_b.exponent)

    for label, consts in (("A", constants_a), ("B", constants_b)):
        spread = _spread(consts)
        gates.append(flag_gate(
            f"bg_{label}_constant_spread", spread, spread <= MAX_CONSTANT_SPREAD, gate="upper", ensemble=size,
        ))
        logger.info("[VERIFY] bg %s: константы в [%.3g, %.3g], разброс %.2f", label, min(consts), max(consts), spread)
    # информативно: отношение оценка/граница по N, без гейта
    gates.append(flag_gate(
        "bg_A_ratio_trend",
        trend[-1] / trend[0] if trend[0] > 0 else math.inf,
        True,
        gate="info",
    ))
    return ScalingStudy(fits=fits, reports=reports, gates=gates)


# ---------------- квадратичная вариация ----------------


def quadratic_variation(path: np.ndarray, dt: float, levels: int = MIN_QV_LEVELS, name: str = "qv") -> ScalingFit:
    """Реализованная КВ Σ|X_{t+h} − X_t|² на сетках h = dt·2^m, m = 0..levels−1."""
    if levels < MIN_QV_LEVELS:
        raise AnalysisError("too_few_levels", f"нужно ≥ {MIN_QV_LEVELS} уровней сетки, задано {levels}")
    path = np.asarray(path)
    if (path.shape[0] - 1) < 2 ** (levels - 1):
        raise AnalysisError("too_few_levels", "путь короче самой грубой сетки")
    meshes, values = [], []
    for m in range(levels):
        stride = 2**m
        coarse = path[::stride]
        values.append(float(np.sum(np.abs(np.diff(coarse)) ** 2)))
        meshes.append(dt * stride)
    finest = values[0]
    if min(values) <= 0:
        # точный ноль (например, A ≡ 0): фит в log-log невозможен
        return ScalingFit(name, meshes, values, exponent=math.inf, constant=0.0, residual=0.0,
                          metadata={"finest": finest})
    fit = fit_power_law(name, meshes, values)
    fit.metadata["finest"] = finest
    return fit


def martingale_qv_report(traj: Trajectory, ell: int, levels: int = MIN_QV_LEVELS, tol: float = 0.05) -> StatReport:
    """КВ M-части на самой мелкой сетке против 2Tℓ²."""
    dec = decompose(traj.require_completed(), ell)
    fit = quadratic_variation(dec.M, traj.dt, levels, name="qv_martingale")
    T = traj.times[-1]
    target = 2.0 * T * ell * ell
    return tolerance_gate("qv_martingale", fit.metadata["finest"], target, tol * target, N=traj.N, ell=ell, lag=T)


def antisymmetric_qv_report(traj: Trajectory, ell: int, levels: int = MIN_QV_LEVELS) -> StatReport:
    """КВ A-части строго убывает при измельчении сетки."""
    dec = decompose(traj.require_completed(), ell)
    fit = quadratic_variation(dec.A, traj.dt, levels, name="qv_antisymmetric")
    values = fit.ordinates
    ok = all(a < b for a, b in zip(values, values[1:]))
    return flag_gate("qv_antisymmetric", values[0], ok, gate="trend", N=traj.N, ell=ell, lag=traj.times[-1])


# ---------------- Itô trick ----------------


def functional_path(traj: Trajectory, G: Nonlinearity, ell: int) -> np.ndarray:
    """⟨G(λu_s) − c₀, e_{−ℓ}⟩ по записям, через сетку без алиасинга."""
    nl = as_nonlinearity(G)
    degree = nl.degree if nl.degree is not None else 4
    lam = local_amplitude(traj.N)
    grid = _full_grid(traj.N, degree)
    n_out = max(traj.N, abs(ell))
    modes = _pointwise_rows(lam * traj.states, nl.func, grid, n_out)
    return _select(modes, ell)


def ito_sup_value(traj: Trajectory, G: Nonlinearity, ell: int) -> float:
    """sup_t |∫₀^t Φ(u_s) ds|², Φ = ⟨G(λu) − c₀, e_{−ℓ}⟩."""
    path = _cumulative_trapezoid(functional_path(traj.require_completed(), G, ell), traj.dt)
    return float(np.max(np.abs(path) ** 2))


def _ito_reducer(G, ell, traj):
    return ito_sup_value(traj, G, ell)


def ito_trick_check(
    G: Nonlinearity,
    N: int,
    ell: int,
    T: float,
    ensemble: int,
    seed: int = 0,
    threads: int = 1,
    gate: float = 16.0,
) -> StatReport:
    """E[sup_{t≤T}|∫₀^t Φ(u_s)ds|²] ≤ C·T·E[ℰ(Ψ)], Ψ = ℒ₀^{−1}Φ, по стационарному ОУ."""
    phi = chaos_expand(G, N, FourierMode(-ell))
    report = energy(solve_poisson(phi), T)
    config = SimConfig(N=N, T=T, F=(0.0,), seed=seed, record_drift=False, record_noise=False)
    values = ensemble_map(config, ensemble, partial(_ito_reducer, G, ell), threads)
    mean, err = mean_and_stderr(values)
    constant = mean / report.ito_bound
    out = upper_gate("ito_trick_C", constant, err / report.ito_bound, gate, N=N, ell=ell, lag=T, ensemble=ensemble)
    out.metadata["energy"] = report.expected_energy
    logger.info("[VERIFY] Itô trick N=%d T=%g: C=%.3f", N, T, constant)
    return out


def ito_trick_study(
    G: Nonlinearity = (0.0, 0.0, 1.0),
    ell: int = 1,
    Ts: Sequence[float] = (0.25, 0.5, 1.0),
    Ns: Sequence[int] = (4, 8, 16),
    ensemble: int = 40,
    seed: int = 0,
    threads: int = 1,
) -> List[StatReport]:
    return [ito_trick_check(G, N, ell, T, ensemble, seed, threads) for T in Ts for N in Ns]


__all__ = [
    "BurgersStudy",
    "GRIDS",
    "ScalingGrid",
    "ScalingStudy",
    "TimeAverageStudy",
    "VARIANT_A",
    "VARIANT_B",
    "antisymmetric_qv_report",
    "bg_bound",
    "bg_residual_pair",
    "bg_residual_value",
    "bg_residual_variance",
    "bg_scaling_study",
    "burgers_cauchy_value",
    "burgers_study",
    "burgers_increment_value",
    "burgers_integral",
    "drift_path",
    "functional_path",
    "ito_sup_value",
    "ito_trick_check",
    "ito_trick_study",
    "martingale_qv_report",
    "negative_norm_value",
    "quadratic_variation",
    "residual_path",
    "richardson_stationarity",
    "second_moment_value",
    "square_mode_path",
    "stationarity_ensemble",
    "stationarity_report",
    "stationarity_samples",
    "stationarity_times",
    "time_average",
    "time_average_study",
    "time_average_value",
    "time_index",
    "time_integral",
    "window_second_moments",
]
