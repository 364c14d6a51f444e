"""Конечномерная СДУ в Y_N: дрейф B_F, экспоненциальный шаг Эйлера, ансамбли.

du = Δu dt + B_F(u) dt + √2 ∂_x dW в коэффициентах Фурье:

    û′(k) = e^{−k²dt} û(k) + φ₁(k) B̂(k) + ζ_k,   φ₁(k) = (1 − e^{−k²dt})/k²,
    E|ζ_k|² = 1 − e^{−2k²dt}.

Дрейф B_F(u) = λ^{−2} ∂_x Π_0^N F̃(λu), F̃(x) = F(x) − c1·x, λ = (π/N)^{1/2}.
Каждая траектория хранит дрейф и шум шага, так что разложение S/A/M
восстанавливается из записей без повторного счёта.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from numpy.polynomial import Polynomial

from app.errors import BlowupError, SimulationError, SpectralError
from app.services.gaussian_field import NoiseSeed, complex_gaussians, sample_mu_eps_array
from app.services.hermite_chaos import ChaosFunctional, evaluate, hermite_coeffs
from app.services.chaos_generator import dk_derivative
from app.services.spectral_core import (
    FourierField,
    apply_pointwise,
    dealiased_grid_size,
    epsilon,
    from_real_coordinates,
    full_spectrum,
    local_amplitude,
    to_real_coordinates,
    wavenumbers,
)
from app.services.stats import StatReport, flag_gate, mean_and_stderr, z_gate

logger = logging.getLogger(__name__)

SCHEME = "exponential-euler"
COMPLETED = "completed"
BLOWUP = "blowup"

T_ = TypeVar("T_")


# ---------------- конфиг ----------------


@dataclass(frozen=True)
class SimConfig:
    N: int
    T: float
    F: Tuple[float, ...]
    dt: Optional[float] = None
    oversample: int = 4
    seed: int = 0
    record_drift: bool = True
    record_noise: bool = True
    blowup_threshold: float = 1e6
    c1: float = 0.0
    allow_large_dt: bool = False
    scheme: str = SCHEME
    # негативный контроль: множитель дисперсии шума, в рабочих прогонах 1
    noise_variance_factor: float = 1.0
    eps: float = field(init=False)

    def __post_init__(self) -> None:
        if self.N < 1:
            raise SimulationError("bad_cutoff", f"N должно быть ≥ 1, получено {self.N}")
        if self.T <= 0:
            raise SimulationError("bad_horizon", "T должно быть > 0")
        if self.scheme != SCHEME:
            raise SimulationError("bad_scheme", f"поддерживается только {SCHEME}")
        object.__setattr__(self, "F", tuple(float(c) for c in self.F))
        if self.dt is None:
            object.__setattr__(self, "dt", 1.0 / (4.0 * self.N**2))
        if self.dt <= 0:
            raise SimulationError("bad_dt", "dt должно быть > 0")
        if self.dt > 1.0 / (2.0 * self.N**2) and not self.allow_large_dt:
            raise SimulationError(
                "dt_too_large",
                f"dt={self.dt:g} > 1/(2N²)={1.0 / (2.0 * self.N**2):g}; нужен allow_large_dt",
            )
        object.__setattr__(self, "eps", epsilon(self.N))
        if abs(2 * self.N * self.eps - 1.0) > 1e-15:
            raise SimulationError("bad_coupling", "нарушена связь 2N·ε = 1")

    @classmethod
    def from_experiment(cls, cfg, *, c1_override: Optional[float] = None) -> "SimConfig":
        """Из ``ExperimentConfig``; galilean=true: сразу в движущейся системе, c1 = c₁(F)."""
        c1 = 0.0
        if cfg.galilean:
            c1 = linear_coefficient(cfg.F)
        if c1_override is not None:
            c1 = c1_override
        return cls(
            N=cfg.N,
            T=cfg.T,
            F=tuple(cfg.F),
            dt=cfg.dt,
            oversample=cfg.oversample,
            seed=cfg.seed,
            record_drift=cfg.record_drift,
            blowup_threshold=cfg.blowup_threshold,
            c1=c1,
            allow_large_dt=cfg.allow_large_dt,
        )

    @property
    def steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    @property
    def polynomial(self) -> Polynomial:
        return Polynomial(self.F).trim()

    @property
    def grid(self) -> int:
        return dealiased_grid_size(self.N, int(self.polynomial.degree()), self.oversample)

    def echo(self) -> dict:
        data = asdict(self)
        data["F"] = list(self.F)
        return data

    def config_hash(self) -> str:
        payload = json.dumps(self.echo(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def linear_coefficient(F: Sequence[float]) -> float:
    """c₁(F) = E[F(U)U]."""
    return hermite_coeffs(list(F)).coefficient(1)


def quadratic_coefficient(F: Sequence[float]) -> float:
    return hermite_coeffs(list(F)).coefficient(2)


# ---------------- дрейф ----------------


def drift_array(coeffs: np.ndarray, F: Polynomial, c1: float, N: int, grid: int) -> np.ndarray:
    """B̂ для массива коэффициентов (последняя ось: k = 1..N)."""
    lam = local_amplitude(N)
    projected = apply_pointwise(lam * coeffs, lambda y: F(y) - c1 * y, grid, N)
    return (1j * wavenumbers(N)) * projected / lam**2


def drift(u: FourierField, F: Sequence[float], c1: float = 0.0, oversample: int = 4) -> FourierField:
    poly = Polynomial(list(F)).trim()
    grid = dealiased_grid_size(u.N, int(poly.degree()), oversample)
    try:
        values = drift_array(u.coeffs, poly, c1, u.N, grid)
    except SpectralError as exc:
        raise SimulationError("non_finite_drift", exc.message) from None
    return FourierField(u.N, values)


# ---------------- шаг ----------------


@dataclass(frozen=True, eq=False)
class _StepConstants:
    decay: np.ndarray
    phi1: np.ndarray
    noise_var: np.ndarray
    poly: Polynomial
    grid: int

    @classmethod
    def build(cls, config: SimConfig) -> "_StepConstants":
        k2 = wavenumbers(config.N) ** 2
        dt = config.dt
        return cls(
            decay=np.exp(-k2 * dt),
            phi1=-np.expm1(-k2 * dt) / k2,
            noise_var=-np.expm1(-2.0 * k2 * dt) * config.noise_variance_factor,
            poly=config.polynomial,
            grid=config.grid,
        )


def _advance(
    u: np.ndarray,
    config: SimConfig,
    consts: _StepConstants,
    rng: np.random.Generator,
    step_index: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        b = drift_array(u, consts.poly, config.c1, config.N, consts.grid)
    except SpectralError:
        raise BlowupError(step_index, math.inf) from None
    zeta = complex_gaussians(rng, (config.N,), consts.noise_var)
    new = consts.decay * u + consts.phi1 * b + zeta
    norm = math.sqrt(2.0 * float(np.sum(np.abs(new) ** 2)))
    if not math.isfinite(norm) or norm > config.blowup_threshold:
        raise BlowupError(step_index + 1, norm)
    return new, b, zeta


def step(u: FourierField, config: SimConfig, noise_stream: np.random.Generator) -> FourierField:
    """Один шаг экспоненциального Эйлера; при ‖u′‖ > порога BlowupError."""
    if u.N != config.N:
        raise SimulationError("cutoff_mismatch", f"поле из Y_{u.N}, конфиг на N={config.N}")
    consts = _StepConstants.build(config)
    new, _, _ = _advance(u.coeffs, config, consts, noise_stream, 0)
    return FourierField(config.N, new)


# ---------------- траектории ----------------


@dataclass(eq=False)
class Trajectory:
    config: SimConfig
    states: np.ndarray  # (records, N)
    drift: Optional[np.ndarray] = None  # (records−1, N): B̂ в начале шага j
    noise: Optional[np.ndarray] = None  # (records−1, N): ζ шага j
    status: str = COMPLETED
    blowup_step: Optional[int] = None
    stream: int = 0
    reversed: bool = False

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def dt(self) -> float:
        return float(self.config.dt)

    @property
    def records(self) -> int:
        return int(self.states.shape[0])

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.records)

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED

    def state(self, j: int) -> FourierField:
        return FourierField(self.N, self.states[j])

    def require_completed(self) -> "Trajectory":
        if not self.completed:
            raise BlowupError(self.blowup_step or 0, math.inf)
        return self

    def require_drift(self) -> np.ndarray:
        if self.drift is None:
            raise SimulationError("missing_records", "траектория записана без дрейфа (record_drift=false)")
        return self.drift

    def mode_path(self, ell: int) -> np.ndarray:
        """⟨u_t, e_{−ℓ}⟩ = û_t(ℓ) по всем записям."""
        return _mode(self.states, ell)

    def drift_path(self) -> np.ndarray:
        """Дрейф в каждом записанном состоянии, (records, N).

        Прямая траектория хранит B̂ в начале шага, не хватает последнего состояния.
        Обращённая хранит −B̂ в конце шага, не хватает первого; знак у добавленной
        точки тот же, что у записей.
        """
        recorded = self.require_drift()
        cfg = self.config
        if self.reversed:
            edge = -drift_array(self.states[:1], cfg.polynomial, cfg.c1, cfg.N, cfg.grid)
            return np.concatenate([edge, recorded], axis=0)
        edge = drift_array(self.states[-1:], cfg.polynomial, cfg.c1, cfg.N, cfg.grid)
        return np.concatenate([recorded, edge], axis=0)


def _mode(arr: np.ndarray, ell: int) -> np.ndarray:
    if ell == 0:
        return np.zeros(arr.shape[0], dtype=np.complex128)
    if abs(ell) > arr.shape[1]:
        raise SimulationError("mode_outside", f"мода {ell} вне Y_{arr.shape[1]}")
    column = arr[:, abs(ell) - 1]
    return column if ell > 0 else np.conj(column)


def simulate(config: SimConfig, stream: int = 0) -> Trajectory:
    """u_0 ~ μ^ε, затем config.steps шагов. Взрыв не бросается, а помечается в траектории."""
    rng = NoiseSeed(config.seed, stream).generator()
    consts = _StepConstants.build(config)
    steps = config.steps
    N = config.N

    states = np.empty((steps + 1, N), dtype=np.complex128)
    drifts = np.empty((steps, N), dtype=np.complex128) if config.record_drift else None
    noises = np.empty((steps, N), dtype=np.complex128) if config.record_noise else None
    states[0] = sample_mu_eps_array(N, rng)

    for j in range(steps):
        try:
            new, b, zeta = _advance(states[j], config, consts, rng, j)
        except BlowupError as exc:
            logger.warning("[SIM] stream=%d: взрыв на шаге %d (‖u‖=%.3g)", stream, exc.step, exc.norm)
            return Trajectory(
                config=config,
                states=states[: j + 1].copy(),
                drift=None if drifts is None else drifts[:j].copy(),
                noise=None if noises is None else noises[:j].copy(),
                status=BLOWUP,
                blowup_step=exc.step,
                stream=stream,
            )
        states[j + 1] = new
        if drifts is not None:
            drifts[j] = b
        if noises is not None:
            noises[j] = zeta

    logger.debug("[SIM] stream=%d: %d шагов, N=%d, dt=%g", stream, steps, N, config.dt)
    return Trajectory(config=config, states=states, drift=drifts, noise=noises, stream=stream)


def _run_member(config: SimConfig, reducer: Callable[[Trajectory], T_], stream: int) -> T_:
    return reducer(simulate(config, stream))


def _identity(traj: Trajectory) -> Trajectory:
    return traj


def ensemble_map(
    config: SimConfig,
    size: int,
    reducer: Callable[[Trajectory], T_],
    threads: int = 1,
    first_stream: int = 0,
) -> List[T_]:
    """reducer(simulate(config, j)) для j = first_stream..first_stream+size−1, в порядке j.

    Воркер возвращает только свёртку траектории, так что память не растёт с ансамблем.
    reducer должен быть функцией уровня модуля (или partial от неё), его пиклят.
    """
    streams = range(first_stream, first_stream + size)
    task = partial(_run_member, config, reducer)
    if threads <= 1 or size <= 1:
        return [task(j) for j in streams]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, streams, chunksize=max(1, size // (4 * threads))))


def simulate_ensemble(config: SimConfig, size: int, threads: int = 1) -> List[Trajectory]:
    return ensemble_map(config, size, _identity, threads)


# ---------------- преобразования траекторий ----------------


def _implied_noise(states: np.ndarray, drifts: np.ndarray, config: SimConfig) -> np.ndarray:
    consts = _StepConstants.build(config)
    return states[1:] - consts.decay * states[:-1] - consts.phi1 * drifts


def galilean_velocity(N: int, c1: float) -> float:
    """v = c1/λ, скорость переноса, которую даёт линейная часть F."""
    return c1 / local_amplitude(N)


def galilean_shift(traj: Trajectory, c1: float) -> Trajectory:
    """Переход в движущуюся систему: состояние в момент t сдвигается на a = v·t.

    Записи дрейфа сдвигаются так же и теряют транспортный член c1·λ^{−1}∂_x u,
    т. е. становятся дрейфом F̃ = F − c1·x в новой системе; шум пересчитывается
    как невязка шага.
    """
    if c1 == 0:
        return traj
    N = traj.N
    k = wavenumbers(N)
    a = galilean_velocity(N, c1) * traj.times
    phases = np.exp(-1j * np.multiply.outer(a, k))
    states = traj.states * phases
    config = replace(traj.config, c1=traj.config.c1 + c1)
    drifts = None
    noise = None
    if traj.drift is not None:
        transport = (c1 / local_amplitude(N)) * (1j * k) * states[:-1]
        drifts = traj.drift * phases[:-1] - transport
        noise = _implied_noise(states, drifts, config)
    return replace(traj, config=config, states=states, drift=drifts, noise=noise)


def time_reverse(traj: Trajectory) -> Trajectory:
    """Обращение времени: состояния в обратном порядке, дрейф шага j — −B̂ шага n−1−j.

    Тогда Â_t = −(A_T − A_{T−t}) точно на записях; шум — невязка шага.
    """
    traj.require_completed()
    states = traj.states[::-1].copy()
    drifts = None
    noise = None
    if traj.drift is not None:
        drifts = -traj.drift[::-1]
        noise = _implied_noise(states, drifts, traj.config)
    return replace(traj, states=states, drift=drifts, noise=noise, reversed=not traj.reversed)


# ---------------- разложение S/A/M ----------------


@dataclass(eq=False)
class Decomposition:
    ell: int
    times: np.ndarray
    initial: complex
    S: np.ndarray
    A: np.ndarray
    M: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.initial + self.S + self.A + self.M


def decompose(traj: Trajectory, ell: int) -> Decomposition:
    """⟨u_t, e_{−ℓ}⟩ = ⟨u_0, e_{−ℓ}⟩ + S_t + A_t + M_t.

    S — точная ОУ-часть шага (e^{−ℓ²dt} − 1)û_j(ℓ), A — φ₁(ℓ)·B̂_j(ℓ) из записей,
    M — остаток, так что тождество выполняется по построению.
    """
    drifts = traj.require_drift()
    if ell == 0 or abs(ell) > traj.N:
        raise SimulationError("mode_outside", f"мода {ell} вне Y_{traj.N}")
    path = traj.mode_path(ell)
    b = _mode(drifts, ell)
    k2dt = float(ell * ell) * traj.dt
    ds = math.expm1(-k2dt) * path[:-1]
    da = (-math.expm1(-k2dt) / (ell * ell)) * b
    dm = np.diff(path) - ds - da
    zero = np.zeros(1, dtype=np.complex128)
    return Decomposition(
        ell=ell,
        times=traj.times,
        initial=complex(path[0]),
        S=np.concatenate([zero, np.cumsum(ds)]),
        A=np.concatenate([zero, np.cumsum(da)]),
        M=np.concatenate([zero, np.cumsum(dm)]),
    )


# ---------------- структурные проверки дрейфа ----------------


def _random_fields(N: int, count: int, seed: int) -> np.ndarray:
    rng = NoiseSeed(seed, 0).generator()
    return sample_mu_eps_array(N, rng, size=count)


def antisymmetry_check(F: Sequence[float], N: int, samples: int = 100, seed: int = 0, c1: float = 0.0) -> StatReport:
    """max |⟨B(u), u⟩| / ‖u‖² по случайным u; гейт 1e-9."""
    worst = 0.0
    for row in _random_fields(N, samples, seed):
        u = FourierField(N, row)
        b = drift(u, F, c1)
        norm2 = 2.0 * float(np.sum(np.abs(row) ** 2))
        pairing = 2.0 * float(np.sum(b.coeffs * np.conj(row)).real)
        worst = max(worst, abs(pairing) / norm2)
    return flag_gate("antisym_pairing", worst, worst <= 1e-9, gate="upper", N=N, ensemble=samples)


def divergence(F: Sequence[float], u: FourierField, h: float = 1e-5, c1: float = 0.0) -> Tuple[float, float]:
    """Σ_i ∂_{x_i}⟨B(u), φ_i⟩ в базисе cos/√π, sin/√π центральными разностями; плюс масштаб ‖B‖."""
    x = to_real_coordinates(u)
    total = 0.0
    for i in range(x.size):
        shift = np.zeros_like(x)
        shift[i] = h
        plus = to_real_coordinates(drift(from_real_coordinates(x + shift), F, c1))[i]
        minus = to_real_coordinates(drift(from_real_coordinates(x - shift), F, c1))[i]
        total += (plus - minus) / (2.0 * h)
    scale = float(np.max(np.abs(to_real_coordinates(drift(u, F, c1)))))
    return total, scale


def divergence_check(F: Sequence[float], N: int, points: int = 20, seed: int = 1, h: float = 1e-5) -> StatReport:
    worst = 0.0
    for row in _random_fields(N, points, seed):
        value, scale = divergence(F, FourierField(N, row), h)
        worst = max(worst, abs(value) / max(1.0, scale))
    return flag_gate("antisym_divergence", worst, worst <= 1e-5, gate="upper", N=N, ensemble=points)


def directional_derivative(phi: ChaosFunctional, eta: np.ndarray, direction: np.ndarray) -> complex:
    """(v·D)Φ(η) = Σ_{k≠0} v̂(k) D_kΦ(η) на полных спектрах длины 2N+1."""
    N = phi.N
    total = 0j
    for k in list(range(-N, 0)) + list(range(1, N + 1)):
        vk = direction[N + k]
        if vk == 0:
            continue
        dphi = dk_derivative(phi, k)
        if dphi.term_count:
            total += vk * evaluate(dphi, eta)
    return total


def generator_antisymmetry_check(
    F: Sequence[float],
    phi: ChaosFunctional,
    psi: ChaosFunctional,
    samples: int,
    seed: int,
    threshold: float = 4.0,
) -> StatReport:
    """E[(B·DΦ)Ψ + Φ(B·DΨ)] = 0 под μ^ε, MC с z-гейтом."""
    N = phi.N
    values = []
    for row in _random_fields(N, samples, seed):
        eta = full_spectrum(row)
        b = full_spectrum(drift(FourierField(N, row), F).coeffs)
        value = (
            directional_derivative(phi, eta, b) * evaluate(psi, eta)
            + evaluate(phi, eta) * directional_derivative(psi, eta, b)
        )
        values.append(value.real)
    mean, err = mean_and_stderr(values)
    return z_gate("antisym_generator", mean, err, 0.0, threshold, N=N, ensemble=samples)


__all__ = [
    "BLOWUP",
    "COMPLETED",
    "Decomposition",
    "SCHEME",
    "SimConfig",
    "Trajectory",
    "antisymmetry_check",
    "decompose",
    "directional_derivative",
    "divergence",
    "divergence_check",
    "drift",
    "drift_array",
    "ensemble_map",
    "galilean_shift",
    "galilean_velocity",
    "generator_antisymmetry_check",
    "linear_coefficient",
    "quadratic_coefficient",
    "simulate",
    "simulate_ensemble",
    "step",
    "time_reverse",
]
