"""Файлы траекторий WASB1 и манифест прогона.

Формат (little-endian):

    b"WASB1"
    u32 N, f64 dt, u64 steps, u64 seed, u8 flags, u64 stream
    (steps+1) × N × (f64 re, f64 im)          — состояния, включая u_0
    steps × N × (f64 re, f64 im)              — дрейф, если FLAG_DRIFT
    steps × N × (f64 re, f64 im)              — шум, если FLAG_NOISE

Размер файла: 42 + (steps+1)·16N байт плюс steps·16N на каждый необязательный
блок. ``seed`` — главный сид ансамбля, ``stream`` — номер потока шума
траектории; вместе они воспроизводят её через ``simulate(config, stream)``.
Для взорвавшейся траектории ``steps`` — число сделанных шагов до взрыва.
В файлах нет времени записи и идентификаторов реестра: повторный прогон даёт
те же байты.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from app.errors import TrajectoryFormatError
from app.services.sde_simulator import BLOWUP, COMPLETED, SimConfig, Trajectory

logger = logging.getLogger(__name__)

MAGIC = b"WASB1"
HEADER = struct.Struct("<IdQQBQ")
HEADER_SIZE = len(MAGIC) + HEADER.size

FLAG_DRIFT = 0x01
FLAG_BLOWUP = 0x02
FLAG_NOISE = 0x04

_F8 = np.dtype("<f8")


def _block(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype=np.complex128).view(np.float64).astype(_F8).tobytes()


def expected_size(N: int, steps: int, drift: bool, noise: bool) -> int:
    per_state = 2 * N * _F8.itemsize
    size = HEADER_SIZE + (steps + 1) * per_state
    for present in (drift, noise):
        if present:
            size += steps * per_state
    return size


def encode_trajectory(traj: Trajectory) -> bytes:
    flags = 0
    if traj.drift is not None:
        flags |= FLAG_DRIFT
    if traj.noise is not None:
        flags |= FLAG_NOISE
    if traj.status == BLOWUP:
        flags |= FLAG_BLOWUP
    parts = [MAGIC, HEADER.pack(traj.N, traj.dt, traj.records - 1, traj.config.seed, flags, traj.stream), _block(traj.states)]
    if traj.drift is not None:
        parts.append(_block(traj.drift))
    if traj.noise is not None:
        parts.append(_block(traj.noise))
    return b"".join(parts)


def write_trajectory(path: Union[str, Path], traj: Trajectory) -> str:
    """Пишет файл и возвращает его sha256."""
    data = encode_trajectory(traj)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    logger.debug("[IO] %s: %d байт", path.name, len(data))
    return hashlib.sha256(data).hexdigest()


def _read_block(data: bytes, offset: int, rows: int, N: int) -> np.ndarray:
    count = rows * N * 2
    arr = np.frombuffer(data, dtype=_F8, count=count, offset=offset)
    return arr.astype(np.float64).view(np.complex128).reshape(rows, N).copy()


def decode_trajectory(data: bytes, config: Optional[SimConfig] = None) -> Trajectory:
    if len(data) < HEADER_SIZE or data[: len(MAGIC)] != MAGIC:
        raise TrajectoryFormatError("bad_magic", "не файл WASB1")
    N, dt, steps, seed, flags, stream = HEADER.unpack_from(data, len(MAGIC))
    if N < 1:
        raise TrajectoryFormatError("bad_header", f"некорректный заголовок: N={N}")
    records = steps + 1
    has_drift = bool(flags & FLAG_DRIFT)
    has_noise = bool(flags & FLAG_NOISE)
    expected = expected_size(N, steps, has_drift, has_noise)
    if len(data) != expected:
        raise TrajectoryFormatError("bad_length", f"длина {len(data)} не совпадает с заголовком ({expected})")
    if config is None:
        # без манифеста F неизвестна; достаточно для чтения состояний
        config = SimConfig(N=N, T=max(1, steps) * dt, F=(0.0,), dt=dt, seed=seed, allow_large_dt=True)
    elif config.N != N or config.dt != dt or config.seed != seed:
        raise TrajectoryFormatError("config_mismatch", "конфиг манифеста не совпадает с заголовком файла")

    offset = HEADER_SIZE
    states = _read_block(data, offset, records, N)
    offset += records * N * 16
    drift = noise = None
    if has_drift:
        drift = _read_block(data, offset, steps, N)
        offset += steps * N * 16
    if has_noise:
        noise = _read_block(data, offset, steps, N)
    blowup = bool(flags & FLAG_BLOWUP)
    return Trajectory(
        config=config,
        states=states,
        drift=drift,
        noise=noise,
        status=BLOWUP if blowup else COMPLETED,
        blowup_step=records if blowup else None,
        stream=stream,
    )


def read_trajectory(path: Union[str, Path], config: Optional[SimConfig] = None) -> Trajectory:
    data = Path(path).read_bytes()
    logger.debug("[IO] чтение %s: %d байт", Path(path).name, len(data))
    return decode_trajectory(data, config)


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def trajectory_name(stream: int) -> str:
    return f"traj_{stream:05d}.wasb"


@dataclass(frozen=True)
class WrittenMember:
    name: str
    sha256: str
    status: str
    blowup_step: Optional[int]


def write_member(out_dir: Union[str, Path], traj: Trajectory) -> WrittenMember:
    """Свёртка для ``ensemble_map``: пишет траекторию в воркере и возвращает только хэш."""
    name = trajectory_name(traj.stream)
    digest = write_trajectory(Path(out_dir) / name, traj)
    return WrittenMember(name=name, sha256=digest, status=traj.status, blowup_step=traj.blowup_step)


# ---------------- манифест ----------------


@dataclass
class Manifest:
    name: str
    kind: str
    config: Dict[str, object]
    code_version: str
    seed: int
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    extra: Dict[str, object] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "kind": self.kind,
            "config": self.config,
            "code_version": self.code_version,
            "seed": self.seed,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "extra": self.extra,
        }
        return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        try:
            raw = json.loads(text)
            return cls(
                name=raw["name"],
                kind=raw["kind"],
                config=raw["config"],
                code_version=raw["code_version"],
                seed=int(raw["seed"]),
                inputs=dict(raw.get("inputs", {})),
                outputs=dict(raw.get("outputs", {})),
                extra=dict(raw.get("extra", {})),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise TrajectoryFormatError("bad_manifest", f"манифест не читается: {exc}") from None

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def write_manifest(path: Union[str, Path], manifest: Manifest) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.to_json(), encoding="utf-8")
    logger.info("[IO] манифест %s: %d выходных файлов", path, len(manifest.outputs))
    return path


def read_manifest(path: Union[str, Path]) -> Manifest:
    return Manifest.from_json(Path(path).read_text(encoding="utf-8"))


__all__ = [
    "FLAG_BLOWUP",
    "FLAG_DRIFT",
    "FLAG_NOISE",
    "HEADER_SIZE",
    "MAGIC",
    "Manifest",
    "WrittenMember",
    "decode_trajectory",
    "encode_trajectory",
    "expected_size",
    "file_sha256",
    "read_manifest",
    "read_trajectory",
    "trajectory_name",
    "write_manifest",
    "write_member",
    "write_trajectory",
]
