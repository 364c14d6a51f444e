import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv
from sqlalchemy.engine import URL

from app.errors import ConfigError
from app.validators import (
    parse_bool,
    parse_coefficients,
    parse_float,
    parse_int,
    parse_time,
)


def _truthy(v: str | None) -> bool:
    return (v or "").lower() in {"1", "true", "t", "yes", "y"}


# Грузим .env только в дев-режиме:
# - если WASB_ENV отсутствует ИЛИ не "production"
# - и не выставлен явный запрет PYTHON_DOTENV_DISABLED=1
APP_ENV = os.getenv("WASB_ENV")
if (APP_ENV is None or APP_ENV.lower() != "production") and not _truthy(
    os.getenv("PYTHON_DOTENV_DISABLED")
):
    # override=False — не перезатираем уже заданные переменные окружения
    load_dotenv(override=False)

CODE_VERSION = "wasb-lab 0.3.0"


def is_production() -> bool:
    return os.getenv("WASB_ENV", "").lower() == "production"


def get_threads(cli_value: Optional[int] = None) -> int:
    """--threads важнее переменной окружения; мусор в WASB_THREADS → 1."""
    if cli_value is not None:
        return max(1, int(cli_value))
    try:
        return max(1, int(os.getenv("WASB_THREADS", "1")))
    except ValueError:
        return 1


def get_out_dir(cli_value: Optional[str] = None) -> Path:
    return Path(cli_value or os.getenv("WASB_OUT_DIR", "out"))


def get_db_url(out_dir: Optional[Path] = None) -> Union[URL, str]:
    url = os.getenv("WASB_DB_URL")
    if url:
        return url
    base = out_dir if out_dir is not None else get_out_dir()
    return URL.create(drivername="sqlite", database=str(Path(base) / "runs.db"))


# ---------------- КОНФИГ ЭКСПЕРИМЕНТА ----------------

MAX_N = 1024
MAX_ENSEMBLE = 100_000


@dataclass(frozen=True)
class ExperimentConfig:
    """Плоский key=value конфиг эксперимента после валидации."""

    name: str
    N: int
    F: Tuple[float, ...]
    T: float
    dt: Optional[float] = None  # None = auto, 1/(4N²)
    oversample: int = 4
    seed: int = 0
    ensemble: int = 1
    record_drift: bool = True
    blowup_threshold: float = 1e6
    galilean: bool = False
    allow_large_dt: bool = False
    ell: int = 1
    M: Optional[int] = None
    lag: Optional[float] = None

    def echo(self) -> dict:
        data = asdict(self)
        data["F"] = list(self.F)
        return data


_INT_KEYS: Dict[str, Tuple[int, int]] = {
    "N": (1, MAX_N),
    "oversample": (2, 64),
    "seed": (0, 2**64 - 1),
    "ensemble": (1, MAX_ENSEMBLE),
    "ell": (-MAX_N, MAX_N),
    "M": (1, MAX_N),
}
_TIME_KEYS = {"T": (1e-12, 1e6), "dt": (1e-14, 10.0), "lag": (1e-12, 1e6)}
_BOOL_KEYS = {"record_drift", "galilean", "allow_large_dt"}
REQUIRED_KEYS = ("N", "F", "T")
KNOWN_KEYS = (
    {"name", "F", "blowup_threshold"}
    | set(_INT_KEYS)
    | set(_TIME_KEYS)
    | _BOOL_KEYS
)


def _split_lines(text: str) -> Tuple[Dict[str, str], List[str]]:
    pairs: Dict[str, str] = {}
    problems: List[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"строка {lineno}: ожидается key = value")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in pairs:
            problems.append(f"строка {lineno}: ключ {key!r} повторяется")
            continue
        pairs[key] = value
    return pairs, problems


def parse_experiment_config(text: str, *, default_name: str = "experiment") -> ExperimentConfig:
    pairs, problems = _split_lines(text)

    for key in sorted(set(pairs) - KNOWN_KEYS):
        problems.append(f"неизвестный ключ {key!r}")
    for key in REQUIRED_KEYS:
        if key not in pairs:
            problems.append(f"отсутствует обязательный ключ {key!r}")

    values: Dict[str, object] = {"name": pairs.get("name", default_name)}

    def _try(key: str, parser: Callable[[str], object]) -> None:
        if key not in pairs:
            return
        try:
            values[key] = parser(pairs[key])
        except ValueError as exc:
            problems.append(f"{key}: {exc}")

    for key, (lo, hi) in _INT_KEYS.items():
        _try(key, lambda raw, lo=lo, hi=hi: parse_int(
            raw, min_value=lo, max_value=hi,
            error_message=f"целое от {lo} до {hi}",
        ))
    for key, (lo, hi) in _TIME_KEYS.items():
        if key == "dt" and pairs.get("dt", "").strip().lower() == "auto":
            values["dt"] = None
            continue
        _try(key, lambda raw, lo=lo, hi=hi: parse_time(
            raw, min_value=lo, max_value=hi,
            error_message="время с суффиксом 't', например 0.25t или 1/1024t",
        ))
    for key in _BOOL_KEYS:
        _try(key, lambda raw: parse_bool(raw, error_message="ожидается true/false"))
    _try("F", lambda raw: tuple(parse_coefficients(
        raw, error_message="список коэффициентов по возрастанию степеней, например 0, 0, 1",
    )))
    _try("blowup_threshold", lambda raw: parse_float(
        raw, min_value=1.0, max_value=1e300, error_message="число ≥ 1",
    ))

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(**values)  # type: ignore[arg-type]


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"не удалось прочитать {path}: {exc}"]) from None
    return parse_experiment_config(text, default_name=path.stem)


def format_experiment_config(cfg: ExperimentConfig) -> str:
    """Обратная запись в key = value; parse_experiment_config(format(cfg)) == cfg."""
    lines = [f"name = {cfg.name}"]
    for key, value in cfg.echo().items():
        if key == "name" or value is None:
            continue
        if key == "F":
            lines.append("F = " + ", ".join(repr(float(c)) for c in value))
        elif key in _TIME_KEYS:
            lines.append(f"{key} = {float(value)!r}t")
        elif key in _BOOL_KEYS:
            lines.append(f"{key} = {'true' if value else 'false'}")
        else:
            lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"
