from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, List

TIME_UNIT = "t"

_BOOL_TRUE = {"1", "true", "t", "yes", "y", "on"}
_BOOL_FALSE = {"0", "false", "f", "no", "n", "off"}


def parse_int(
    raw: str,
    *,
    min_value: int,
    max_value: int,
    error_message: str,
) -> int:
    text = (raw or "").strip()
    try:
        value = int(text)
    except (TypeError, ValueError):
        raise ValueError(error_message) from None

    if value < min_value or value > max_value:
        raise ValueError(error_message)

    return value


def _number(text: str) -> float:
    # Допускаем дроби вида 1/1024: шаг по времени удобнее задавать так.
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def parse_float(
    raw: str,
    *,
    min_value: float,
    max_value: float,
    error_message: str,
) -> float:
    text = (raw or "").strip().replace(",", ".")
    if not text:
        raise ValueError(error_message)

    try:
        value = _number(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(error_message) from None

    if value != value or value < min_value or value > max_value:
        raise ValueError(error_message)

    return value


def parse_time(
    raw: str,
    *,
    min_value: float,
    max_value: float,
    error_message: str,
) -> float:
    """Время в модельных единицах. Суффикс ``t`` обязателен: ``0.25t``, ``1/1024t``."""
    text = (raw or "").strip()
    if not text.endswith(TIME_UNIT):
        raise ValueError(error_message)
    return parse_float(
        text[: -len(TIME_UNIT)],
        min_value=min_value,
        max_value=max_value,
        error_message=error_message,
    )


def parse_bool(raw: str, *, error_message: str) -> bool:
    text = (raw or "").strip().lower()
    if text in _BOOL_TRUE:
        return True
    if text in _BOOL_FALSE:
        return False
    raise ValueError(error_message)


def parse_coefficients(
    raw: str,
    *,
    max_count: int = 16,
    error_message: str,
) -> List[float]:
    """Коэффициенты многочлена по возрастанию степеней: ``0, 0, 1`` — это x²."""
    text = (raw or "").strip().strip("[]")
    if not text:
        raise ValueError(error_message)

    parts: Iterable[str] = re.split(r"[\s,;]+", text)
    values: List[float] = []
    for part in parts:
        if not part:
            continue
        try:
            values.append(_number(part))
        except (ValueError, ZeroDivisionError):
            raise ValueError(error_message) from None

    if not values or len(values) > max_count:
        raise ValueError(error_message)

    return values
