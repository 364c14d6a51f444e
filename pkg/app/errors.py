"""Исключения лаборатории.

У каждой ошибки есть машинный ``code`` и человекочитаемое ``message``. CLI мапит любую ``LabError``
в код выхода 2, а сообщение печатает в stderr.
"""

from __future__ import annotations

from typing import Sequence


class LabError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class SpectralError(LabError):
    pass


class ChaosError(LabError):
    pass


class PoissonError(ChaosError):
    """Правая часть имеет компоненту нулевого хаоса, уравнение неразрешимо."""


class SimulationError(LabError):
    pass


class BlowupError(SimulationError):
    def __init__(self, step: int, norm: float):
        super().__init__(
            "blowup",
            f"L2-норма {norm:.3e} превысила порог на шаге {step}",
        )
        self.step = step
        self.norm = norm


class TrajectoryFormatError(LabError):
    pass


class AnalysisError(LabError):
    pass


class ConfigError(LabError):
    """Все проблемы конфига сразу, а не первая попавшаяся."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid_config", "; ".join(self.problems))
