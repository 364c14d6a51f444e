"""Статистические отчёты гейтов: оценка, MC-ошибка, z, pass/fail."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats as sps

from app.errors import AnalysisError

DEFAULT_SIGMA = 4.0
MIN_FIT_POINTS = 4

CSV_COLUMNS = [
    "name",
    "estimate",
    "mc_stderr",
    "target",
    "z",
    "threshold",
    "gate",
    "passed",
    "N",
    "M",
    "ell",
    "lag",
    "ensemble",
]


@dataclass
class StatReport:
    name: str
    estimate: float
    mc_stderr: float
    target: Optional[float]
    threshold: float
    gate: str  # z | upper | lower | tolerance | trend | flag
    passed: bool
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def z(self) -> Optional[float]:
        if self.target is None:
            return None
        diff = self.estimate - self.target
        if self.mc_stderr > 0:
            return diff / self.mc_stderr
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)

    def row(self) -> Dict[str, str]:
        row = {
            "name": self.name,
            "estimate": _fmt(self.estimate),
            "mc_stderr": _fmt(self.mc_stderr),
            "target": _fmt(self.target),
            "z": _fmt(self.z),
            "threshold": _fmt(self.threshold),
            "gate": self.gate,
            "passed": "pass" if self.passed else "fail",
        }
        for key in ("N", "M", "ell", "lag", "ensemble"):
            row[key] = _fmt(self.metadata.get(key))
        return row


def _fmt(value) -> str:
    # repr(float): кратчайшая десятичная запись с точным round trip
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def z_gate(
    name: str,
    estimate: float,
    stderr: float,
    target: float,
    threshold: float = DEFAULT_SIGMA,
    **metadata,
) -> StatReport:
    report = StatReport(name, float(estimate), float(stderr), float(target), threshold, "z", False, metadata)
    report.passed = bool(abs(report.z) <= threshold)
    return report


def upper_gate(name: str, estimate: float, stderr: float, bound: float, **metadata) -> StatReport:
    """Оценка не выше границы (с запасом в DEFAULT_SIGMA стандартных ошибок)."""
    passed = estimate - DEFAULT_SIGMA * stderr <= bound
    return StatReport(name, float(estimate), float(stderr), None, float(bound), "upper", bool(passed), metadata)


def lower_gate(name: str, estimate: float, bound: float, stderr: float = 0.0, **metadata) -> StatReport:
    passed = estimate >= bound
    return StatReport(name, float(estimate), float(stderr), None, float(bound), "lower", bool(passed), metadata)


def tolerance_gate(name: str, estimate: float, target: float, tol: float, **metadata) -> StatReport:
    passed = abs(estimate - target) <= tol
    return StatReport(name, float(estimate), 0.0, float(target), float(tol), "tolerance", bool(passed), metadata)


def flag_gate(name: str, estimate: float, passed: bool, gate: str = "flag", **metadata) -> StatReport:
    return StatReport(name, float(estimate), 0.0, None, 0.0, gate, bool(passed), metadata)


# ---------------- оценки ----------------


def mean_and_stderr(samples: Union[Sequence[float], np.ndarray]) -> Tuple[float, float]:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size < 2:
        raise AnalysisError("ensemble_too_small", "для MC-ошибки нужно хотя бы 2 выборки")
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def bonferroni_threshold(n_tests: int, sigma: float = DEFAULT_SIGMA) -> float:
    """z-порог, при котором семейство из n_tests двусторонних тестов держит уровень одного 4σ-теста."""
    alpha = 2.0 * sps.norm.sf(sigma)
    return float(sps.norm.isf(alpha / (2.0 * max(1, n_tests))))


def richardson(coarse: float, fine: float, coarse_err: float = 0.0, fine_err: float = 0.0) -> Tuple[float, float]:
    """Экстраполяция первого порядка по dt: 2·m(dt/2) − m(dt)."""
    value = 2.0 * fine - coarse
    err = math.sqrt(4.0 * fine_err**2 + coarse_err**2)
    return value, err


@dataclass
class ScalingFit:
    name: str
    abscissae: List[float]
    ordinates: List[float]
    exponent: float
    constant: float
    residual: float
    metadata: Dict[str, object] = field(default_factory=dict)


def fit_power_law(name: str, x: Iterable[float], y: Iterable[float], **metadata) -> ScalingFit:
    """y ≈ C·x^p в log-log координатах."""
    xs = np.asarray(list(x), dtype=np.float64)
    ys = np.asarray(list(y), dtype=np.float64)
    if xs.size < MIN_FIT_POINTS:
        raise AnalysisError("too_few_points", f"{name}: для фита нужно ≥ {MIN_FIT_POINTS} точек, есть {xs.size}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise AnalysisError("non_positive", f"{name}: log-log фит требует положительных значений")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    if not np.isfinite(slope):
        raise AnalysisError("fit_failed", f"{name}: показатель не конечен")
    return ScalingFit(
        name=name,
        abscissae=xs.tolist(),
        ordinates=ys.tolist(),
        exponent=float(slope),
        constant=float(np.exp(intercept)),
        residual=residual,
        metadata=metadata,
    )


# ---------------- CSV ----------------


def reports_to_csv(reports: Sequence[StatReport]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        writer.writerow(report.row())
    return buffer.getvalue()


def write_reports_csv(path: Union[str, Path], reports: Sequence[StatReport]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(reports_to_csv(reports), encoding="utf-8")
    return path


def fits_to_csv(fits: Sequence[ScalingFit]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["name", "exponent", "constant", "residual", "abscissae", "ordinates"])
    for fit in fits:
        writer.writerow([
            fit.name,
            _fmt(fit.exponent),
            _fmt(fit.constant),
            _fmt(fit.residual),
            " ".join(_fmt(v) for v in fit.abscissae),
            " ".join(_fmt(v) for v in fit.ordinates),
        ])
    return buffer.getvalue()


def read_reports_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with Path(path).open(encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def count_passed(reports: Sequence[StatReport]) -> Tuple[int, int]:
    passed = sum(1 for r in reports if r.passed)
    return passed, len(reports) - passed


__all__ = [
    "CSV_COLUMNS",
    "ScalingFit",
    "StatReport",
    "bonferroni_threshold",
    "count_passed",
    "fit_power_law",
    "fits_to_csv",
    "flag_gate",
    "lower_gate",
    "mean_and_stderr",
    "read_reports_csv",
    "reports_to_csv",
    "richardson",
    "tolerance_gate",
    "upper_gate",
    "write_reports_csv",
    "z_gate",
]
