"""Реестр прогонов в SQL: манифест, счётчики гейтов и строки отчётов."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

from sqlalchemy import func, select

from app.db.engine import SessionLocal
from app.db.models import Run, StatRow
from app.services.stats import StatReport, count_passed
from app.services.trajectory_io import Manifest

logger = logging.getLogger(__name__)


def _optional_int(value) -> Optional[int]:
    return None if value is None else int(value)


def _optional_float(value) -> Optional[float]:
    return None if value is None else float(value)


def record_run(
    manifest: Manifest,
    reports: Sequence[StatReport] = (),
    *,
    out_dir: Optional[str] = None,
    blowups: int = 0,
) -> int:
    """Пишет прогон и его отчёты; возвращает id записи."""
    passed, failed = count_passed(reports)
    with SessionLocal() as session:
        run = Run(
            name=manifest.name,
            kind=manifest.kind,
            config_hash=manifest.content_hash,
            seed=str(manifest.seed),
            code_version=manifest.code_version,
            manifest_json=manifest.to_json(),
            out_dir=out_dir,
            passed=passed,
            failed=failed,
            blowups=blowups,
        )
        for position, report in enumerate(reports):
            meta = report.metadata
            run.rows.append(
                StatRow(
                    position=position,
                    name=report.name,
                    estimate=float(report.estimate),
                    mc_stderr=float(report.mc_stderr),
                    target=report.target,
                    threshold=float(report.threshold),
                    gate=report.gate,
                    passed=bool(report.passed),
                    N=_optional_int(meta.get("N")),
                    M=_optional_int(meta.get("M")),
                    ell=_optional_int(meta.get("ell")),
                    lag=_optional_float(meta.get("lag")),
                    ensemble=_optional_int(meta.get("ensemble")),
                )
            )
        session.add(run)
        session.commit()
        logger.info("[DB] прогон #%d %s: pass=%d fail=%d", run.id, run.kind, passed, failed)
        return run.id


@dataclass
class RunSummary:
    id: int
    name: str
    kind: str
    seed: str
    passed: int
    failed: int
    blowups: int
    config_hash: str


def list_runs(kind: Optional[str] = None, limit: int = 20) -> List[RunSummary]:
    with SessionLocal() as session:
        query = select(Run).order_by(Run.id.desc()).limit(limit)
        if kind:
            query = query.where(Run.kind == kind)
        rows = session.execute(query).scalars().all()
        return [
            RunSummary(
                id=r.id,
                name=r.name,
                kind=r.kind,
                seed=r.seed,
                passed=r.passed,
                failed=r.failed,
                blowups=r.blowups,
                config_hash=r.config_hash,
            )
            for r in rows
        ]


@dataclass
class RegistryTotals:
    runs: int
    gates_passed: int
    gates_failed: int
    failing_names: List[str]


def registry_totals() -> RegistryTotals:
    with SessionLocal() as session:
        runs = session.execute(select(func.count()).select_from(Run)).scalar_one()
        passed = session.execute(select(func.coalesce(func.sum(Run.passed), 0))).scalar_one()
        failed = session.execute(select(func.coalesce(func.sum(Run.failed), 0))).scalar_one()
        names = session.execute(
            select(StatRow.name, func.count().label("cnt"))
            .where(StatRow.passed.is_(False))
            .group_by(StatRow.name)
            .order_by(func.count().desc(), StatRow.name)
            .limit(10)
        ).all()
    return RegistryTotals(
        runs=int(runs),
        gates_passed=int(passed),
        gates_failed=int(failed),
        failing_names=[row.name for row in names],
    )


__all__ = ["RegistryTotals", "RunSummary", "list_runs", "record_run", "registry_totals"]
