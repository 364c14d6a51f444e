import datetime
from typing import List, Optional

from sqlalchemy import (
    Boolean,
    DateTime,
    Float,
    ForeignKey,
    Index,
    Integer,
    String,
    Text,
    desc,
)
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column, relationship


class Base(DeclarativeBase):
    """Base declarative class for ORM models."""


class Run(Base):
    """
    Один запуск CLI: simulate / verify / qv / bg-scaling.
    Манифест хранится целиком, чтобы report мог собрать сводку без файлов.
    """

    __tablename__ = "runs"
    __table_args__ = (
        Index("ix_runs_kind", "kind"),
        Index("ix_runs_config_hash", "config_hash"),
        Index("ix_runs_id_desc", desc("id")),
    )

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    created_at: Mapped[datetime.datetime] = mapped_column(
        DateTime, default=datetime.datetime.utcnow, nullable=False
    )
    name: Mapped[str] = mapped_column(String(200))
    kind: Mapped[str] = mapped_column(String(32))  # simulate | verify:<suite> | qv | bg-scaling
    config_hash: Mapped[str] = mapped_column(String(64))  # sha256 манифеста
    seed: Mapped[str] = mapped_column(String(20))  # u64 не влезает в знаковый BIGINT
    code_version: Mapped[str] = mapped_column(String(64))
    manifest_json: Mapped[str] = mapped_column(Text)
    out_dir: Mapped[Optional[str]] = mapped_column(Text, nullable=True)

    passed: Mapped[int] = mapped_column(Integer, default=0)
    failed: Mapped[int] = mapped_column(Integer, default=0)
    blowups: Mapped[int] = mapped_column(Integer, default=0)

    rows: Mapped[List["StatRow"]] = relationship(
        back_populates="run",
        cascade="all, delete-orphan",
        order_by="StatRow.position",
    )


class StatRow(Base):
    __tablename__ = "stat_rows"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    run_id: Mapped[int] = mapped_column(
        Integer,
        ForeignKey("runs.id", ondelete="CASCADE"),
        nullable=False,
        index=True,
    )
    position: Mapped[int] = mapped_column(Integer)  # порядок строки в CSV

    name: Mapped[str] = mapped_column(String(120))
    estimate: Mapped[float] = mapped_column(Float)
    mc_stderr: Mapped[float] = mapped_column(Float, default=0.0)
    target: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    threshold: Mapped[float] = mapped_column(Float, default=0.0)
    gate: Mapped[str] = mapped_column(String(16))
    passed: Mapped[bool] = mapped_column(Boolean)

    N: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    M: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    ell: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    lag: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    ensemble: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)

    run: Mapped[Run] = relationship(back_populates="rows")
