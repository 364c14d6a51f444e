"""Повторный прогон по манифесту и сверка хэшей выходов.

Пересобирает команду из manifest.json, запускает её во временный каталог
без записи в реестр и сравнивает sha256 каждого выходного файла.

Запуск из корня репозитория:
    python scripts/rerun_manifest.py out/manifest.json
    python scripts/rerun_manifest.py out/manifest.json --threads 8
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.config import ExperimentConfig, format_experiment_config  # noqa: E402
from app.main import main as cli_main  # noqa: E402
from app.services.trajectory_io import read_manifest  # noqa: E402


def _argv_for(manifest, workdir: Path, threads: int) -> list[str]:
    common = ["--out", str(workdir), "--seed", str(manifest.seed), "--threads", str(threads), "--no-db"]
    if manifest.config:
        raw = dict(manifest.config)
        raw["F"] = tuple(raw["F"])
        cfg_path = workdir / "rerun.cfg"
        cfg_path.write_text(format_experiment_config(ExperimentConfig(**raw)), encoding="utf-8")
        common += ["--config", str(cfg_path)]
    if manifest.kind == "simulate":
        return ["simulate"] + common
    grid = ["--grid", str(manifest.extra.get("grid", "small"))]
    if manifest.kind.startswith("verify:"):
        return ["verify", manifest.kind.split(":", 1)[1]] + grid + common
    if manifest.extra.get("trajectory"):
        common += ["--trajectory", str(manifest.extra["trajectory"])]
    return [manifest.kind] + grid + common


def main() -> int:
    parser = argparse.ArgumentParser(description="Повтор прогона по манифесту")
    parser.add_argument("manifest")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    original = read_manifest(args.manifest)
    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        cli_main(_argv_for(original, workdir, args.threads))
        rerun = read_manifest(workdir / "manifest.json")

    mismatched = sorted(
        name for name in set(original.outputs) | set(rerun.outputs)
        if original.outputs.get(name) != rerun.outputs.get(name)
    )
    print(f"Выходов: {len(original.outputs)}, расхождений: {len(mismatched)}")
    for name in mismatched:
        print(f"  DIFF {name}")
    return 1 if mismatched else 0


if __name__ == "__main__":
    sys.exit(main())
