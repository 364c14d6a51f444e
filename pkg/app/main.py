import argparse
import csv
import hashlib
import io
import logging
import math
import sys
from dataclasses import replace
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.config import (
    CODE_VERSION,
    ExperimentConfig,
    get_db_url,
    get_out_dir,
    get_threads,
    load_experiment_config,
)
from app.db.engine import init_db
from app.errors import ConfigError, LabError
from app.services.bg_analysis import (
    VARIANT_A,
    VARIANT_B,
    antisymmetric_qv_report,
    bg_residual_pair,
    bg_residual_variance,
    martingale_qv_report,
    quadratic_variation,
)
from app.services.hermite_chaos import hermite_coeffs
from app.services.registry import list_runs, record_run, registry_totals
from app.services.sde_simulator import SimConfig, decompose, ensemble_map, simulate
from app.services.stats import (
    StatReport,
    count_passed,
    fits_to_csv,
    read_reports_csv,
    reports_to_csv,
)
from app.services.suites import GRID_CHOICES, SUITES, run_suite
from app.services.trajectory_io import Manifest, file_sha256, read_trajectory, write_manifest, write_member
from app.validators import parse_coefficients

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_GATE_FAILED = 1
EXIT_ERROR = 2

MANIFEST_NAME = "manifest.json"


# ---------------- ВЫХОДНЫЕ ФАЙЛЫ ----------------


def _write_text(out_dir: Path, name: str, content: str) -> str:
    path = out_dir / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")
    return hashlib.sha256(content.encode("utf-8")).hexdigest()


def _finish(
    manifest: Manifest,
    out_dir: Path,
    reports: Sequence[StatReport],
    *,
    use_db: bool,
    blowups: int = 0,
) -> int:
    write_manifest(out_dir / MANIFEST_NAME, manifest)
    if use_db:
        init_db(get_db_url(out_dir))
        record_run(manifest, reports, out_dir=str(out_dir), blowups=blowups)
    passed, failed = count_passed(reports)
    if reports:
        print(f"{manifest.kind}: {passed} pass, {failed} fail")
    return EXIT_GATE_FAILED if failed else EXIT_OK


def _experiment(args) -> Optional[ExperimentConfig]:
    if not getattr(args, "config", None):
        return None
    cfg = load_experiment_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _inputs(args) -> Dict[str, str]:
    """sha256 входных файлов прогона: конфиг и, если задана, траектория."""
    inputs = {}
    for attr in ("config", "trajectory"):
        raw = getattr(args, attr, None)
        if raw:
            inputs[Path(raw).name] = file_sha256(raw)
    return inputs


# ---------------- КОМАНДЫ ----------------


def cmd_simulate(args) -> int:
    cfg = _experiment(args)
    if cfg is None:
        raise LabError("missing_config", "simulate требует --config")
    out_dir = get_out_dir(args.out)
    threads = get_threads(args.threads)
    sim = SimConfig.from_experiment(cfg)
    logger.info("[SIM] %s: N=%d T=%g dt=%g, ансамбль %d", cfg.name, sim.N, sim.T, sim.dt, cfg.ensemble)

    members = ensemble_map(sim, cfg.ensemble, partial(write_member, out_dir), threads)
    blowups = {m.name: m.blowup_step for m in members if m.blowup_step is not None}
    for name, step in blowups.items():
        print(f"{name}: взрыв на шаге {step}", file=sys.stderr)

    manifest = Manifest(
        name=cfg.name,
        kind="simulate",
        config=cfg.echo(),
        code_version=CODE_VERSION,
        seed=cfg.seed,
        inputs=_inputs(args),
        outputs={m.name: m.sha256 for m in members},
        extra={"sim": sim.echo(), "blowups": blowups},
    )
    _finish(manifest, out_dir, [], use_db=not args.no_db, blowups=len(blowups))
    print(f"simulate: {len(members)} траекторий, взрывов {len(blowups)} → {out_dir}")
    return EXIT_OK


def cmd_hermite(args) -> int:
    try:
        coeffs = parse_coefficients(args.F, error_message="F: список коэффициентов, например 0,0,1")
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
    spectrum = hermite_coeffs(coeffs, nmax=args.nmax, quad_order=args.quad_order)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["n", "c_n", "n_factorial_c_n_squared"])
    for n in range(spectrum.nmax + 1):
        c = spectrum.coefficient(n)
        writer.writerow([n, repr(c), repr(math.factorial(n) * c * c)])
    content = buffer.getvalue()
    if args.out:
        out_dir = get_out_dir(args.out)
        _write_text(out_dir, "hermite.csv", content)
    sys.stdout.write(content)
    return EXIT_OK


def _run_suite_command(kind: str, suite: str, args) -> int:
    cfg = _experiment(args)
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    out_dir = get_out_dir(args.out)
    result = run_suite(suite, grid=args.grid, seed=seed, threads=get_threads(args.threads))

    stem = suite.replace("-", "_")
    outputs = {f"{stem}.csv": _write_text(out_dir, f"{stem}.csv", reports_to_csv(result.reports))}
    if result.fits:
        outputs[f"{stem}_fits.csv"] = _write_text(out_dir, f"{stem}_fits.csv", fits_to_csv(result.fits))
    manifest = Manifest(
        name=cfg.name if cfg else suite,
        kind=kind,
        config=cfg.echo() if cfg else {},
        code_version=CODE_VERSION,
        seed=seed,
        inputs=_inputs(args),
        outputs=outputs,
        extra={"suite": suite, "grid": args.grid},
    )
    return _finish(manifest, out_dir, result.reports, use_db=not args.no_db)


def cmd_verify(args) -> int:
    return _run_suite_command(f"verify:{args.suite}", args.suite, args)


def cmd_bg_scaling(args) -> int:
    """Без --config: сетка показателей. С конфигом: остатки A/B для ell, M, lag из конфига."""
    cfg = _experiment(args)
    if cfg is None:
        return _run_suite_command("bg-scaling", "bg-scaling", args)
    out_dir = get_out_dir(args.out)
    sim = replace(SimConfig.from_experiment(cfg), record_noise=False, record_drift=True)
    M = cfg.M or sim.N
    lag = cfg.lag or min(sim.T, 1.0)
    problems = []
    if cfg.ell == 0 or abs(cfg.ell) > sim.N:
        problems.append(f"ell: нужно 0 < |ell| ≤ N, получено {cfg.ell}")
    if M > sim.N:
        problems.append(f"M: нужно M ≤ N, получено {M}")
    if lag > min(sim.T, 1.0):
        problems.append(f"lag: нужно lag ≤ min(T, 1), получено {lag:g}")
    if problems:
        raise ConfigError(problems)
    logger.info("[VERIFY] %s: остатки ℓ=%d M=%d τ=%g, ансамбль %d", cfg.name, cfg.ell, M, lag, cfg.ensemble)

    rows = np.array(ensemble_map(sim, cfg.ensemble, partial(bg_residual_pair, cfg.ell, M, lag), get_threads(args.threads)))
    reports = [
        bg_residual_variance(rows[:, i], cfg.ell, 0.0, lag, M, variant, F=sim.F, N=sim.N)
        for i, variant in enumerate((VARIANT_A, VARIANT_B))
    ]
    outputs = {"bg_residuals.csv": _write_text(out_dir, "bg_residuals.csv", reports_to_csv(reports))}
    manifest = Manifest(
        name=cfg.name,
        kind="bg-scaling",
        config=cfg.echo(),
        code_version=CODE_VERSION,
        seed=cfg.seed,
        inputs=_inputs(args),
        outputs=outputs,
        extra={"suite": "bg-config", "ell": cfg.ell, "M": M, "lag": lag},
    )
    return _finish(manifest, out_dir, reports, use_db=not args.no_db)


def _load_or_simulate(args, cfg: ExperimentConfig):
    if args.trajectory:
        return read_trajectory(args.trajectory, SimConfig.from_experiment(cfg))
    return simulate(replace(SimConfig.from_experiment(cfg), record_noise=False))


def cmd_qv(args) -> int:
    """Без --config: набор qv. С конфигом: КВ одной траектории для моды ell из конфига.

    --trajectory берёт готовый WASB1-файл вместо симуляции; F и c1 по-прежнему из конфига.
    """
    cfg = _experiment(args)
    if cfg is None:
        if args.trajectory:
            raise LabError("missing_config", "--trajectory требует --config (F и galilean)")
        return _run_suite_command("qv", "qv", args)
    out_dir = get_out_dir(args.out)
    traj = _load_or_simulate(args, cfg)
    if not traj.completed:
        raise LabError("blowup", f"траектория взорвалась на шаге {traj.blowup_step}")
    reports = [martingale_qv_report(traj, cfg.ell), antisymmetric_qv_report(traj, cfg.ell)]
    dec = decompose(traj, cfg.ell)
    fits = [
        quadratic_variation(dec.M, traj.dt, name="qv_martingale"),
        quadratic_variation(dec.A, traj.dt, name="qv_antisymmetric"),
    ]
    outputs = {
        "qv.csv": _write_text(out_dir, "qv.csv", reports_to_csv(reports)),
        "qv_fits.csv": _write_text(out_dir, "qv_fits.csv", fits_to_csv(fits)),
    }
    manifest = Manifest(
        name=cfg.name,
        kind="qv",
        config=cfg.echo(),
        code_version=CODE_VERSION,
        seed=cfg.seed,
        inputs=_inputs(args),
        outputs=outputs,
        extra={"suite": "qv-config", "trajectory": args.trajectory},
    )
    return _finish(manifest, out_dir, reports, use_db=not args.no_db)


def cmd_report(args) -> int:
    """Сводка: по CSV-файлам, если они заданы, иначе по реестру прогонов."""
    if args.csv:
        failed_total = 0
        for path in args.csv:
            rows = read_reports_csv(path)
            failed = [r["name"] for r in rows if r["passed"] != "pass"]
            failed_total += len(failed)
            print(f"{path}: {len(rows) - len(failed)} pass, {len(failed)} fail")
            for name in sorted(set(failed)):
                print(f"  FAIL {name}")
        return EXIT_GATE_FAILED if failed_total else EXIT_OK

    init_db(get_db_url(get_out_dir(args.out)))
    totals = registry_totals()
    print(f"прогонов: {totals.runs}, гейтов pass={totals.gates_passed} fail={totals.gates_failed}")
    for run in list_runs(limit=args.limit):
        print(f"#{run.id} {run.kind:<22} {run.name:<24} seed={run.seed} pass={run.passed} fail={run.failed}")
    for name in totals.failing_names:
        print(f"  чаще всего падает: {name}")
    return EXIT_GATE_FAILED if totals.gates_failed else EXIT_OK


# ---------------- ПАРСЕР ----------------


def _u64(raw: str) -> int:
    value = int(raw, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed должен быть u64")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wasb", description="Лаборатория равновесного стохастического Бюргерса")
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG-логи")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool = False) -> None:
        p.add_argument("--config", required=config_required, help="key = value конфиг эксперимента")
        p.add_argument("--seed", type=_u64, default=None, help="мастер-сид, перекрывает конфиг")
        p.add_argument("--out", default=None, help="каталог выходов (WASB_OUT_DIR, по умолчанию out)")
        p.add_argument("--threads", type=int, default=None, help="воркеры (WASB_THREADS)")
        p.add_argument("--no-db", action="store_true", help="не писать прогон в реестр")

    p = sub.add_parser("simulate", help="ансамбль траекторий в WASB1 + манифест")
    common(p, config_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("hermite", help="CSV коэффициентов Эрмита c_n(F)")
    p.add_argument("--F", required=True, help="коэффициенты по возрастанию степеней, например 0,0,1")
    p.add_argument("--nmax", type=int, default=None)
    p.add_argument("--quad-order", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_hermite)

    p = sub.add_parser("verify", help="набор проверок с гейтами")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--grid", choices=GRID_CHOICES, default="small")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("qv", help="квадратичная вариация S/A/M-частей")
    p.add_argument("--grid", choices=GRID_CHOICES, default="small")
    p.add_argument("--trajectory", default=None, help="WASB1-файл вместо симуляции, нужен --config")
    common(p)
    p.set_defaults(func=cmd_qv)

    p = sub.add_parser("bg-scaling", help="показатели остатков Больцмана–Гиббса")
    p.add_argument("--grid", choices=GRID_CHOICES, default="small")
    common(p)
    p.set_defaults(func=cmd_bg_scaling)

    p = sub.add_parser("report", help="сводка pass/fail")
    p.add_argument("csv", nargs="*", help="CSV-отчёты; без них — реестр прогонов")
    p.add_argument("--out", default=None)
    p.add_argument("--limit", type=int, default=20)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # ---------------- ЛОГИ ----------------
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        return args.func(args)
    except LabError as exc:
        logger.debug("LabError %s", exc.code, exc_info=True)
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
