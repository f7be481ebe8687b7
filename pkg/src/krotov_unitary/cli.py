"""Command line entry point: ``optimize``, ``sweep-qubits`` and ``analyze``.

Exit status 0 on success, 2 for a malformed configuration (the offending
key is printed), 3 when the run aborts on a monotonicity violation; the
partial results are still written in that case.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import config as cfgmod
from .analysis import (fit_scaling_law, iterations_to_reach, jackknife_a,
                       jackknife_variation, late_stage_rate)
from .errors import ConfigurationError, FitError, MonotonicityError
from .optimize import run_optimization
from .results import RunSummary, summarize, write_run, write_table

log = logging.getLogger("krotov_unitary")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MONOTONICITY = 3

SWEEP_FILE = "sweep.tsv"
FIT_FILE = "scaling_fit.json"


def _log_record(prefix: str):
    def cb(r):
        log.info("%sit %4d  J_norm %.10f  fidelity %.4f  max|de| %.3e",
                 prefix, r.iteration, r.J_norm, r.fidelity, r.max_field_change)
    return cb


def run_one(cfg: dict, out_dir, prefix: str = "") -> tuple[int, list]:
    """Optimize the problem in ``cfg`` and write its result directory."""
    model, target, krotov = cfgmod.build_problem(cfg)
    try:
        result = run_optimization(model, target, krotov, callback=_log_record(prefix))
    except MonotonicityError as exc:
        log.error("%s%s", prefix, exc)
        write_run(out_dir, cfg, exc.field, exc.records, "monotonicity_abort")
        return EXIT_MONOTONICITY, exc.records
    write_run(out_dir, cfg, result.field, result.records, result.stop_reason)
    return EXIT_OK, result.records


def _milestone_name(m: float) -> str:
    return f"it_to_{m:g}"


def sweep(cfg: dict, qubits: list[int], out_dir, threads: int = 1) -> int:
    """Run one optimization per register size and fit the scaling law."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    milestones = cfgmod.milestones(cfg)
    per_q = []
    for q in qubits:
        c = dict(cfg, qubits=q)
        cfgmod.build_problem(c)  # fail fast on every Q before any run starts
        per_q.append(c)

    def job(c):
        return run_one(c, out / f"q{c['qubits']}", prefix=f"[Q={c['qubits']}] ")

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = list(pool.map(job, per_q))

    columns = ("Q", "N", "iterations", "final_fidelity", "final_intensity",
               "late_rate") + tuple(_milestone_name(m) for m in milestones)
    rows, points = [], []
    for q, (_, records) in zip(qubits, outcomes):
        fids = [r.fidelity for r in records]
        reached = [iterations_to_reach(fids, m) for m in milestones]
        rows.append((q, 2 ** q, records[-1].iteration, fids[-1], records[-1].intensity,
                     late_stage_rate(fids))
                    + tuple(math.nan if it is None else it for it in reached))
        hit = iterations_to_reach(fids, cfg["fidelity_target"])
        if hit is not None and hit > 0:
            points.append((2 ** q, cfg["fidelity_target"], hit))
    write_table(out / SWEEP_FILE, columns, rows)

    try:
        fit = fit_scaling_law(points)
        report = {"status": "ok", "a": fit.a, "b": fit.b, "residual": fit.residual,
                  "points": [list(p) for p in fit.points]}
        if len(points) >= 3:
            jk = jackknife_a(points)
            report["jackknife_a"] = jk
            report["jackknife_variation"] = jackknife_variation(fit.a, jk)
    except FitError as exc:
        report = {"status": "error", "message": str(exc),
                  "points": [list(p) for p in points]}
        log.warning("scaling fit not available: %s", exc)
    (out / FIT_FILE).write_text(json.dumps(report, indent=2) + "\n")
    return max(code for code, _ in outcomes)


def analyze(run_dir) -> list[tuple[str, RunSummary]]:
    """Recompute summaries for a run directory or every run of a sweep."""
    root = Path(run_dir)
    if not root.is_dir():
        raise ConfigurationError(f"no result directory at {root}", key="out")
    dirs = [root] if (root / "config.txt").exists() else sorted(
        p for p in root.iterdir() if (p / "config.txt").exists())
    out = []
    for d in dirs:
        cfg = cfgmod.load_config(d / "config.txt")
        out.append((str(d), summarize(d, cfg["mu0"], cfg["total_time"])))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="krotov-unitary",
                                description="Krotov optimization of register gates.")
    p.add_argument("command", choices=("optimize", "sweep-qubits", "analyze"))
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--out", type=Path, required=True, help="result directory")
    p.add_argument("--threads", type=int, default=1, help="parallel runs in a sweep")
    p.add_argument("--qubits", type=int, nargs="+", help="register sizes for sweep-qubits")
    p.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "analyze":
            for name, s in analyze(args.out):
                print(f"{name}\titerations={s.iterations}\tfidelity={s.final_fidelity:.6g}"
                      f"\tJ_norm={s.final_J_norm:.10g}\tintensity={s.intensity:.10g}"
                      f"\tpeak_omega={s.peak_omega:.6g}")
            return EXIT_OK
        if args.config is None:
            raise ConfigurationError("--config is required", key="config")
        cfg = cfgmod.load_config(args.config)
        if args.command == "optimize":
            code, _ = run_one(cfg, args.out)
            return code
        qubits = args.qubits or [cfg["qubits"]]
        return sweep(cfg, qubits, args.out, args.threads)
    except ConfigurationError as exc:
        print(f"configuration error [{exc.key}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
