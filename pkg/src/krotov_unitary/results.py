"""Result directories: tab-separated tables, config snapshot and manifest.

Every number is written with 17 significant digits so that a table read
back with :func:`read_table` reproduces the in-memory doubles exactly.
Column names and order below are part of the output contract.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import field_spectrum, integrated_intensity
from .config import format_config
from .model import ControlField

DIAGNOSTICS_COLUMNS = ("iteration", "J", "J_norm", "re_tau", "im_tau", "fidelity",
                       "delta1", "delta2_integral", "intensity", "max_field_change")
FIELD_COLUMNS = ("t", "epsilon")
SPECTRUM_COLUMNS = ("omega", "amplitude")

CONFIG_FILE = "config.txt"
DIAGNOSTICS_FILE = "diagnostics.tsv"
FIELD_FILE = "field.tsv"
SPECTRUM_FILE = "spectrum.tsv"
MANIFEST_FILE = "manifest.json"
README_FILE = "README.txt"

_README = """\
Results of one Krotov optimization run.

  config.txt        configuration snapshot; rerunning it reproduces these files
  diagnostics.tsv   one row per iteration (iteration 0 is the guess field)
  field.tsv         final field on the half-step grid
  spectrum.tsv      DFT magnitudes of the final field, omega >= 0 only
  manifest.json     artifact list with column schemas

The Hamiltonian is a configurable surrogate (anharmonic vibrational ladders
coupled by displaced-oscillator Franck-Condon factors), not molecular data.
Intensities, convergence curves and spectra reported in the literature for
real molecules are qualitative references only; the numbers here are not
expected to reproduce them.
"""


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_table(path: Path, columns, rows) -> None:
    lines = ["\t".join(columns)]
    lines += ["\t".join(_fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header names and a float array of the rows."""
    text = Path(path).read_text().splitlines()
    header = text[0].split("\t")
    data = np.array([[float(v) for v in line.split("\t")] for line in text[1:] if line],
                    dtype=float).reshape(-1, len(header))
    return header, data


def diagnostics_rows(records):
    for r in records:
        yield (r.iteration, r.J, r.J_norm, r.tau.real, r.tau.imag, r.fidelity,
               r.delta1, r.delta2_integral, r.intensity, r.max_field_change)


def spectrum_rows(field: ControlField):
    omega, amp = field_spectrum(field)
    keep = omega >= 0
    return zip(omega[keep], amp[keep])


def write_run(out_dir, cfg: dict, field: ControlField, records, status: str) -> Path:
    """Write all artifacts of one run into ``out_dir`` (created if needed)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(format_config(cfg))
    write_table(out / DIAGNOSTICS_FILE, DIAGNOSTICS_COLUMNS, diagnostics_rows(records))
    write_table(out / FIELD_FILE, FIELD_COLUMNS, zip(field.times, field.samples))
    write_table(out / SPECTRUM_FILE, SPECTRUM_COLUMNS, spectrum_rows(field))
    (out / README_FILE).write_text(_README)
    manifest = {
        "status": status,
        "artifacts": {
            CONFIG_FILE: {"format": "key = value"},
            DIAGNOSTICS_FILE: {"format": "tsv", "columns": list(DIAGNOSTICS_COLUMNS)},
            FIELD_FILE: {"format": "tsv", "columns": list(FIELD_COLUMNS)},
            SPECTRUM_FILE: {"format": "tsv", "columns": list(SPECTRUM_COLUMNS)},
            README_FILE: {"format": "text"},
        },
    }
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n")
    return out


def read_field(path, total_time: float | None = None) -> ControlField:
    """Rebuild the field from ``field.tsv``.

    Without ``total_time`` the duration is inferred from the first and last
    midpoints, which can differ from the original by one rounding.
    """
    _, data = read_table(path)
    t, eps = data[:, 0], data[:, 1]
    if total_time is None:
        total_time = t[-1] + t[0]
    return ControlField(eps, total_time)


@dataclass(frozen=True)
class RunSummary:
    """What ``analyze`` recomputes from a result directory."""

    iterations: int
    final_fidelity: float
    final_J_norm: float
    intensity: float
    peak_omega: float


def summarize(run_dir, mu0: float, total_time: float) -> RunSummary:
    run = Path(run_dir)
    _, diag = read_table(run / DIAGNOSTICS_FILE)
    field = read_field(run / FIELD_FILE, total_time)
    omega, amp = field_spectrum(field)
    pos = omega >= 0
    return RunSummary(
        iterations=int(diag[-1, 0]), final_fidelity=float(diag[-1, 5]),
        final_J_norm=float(diag[-1, 2]),
        intensity=integrated_intensity(field, mu0),
        peak_omega=float(omega[pos][np.argmax(amp[pos])]))
