"""Flat ``key = value`` run configuration.

Lines starting with ``#`` are comments. Every key has a type and a
default; unknown keys and unparsable values raise
:class:`ConfigurationError` carrying the offending key.
"""
from __future__ import annotations

from pathlib import Path

from . import model as m
from .errors import ConfigurationError
from .model import SystemModel, TargetGate, build_qft_target, build_two_surface_model
from .optimize import KrotovConfig

# key -> (type, default)
SCHEMA = {
    "m_g": (int, 40),
    "m_e": (int, 20),
    "omega_00": (float, m.OMEGA_00),
    "omega_g": (float, m.OMEGA_G),
    "x_g": (float, m.X_G),
    "omega_e": (float, m.OMEGA_E),
    "x_e": (float, m.X_E),
    "displacement": (float, m.DISPLACEMENT),
    "ratio": (float, None),
    "mu0": (float, m.MU0),
    "qubits": (int, 2),
    "total_time": (float, m.TOTAL_TIME),
    "n_steps": (int, m.N_STEPS),
    "epsilon0": (float, m.EPSILON0),
    "lambda0": (float, 1e3),
    "functional": (str, "sm"),
    "basis_flavor": (str, None),
    "max_iterations": (int, 50),
    "fidelity_target": (float, -16.0),
    "shape_form": (str, "gaussian"),
    "monotonicity_tolerance": (float, 1e-9),
    "min_field_change": (float, 1e-14),
    "lambda0_initial": (float, None),
    "initial_iterations": (int, 0),
    "milestones": (str, "-1,-1.5,-2"),
}


def _convert(key: str, raw: str):
    kind = SCHEMA[key][0]
    if raw.lower() in ("none", "auto", "") and SCHEMA[key][1] is None:
        return None
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        return kind(raw)
    except ValueError:
        raise ConfigurationError(
            f"bad value {raw!r} for key {key!r} (expected {kind.__name__})",
            key=key) from None


def parse_config(text: str) -> dict:
    """Parse config text into a dict with every schema key filled in."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'",
                                     key=line.split()[0])
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigurationError(f"unknown key {key!r} on line {lineno}", key=key)
        if key in values:
            raise ConfigurationError(f"key {key!r} given twice", key=key)
        values[key] = _convert(key, raw)
    out = {k: default for k, (_, default) in SCHEMA.items()}
    out.update(values)
    return out


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}", key="config") from exc
    return parse_config(text)


def format_config(cfg: dict) -> str:
    """Inverse of :func:`parse_config`; floats keep full precision."""
    lines = []
    for key in SCHEMA:
        v = cfg[key]
        if v is None:
            text = "none"
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def milestones(cfg: dict) -> list[float]:
    try:
        return [float(x) for x in cfg["milestones"].split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError("milestones must be comma-separated numbers",
                                 key="milestones") from None


def build_problem(cfg: dict) -> tuple[SystemModel, TargetGate, KrotovConfig]:
    """Model, target and optimizer settings described by ``cfg``."""
    q = cfg["qubits"]
    if q < 1:
        raise ConfigurationError("qubits must be at least 1", key="qubits")
    if 2 ** q > cfg["m_g"]:
        raise ConfigurationError(f"{2 ** q} register levels exceed m_g={cfg['m_g']}",
                                 key="qubits")
    try:
        model = build_two_surface_model(
            cfg["m_g"], cfg["m_e"], cfg["omega_00"], cfg["omega_g"], cfg["x_g"],
            cfg["omega_e"], cfg["x_e"], cfg["displacement"], cfg["mu0"],
            subspace_dim=2 ** q, ratio=cfg["ratio"])
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(f"invalid model parameters: {exc}", key="m_g") from exc
    target = build_qft_target(q)
    krotov = KrotovConfig(
        lambda0=cfg["lambda0"], functional=cfg["functional"],
        max_iterations=cfg["max_iterations"], fidelity_target=cfg["fidelity_target"],
        basis_flavor=cfg["basis_flavor"], epsilon0=cfg["epsilon0"],
        omega=cfg["omega_00"], total_time=cfg["total_time"], n_steps=cfg["n_steps"],
        shape_form=cfg["shape_form"],
        monotonicity_tolerance=cfg["monotonicity_tolerance"],
        min_field_change=cfg["min_field_change"],
        lambda0_initial=cfg["lambda0_initial"],
        initial_iterations=cfg["initial_iterations"])
    if not krotov.epsilon0 > 0:
        raise ConfigurationError("epsilon0 must be positive", key="epsilon0")
    return model, target, krotov
