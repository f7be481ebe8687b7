"""Time evolution under a piecewise-constant field.

Two routes are provided. :func:`propagate_step` builds the dense step
unitary with a scaling-and-squaring exponential and is the reference.
:func:`evolve_states` runs many steps through the compiled Taylor kernel;
the two agree to well below 1e-10 (see the test-suite).
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import ConfigurationError, NumericError, ValidationError
from .model import ControlField, StateSet, SystemModel

FORWARD = "forward"
BACKWARD = "backward"


def _sign(direction: str) -> float:
    if direction == FORWARD:
        return 1.0
    if direction == BACKWARD:
        return -1.0
    raise ConfigurationError(f"direction must be 'forward' or 'backward', got {direction!r}")


def check_anti_hermitian(g: np.ndarray, atol: float = 1e-12) -> None:
    dev = np.abs(g + g.conj().T)
    if dev.size and dev.max() > atol:
        i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
        raise ValidationError(
            f"generator is not anti-Hermitian: entry ({i}, {j}) deviates by "
            f"{dev[i, j]:.3e}")


def is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))) <= atol)


def matrix_exponential(generator: np.ndarray) -> np.ndarray:
    """``exp(G)`` for anti-Hermitian ``G``; the result is unitary."""
    g = np.asarray(generator, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValidationError(f"generator must be square, got shape {g.shape}")
    check_anti_hermitian(g)
    return scipy.linalg.expm(g)


def step_unitary(model: SystemModel, field_sample: float, dt: float,
                 direction: str = FORWARD) -> np.ndarray:
    """Dense one-step propagator ``exp(-i H dt)`` or its inverse."""
    if not np.isfinite(field_sample):
        raise NumericError(f"field sample {field_sample!r} is not finite")
    if not dt > 0:
        raise ValidationError("dt must be positive")
    h = model.hamiltonian(field_sample)
    return matrix_exponential(-1j * _sign(direction) * h * dt)


def propagate_step(state, model: SystemModel, field_sample: float, dt: float,
                   direction: str = FORWARD) -> np.ndarray:
    """Advance one state (or an ``(N, M)`` stack) by one step."""
    u = step_unitary(model, field_sample, dt, direction)
    psi = np.asarray(state, dtype=complex)
    return psi @ u.T


def full_propagator(model: SystemModel, field: ControlField) -> np.ndarray:
    """``U(T, 0)`` as the ordered product of dense step unitaries."""
    u = np.eye(model.dim, dtype=complex)
    for eps in field.samples:
        u = step_unitary(model, eps, field.dt) @ u
    return u


class _Packed:
    """Model arrays prepared for the compiled kernels."""

    def __init__(self, model: SystemModel):
        e = model.energies
        self.shift = 0.5 * (e.max() + e.min())
        self.h0s = np.ascontiguousarray(e - self.shift)
        self.mu = np.ascontiguousarray(model.dipole, dtype=float)
        self.mu_norm = float(np.abs(self.mu).sum(axis=1).max(initial=0.0))
        self.dim = model.dim


def pack(states: np.ndarray) -> np.ndarray:
    """``(N, M)`` complex rows to the kernel layout ``(M, 2N)`` real."""
    s = np.asarray(states, dtype=complex)
    return np.ascontiguousarray(np.concatenate([s.real.T, s.imag.T], axis=1))


def unpack(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pack`; accepts a leading time axis."""
    n = x.shape[-1] // 2
    out = x[..., :n] + 1j * x[..., n:]
    return np.swapaxes(out, -1, -2)


def _as_rows(states, dim: int) -> np.ndarray:
    s = states.members if isinstance(states, StateSet) else np.asarray(states, dtype=complex)
    if s.ndim == 1:
        s = s[None, :]
    if s.shape[-1] != dim:
        raise ConfigurationError(
            f"states have dimension {s.shape[-1]}, model has {dim}")
    return s


def evolve_packed(x: np.ndarray, packed: _Packed, field: ControlField,
                  direction: str, record: bool) -> tuple[np.ndarray, np.ndarray | None, float]:
    """Kernel-level evolution on packed states.

    Returns the endpoint (packed), the packed trajectory or ``None`` and the
    largest norm drift seen at any step.
    """
    sign = _sign(direction)
    x = np.array(x, dtype=float, order="C", copy=True)
    traj = np.empty((field.n_steps + 1 if record else 0,) + x.shape)
    drift = _kernels.propagate(x, packed.h0s, packed.mu, packed.mu_norm,
                               np.ascontiguousarray(field.samples), field.dt,
                               packed.shift, sign, traj)
    return x, (traj if record else None), float(drift)


def evolve_states(states, model: SystemModel, field: ControlField,
                  direction: str = FORWARD, record_trajectory: bool = False,
                  expected_steps: int | None = None) -> np.ndarray:
    """Propagate each state independently over the whole field.

    Forward runs start at t=0, backward runs take the given states as
    values at t=T. With ``record_trajectory`` the result has shape
    ``(N_t + 1, N, M)`` with index ``j`` at time ``j dt`` for either
    direction; otherwise only the far endpoint ``(N, M)`` is returned.
    """
    if expected_steps is not None and expected_steps != field.n_steps:
        raise ConfigurationError(
            f"field has {field.n_steps} samples but {expected_steps} steps were requested",
            key="n_steps")
    rows = _as_rows(states, model.dim)
    end, traj, _ = evolve_packed(pack(rows), _Packed(model), field, direction,
                                 record_trajectory)
    if record_trajectory:
        return unpack(traj)
    return unpack(end)
