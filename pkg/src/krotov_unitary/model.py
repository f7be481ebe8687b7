"""Two-surface molecular model, target gates, fields and state bases.

All quantities are in atomic units with hbar = 1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError, ValidationError

# surrogate spectrum defaults (atomic units)
OMEGA_00 = 0.06601
OMEGA_G = 8.0e-4
X_G = 5.0e-6
OMEGA_E = 5.5e-4
X_E = 3.0e-6
DISPLACEMENT = 1.2
MU0 = 1.0
EPSILON0 = 5.0e-3
TOTAL_TIME = 4.5e4
N_STEPS = 32768

FLAVORS = ("canonical-basis", "ss-basis", "orthonormal-lbasis", "custom")
SHAPE_FORMS = ("gaussian", "linear")


class ControllabilityWarning(UserWarning):
    """All transitions share the same Franck-Condon structure."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Ground and excited vibrational manifolds coupled by a dipole.

    The basis is ordered with the ``M_g`` ground levels first, followed by
    the ``M_e`` excited levels. ``dipole`` is the full ``M x M`` matrix,
    already scaled by ``mu0``; only its ground-excited blocks may be
    nonzero. The qubit register is the lowest ``subspace_dim`` ground
    levels.
    """

    ground_energies: np.ndarray
    excited_energies: np.ndarray
    dipole: np.ndarray
    subspace_dim: int
    mu0: float = 1.0

    def __post_init__(self):
        eg = _frozen(np.atleast_1d(self.ground_energies), float)
        ee = _frozen(np.atleast_1d(self.excited_energies), float)
        object.__setattr__(self, "ground_energies", eg)
        object.__setattr__(self, "excited_energies", ee)
        m_g, m = eg.size, eg.size + ee.size
        dip = np.array(self.dipole)
        if np.iscomplexobj(dip):
            if np.max(np.abs(dip.imag), initial=0.0) > 1e-12:
                raise ValidationError("dipole must be real")
            dip = dip.real
        dip = _frozen(dip, float)
        object.__setattr__(self, "dipole", dip)
        if dip.shape != (m, m):
            raise ValidationError(
                f"dipole has shape {dip.shape}, expected {(m, m)}")
        if not (np.all(np.isfinite(eg)) and np.all(np.isfinite(ee))
                and np.all(np.isfinite(dip))):
            raise ValidationError("model contains non-finite entries")
        if np.max(np.abs(dip - dip.T), initial=0.0) > 1e-12:
            raise ValidationError("dipole must be symmetric")
        if np.any(dip[:m_g, :m_g] != 0.0) or np.any(dip[m_g:, m_g:] != 0.0):
            raise ValidationError(
                "dipole may only couple ground and excited levels")
        if not 1 <= self.subspace_dim <= m_g:
            raise ValidationError(
                f"subspace_dim={self.subspace_dim} must lie in 1..{m_g}")

    @property
    def m_g(self) -> int:
        return self.ground_energies.size

    @property
    def m_e(self) -> int:
        return self.excited_energies.size

    @property
    def dim(self) -> int:
        return self.m_g + self.m_e

    @property
    def energies(self) -> np.ndarray:
        return np.concatenate([self.ground_energies, self.excited_energies])

    @property
    def h0(self) -> np.ndarray:
        return np.diag(self.energies)

    def hamiltonian(self, eps: float) -> np.ndarray:
        """Dense ``H0 - mu * eps``."""
        return self.h0 - self.dipole * eps

    def with_subspace(self, n: int) -> "SystemModel":
        return SystemModel(self.ground_energies, self.excited_energies,
                           self.dipole, n, self.mu0)


@dataclass(frozen=True, eq=False)
class TargetGate:
    """The ``N x N`` block of the target transformation."""

    block: np.ndarray

    def __post_init__(self):
        b = _frozen(self.block, complex)
        object.__setattr__(self, "block", b)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValidationError(f"target block must be square, got {b.shape}")
        err = np.max(np.abs(b.conj().T @ b - np.eye(b.shape[0])))
        if err > 1e-12:
            raise ValidationError(f"target block is not unitary (error {err:.3e})")

    @property
    def n(self) -> int:
        return self.block.shape[0]

    def embed(self, dim: int) -> np.ndarray:
        """``dim x dim`` extension; identity outside the register block."""
        if dim < self.n:
            raise ConfigurationError(f"cannot embed {self.n} levels into {dim}")
        out = np.eye(dim, dtype=complex)
        out[:self.n, :self.n] = self.block
        return out


@dataclass(frozen=True, eq=False)
class ControlField:
    """Field samples on the midpoint grid ``(j + 1/2) dt``, ``dt = T / N_t``."""

    samples: np.ndarray
    total_time: float

    def __post_init__(self):
        s = _frozen(np.atleast_1d(self.samples), float)
        object.__setattr__(self, "samples", s)
        if s.ndim != 1 or s.size < 1:
            raise ValidationError("field needs at least one sample")
        if not self.total_time > 0:
            raise ValidationError("total_time must be positive")
        if not np.all(np.isfinite(s)):
            bad = int(np.flatnonzero(~np.isfinite(s))[0])
            raise NumericError(f"field sample {bad} is not finite")

    @property
    def n_steps(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return self.total_time / self.n_steps

    @property
    def times(self) -> np.ndarray:
        """Field grid."""
        return (np.arange(self.n_steps) + 0.5) * self.dt

    @property
    def state_times(self) -> np.ndarray:
        """State grid, ``N_t + 1`` points from 0 to T."""
        return np.arange(self.n_steps + 1) * self.dt

    def split(self, n_first: int) -> tuple["ControlField", "ControlField"]:
        """Cut into ``[0, n_first dt]`` and the remainder."""
        if not 0 < n_first < self.n_steps:
            raise ConfigurationError("split point must be an interior grid index")
        t1 = n_first * self.dt
        return (ControlField(self.samples[:n_first], t1),
                ControlField(self.samples[n_first:], self.total_time - t1))


@dataclass(frozen=True, eq=False)
class StateSet:
    """``N`` state vectors of dimension ``M``, stored row-wise."""

    members: np.ndarray
    flavor: str = "custom"

    def __post_init__(self):
        m = _frozen(self.members, complex)
        if m.ndim == 1:
            m = _frozen(m[None, :], complex)
        object.__setattr__(self, "members", m)
        if m.ndim != 2:
            raise ValidationError("state set must be a 2-d array (N, M)")
        if self.flavor not in FLAVORS:
            raise ValidationError(f"unknown basis flavor {self.flavor!r}")

    @property
    def n(self) -> int:
        return self.members.shape[0]

    @property
    def dim(self) -> int:
        return self.members.shape[1]

    def replace(self, members) -> "StateSet":
        return StateSet(members, self.flavor)


def franck_condon_dipole(m_g: int, m_e: int, displacement: float,
                         ratio: float) -> np.ndarray:
    """Overlaps ``<g_i|e_j>`` of two displaced harmonic oscillators.

    The ground oscillator has unit frequency; the excited one has frequency
    ``ratio`` and is centred at ``displacement`` (ground length units).
    Uses the two-index ladder-operator recurrence, which only references
    already computed entries.
    """
    if displacement < 0 or not ratio > 0:
        raise ValidationError("need displacement >= 0 and ratio > 0")
    if m_g < 1 or m_e < 1:
        raise ValidationError("need at least one level per surface")
    d = float(displacement)
    sr = math.sqrt(ratio)
    big = 0.5 * (1.0 / sr + sr)
    small = 0.5 * (1.0 / sr - sr)
    s = np.zeros((m_g, m_e))
    s[0, 0] = (math.sqrt(2.0 * sr / (1.0 + ratio))
               * math.exp(-ratio * d * d / (2.0 * (1.0 + ratio))))
    with np.errstate(over="raise", invalid="raise"):
        try:
            for m in range(m_g):
                if m > 0:
                    prev2 = s[m - 2, 0] if m >= 2 else 0.0
                    s[m, 0] = (d * math.sqrt(ratio / 2.0) * s[m - 1, 0]
                               + small * math.sqrt(m - 1) * prev2) / (big * math.sqrt(m))
                for n in range(m_e - 1):
                    left = s[m, n - 1] if n >= 1 else 0.0
                    up = s[m - 1, n] if m >= 1 else 0.0
                    s[m, n + 1] = (-d / math.sqrt(2.0) * s[m, n]
                                   - small * math.sqrt(n) * left
                                   + math.sqrt(m) * up) / (big * math.sqrt(n + 1))
        except (FloatingPointError, OverflowError) as exc:
            raise NumericError(f"Franck-Condon recurrence overflowed: {exc}") from exc
    if not np.all(np.isfinite(s)):
        raise NumericError("Franck-Condon recurrence produced non-finite overlaps")
    return s


def vibrational_ladder(n_levels: int, origin: float, omega: float,
                       anharmonicity: float) -> np.ndarray:
    """``origin + omega v - anharmonicity v^2`` for ``v = 0..n_levels-1``."""
    v = np.arange(n_levels, dtype=float)
    return origin + omega * v - anharmonicity * v * v


def build_two_surface_model(m_g: int = 40, m_e: int = 20,
                            omega_00: float = OMEGA_00,
                            omega_g: float = OMEGA_G, x_g: float = X_G,
                            omega_e: float = OMEGA_E, x_e: float = X_E,
                            displacement: float = DISPLACEMENT,
                            mu0: float = MU0, subspace_dim: int = 4,
                            ratio: float | None = None) -> SystemModel:
    """Anharmonic surrogate of the two-surface molecular model.

    ``ratio`` defaults to ``omega_e / omega_g`` and sets the width ratio of
    the oscillators used for the Franck-Condon overlaps.
    """
    if m_g < 1 or m_e < 1:
        raise ValidationError("m_g and m_e must be at least 1")
    if not omega_00 > 0:
        raise ValidationError("omega_00 must be positive")
    eg = vibrational_ladder(m_g, 0.0, omega_g, x_g)
    ee = vibrational_ladder(m_e, omega_00, omega_e, x_e)
    for name, e in (("ground", eg), ("excited", ee)):
        steps = np.diff(e)
        if np.any(steps <= 0):
            v = int(np.flatnonzero(steps <= 0)[0]) + 1
            raise ValidationError(
                f"{name} energies stop increasing at level {v + 1}; "
                "anharmonicity too large for the requested number of levels")
    if ratio is None:
        ratio = omega_e / omega_g
    if displacement == 0 and ratio == 1:
        warnings.warn("identical undisplaced oscillators: the dipole is "
                      "diagonal in vibrational quantum number",
                      ControllabilityWarning, stacklevel=2)
    fc = franck_condon_dipole(m_g, m_e, displacement, ratio)
    m = m_g + m_e
    dip = np.zeros((m, m))
    dip[:m_g, m_g:] = mu0 * fc
    dip[m_g:, :m_g] = mu0 * fc.T
    if subspace_dim > m_g:
        raise ConfigurationError(
            f"register of {subspace_dim} levels exceeds m_g={m_g}", key="qubits")
    return SystemModel(eg, ee, dip, subspace_dim, mu0)


def build_qft_target(qubits: int) -> TargetGate:
    """Discrete Fourier transform on ``N = 2**qubits`` levels."""
    if qubits < 1:
        raise ValidationError("need at least one qubit")
    n = 2 ** qubits
    j = np.arange(n)
    return TargetGate(np.exp(2j * np.pi * np.outer(j, j) / n) / math.sqrt(n))


def shape_function(t, total_time: float, form: str = "gaussian"):
    """Switch-on/off envelope, peaking at ``T/2``.

    ``form="linear"`` uses the exponent without the square, kept only to
    compare against the gaussian envelope.
    """
    x = np.asarray(t, dtype=float) / total_time - 0.5
    if form == "gaussian":
        return np.exp(-32.0 * x * x)
    if form == "linear":
        return np.exp(-32.0 * x)
    raise ConfigurationError(f"unknown shape form {form!r}", key="shape_form")


def build_guess_field(epsilon0: float = EPSILON0, omega: float = OMEGA_00,
                      total_time: float = TOTAL_TIME, n_steps: int = N_STEPS,
                      form: str = "gaussian") -> ControlField:
    """``epsilon0 * s(t) * cos(omega t)`` on the midpoint grid."""
    if not epsilon0 > 0:
        raise ValidationError("epsilon0 must be positive")
    if n_steps < 1:
        raise ConfigurationError("n_steps must be positive", key="n_steps")
    t = (np.arange(n_steps) + 0.5) * (total_time / n_steps)
    return ControlField(
        epsilon0 * shape_function(t, total_time, form) * np.cos(omega * t),
        total_time)


def build_state_sets(model: SystemModel, target: TargetGate,
                     flavor: str = "canonical-basis",
                     custom: np.ndarray | None = None) -> tuple[StateSet, StateSet]:
    """Initial states of the given flavor and their images under the target.

    ``custom`` is an ``(N, N)`` array of register-space coefficients, used
    only with ``flavor="custom"``.
    """
    n, dim = target.n, model.dim
    if n > model.m_g:
        raise ConfigurationError(
            f"register of {n} levels exceeds the {model.m_g} ground levels",
            key="qubits")
    coeffs = np.eye(n, dtype=complex)
    if flavor in ("canonical-basis", "orthonormal-lbasis"):
        pass
    elif flavor == "ss-basis":
        coeffs[n - 1] = 1.0 / math.sqrt(n)
    elif flavor == "custom":
        if custom is None:
            raise ConfigurationError("custom flavor needs explicit coefficients",
                                     key="basis_flavor")
        coeffs = np.array(custom, dtype=complex)
        if coeffs.shape != (n, n):
            raise ConfigurationError("custom coefficients must be N x N")
    else:
        raise ConfigurationError(f"unknown basis flavor {flavor!r}",
                                 key="basis_flavor")
    initial = np.zeros((n, dim), dtype=complex)
    initial[:, :n] = coeffs
    final = np.zeros_like(initial)
    final[:, :n] = coeffs @ target.block.T
    return StateSet(initial, flavor), StateSet(final, flavor)


def global_phase_phi1(energies, total_time: float) -> float:
    """Phase from the energy origin: ``sum(E) T / M``."""
    e = np.asarray(energies, dtype=float).ravel()
    if e.size == 0:
        raise ValidationError("need at least one energy")
    return math.fsum(e) * total_time / e.size
