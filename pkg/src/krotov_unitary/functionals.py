"""Objective functionals, fidelity and Krotov update coefficients.

``tau`` is the trace overlap of the propagated register basis with its
target image; ``re`` and ``sm`` are built on it, ``ss`` sums the squared
per-transition overlaps of a (possibly non-orthogonal) state set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import StateSet

KINDS = ("re", "sm", "ss")
FIDELITY_FLOOR = 1e-16

_FLAVORS_FOR = {
    "re": ("canonical-basis",),
    "sm": ("canonical-basis",),
    "ss": ("ss-basis", "orthonormal-lbasis", "custom"),
}


@dataclass(frozen=True)
class TauValue:
    value: complex
    n: int

    def __post_init__(self):
        if abs(self.value) > self.n + 1e-9:
            raise ValidationError(f"|tau| = {abs(self.value)} exceeds N = {self.n}")


@dataclass(frozen=True)
class ObjectiveValue:
    kind: str
    value: float
    normalized: float


def _rows(states) -> np.ndarray:
    return states.members if isinstance(states, StateSet) else np.asarray(states, dtype=complex)


def overlaps(final_states, target_states) -> np.ndarray:
    """``<target_k | final_k>`` for every k."""
    f, t = _rows(final_states), _rows(target_states)
    if f.shape != t.shape:
        raise ValidationError(
            f"state sets differ in shape: {f.shape} vs {t.shape}")
    return np.einsum("km,km->k", t.conj(), f)


def tau(final_states, target_states) -> TauValue:
    ov = overlaps(final_states, target_states)
    return TauValue(complex(ov.sum()), ov.size)


def _normalize(kind: str, value: float, n: int) -> ObjectiveValue:
    scale = n * n if kind == "sm" else n
    return ObjectiveValue(kind, value, value / scale)


def f_re(t: TauValue) -> ObjectiveValue:
    return _normalize("re", -t.value.real, t.n)


def f_sm(t: TauValue) -> ObjectiveValue:
    return _normalize("sm", -abs(t.value) ** 2, t.n)


def f_ss(final_states, target_states) -> ObjectiveValue:
    ov = overlaps(final_states, target_states)
    return _normalize("ss", -float(np.sum(np.abs(ov) ** 2)), ov.size)


def objective(kind: str, final_states, target_states) -> ObjectiveValue:
    if kind == "re":
        return f_re(tau(final_states, target_states))
    if kind == "sm":
        return f_sm(tau(final_states, target_states))
    if kind == "ss":
        return f_ss(final_states, target_states)
    raise ValidationError(f"unknown functional {kind!r}")


def fidelity_log10(t: TauValue) -> float:
    """``log10(1 - |tau|^2 / N^2)``, floored at -16."""
    infidelity = 1.0 - abs(t.value) ** 2 / t.n ** 2
    return math.log10(max(infidelity, FIDELITY_FLOOR))


def check_flavor(kind: str, flavor: str) -> None:
    if kind not in KINDS:
        raise ValidationError(f"unknown functional {kind!r}")
    if flavor not in _FLAVORS_FOR[kind]:
        raise ValidationError(
            f"functional {kind!r} cannot be used with basis flavor {flavor!r}")


def coefficients_a(kind: str, old_final_states, target_states) -> np.ndarray:
    """Per-state weights of the field update, from the previous endpoints."""
    flavor = getattr(old_final_states, "flavor", None)
    if flavor is not None:
        check_flavor(kind, flavor)
    ov = overlaps(old_final_states, target_states)
    if kind == "re":
        return np.full(ov.size, 0.5, dtype=complex)
    if kind == "sm":
        return np.full(ov.size, np.conj(ov.sum()), dtype=complex)
    if kind == "ss":
        return ov.conj()
    raise ValidationError(f"unknown functional {kind!r}")


def register_endpoints(final_states, initial_states, n: int | None = None) -> np.ndarray:
    """Images of the canonical register states, recovered by linearity.

    If ``initial_states`` spans the first ``n`` levels with coefficient
    matrix ``C`` (rows), the propagated canonical states are
    ``C^{-1}`` applied to the propagated rows.
    """
    f, i = _rows(final_states), _rows(initial_states)
    n = i.shape[0] if n is None else n
    coeffs = i[:, :n]
    if np.max(np.abs(i[:, n:]), initial=0.0) > 1e-14:
        raise ValidationError("initial states leave the register subspace")
    return np.linalg.solve(coeffs, f)
