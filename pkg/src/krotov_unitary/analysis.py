"""Post-processing of fields and optimization traces."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError
from .model import ControlField


def integrated_intensity(field: ControlField, mu0: float = 1.0) -> float:
    """Rectangle rule for ``int |mu0 eps(t)| dt`` on the field grid."""
    return float(np.sum(np.abs(mu0 * field.samples)) * field.dt)


def field_energy(field: ControlField) -> float:
    return float(np.sum(field.samples ** 2) * field.dt)


def field_spectrum(field: ControlField) -> tuple[np.ndarray, np.ndarray]:
    """Unwindowed DFT magnitudes of the samples.

    Frequencies are angular, ``2 pi k / T``, in FFT order (the upper half
    of the bins carries the negative frequencies).
    """
    if field.n_steps < 2:
        raise ValueError("need at least two samples for a spectrum")
    amp = np.abs(np.fft.fft(field.samples))
    omega = 2.0 * np.pi * np.fft.fftfreq(field.n_steps, d=field.dt)
    return omega, amp


def peak_frequency(field: ControlField) -> float:
    omega, amp = field_spectrum(field)
    pos = omega >= 0
    return float(omega[pos][np.argmax(amp[pos])])


@dataclass(frozen=True)
class ScalingFit:
    """``N_it ~ b exp(N |f| / a)`` fitted in log space."""

    a: float
    b: float
    residual: float
    points: tuple

    def predict(self, n_levels: int, fidelity: float) -> float:
        return self.b * math.exp(n_levels * abs(fidelity) / self.a)


def fit_scaling_law(points) -> ScalingFit:
    """Least squares of ``log N_it = log b + N |f| / a``.

    ``points`` are ``(N, f, N_it)`` triples; ``f`` may be given signed.
    ``residual`` is the RMS misfit in ``log N_it``.
    """
    pts = tuple((int(n), abs(float(f)), float(it)) for n, f, it in points)
    if len(pts) < 2:
        raise FitError(f"need at least two points, got {len(pts)}")
    x = np.array([n * f for n, f, _ in pts])
    its = np.array([it for _, _, it in pts])
    if np.any(its <= 0):
        raise FitError("iteration counts must be positive")
    y = np.log(its)
    if np.ptp(x) == 0:
        raise FitError("all points share the same N|f|; slope undetermined")
    slope, intercept = np.polyfit(x, y, 1)
    if not slope > 0:
        raise FitError(f"iteration count does not grow with N|f| (slope {slope:.3g})")
    resid = y - (intercept + slope * x)
    return ScalingFit(a=float(1.0 / slope), b=float(math.exp(intercept)),
                      residual=float(np.sqrt(np.mean(resid ** 2))), points=pts)


def jackknife_a(points) -> list[float]:
    """``a`` refitted with each point left out in turn."""
    pts = list(points)
    return [fit_scaling_law(pts[:i] + pts[i + 1:]).a for i in range(len(pts))]


def jackknife_variation(a: float, refits) -> float:
    """Largest relative departure of a leave-one-out ``a`` from the full fit."""
    return max(abs(x - a) for x in refits) / a


def iterations_to_reach(fidelities, threshold: float) -> int | None:
    """First iteration index whose fidelity is at or below ``threshold``."""
    for i, f in enumerate(fidelities):
        if f <= threshold:
            return i
    return None


def late_stage_rate(fidelities, window: int = 10) -> float:
    """Mean fidelity improvement per iteration over the final ``window``."""
    f = np.asarray(fidelities, dtype=float)
    if f.size < 2:
        return 0.0
    w = min(window, f.size - 1)
    return float((f[-1 - w] - f[-1]) / w)
