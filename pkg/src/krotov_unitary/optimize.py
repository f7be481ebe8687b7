"""Krotov iteration for unitary targets on an embedded register.

Each sweep propagates the target images backward under the old field,
then marches forward from t=0, correcting the field at every midpoint
with the states already computed at the preceding grid point and
advancing the forward states with the corrected sample. The reference
field of the penalty is always the previous iterate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .analysis import field_energy, integrated_intensity
from .errors import ConfigurationError, MonotonicityError, NumericError, ValidationError
from .functionals import (KINDS, TauValue, check_flavor, coefficients_a,
                          fidelity_log10, objective, overlaps,
                          register_endpoints, tau)
from .model import (EPSILON0, N_STEPS, OMEGA_00, SHAPE_FORMS, TOTAL_TIME,
                    ControlField, StateSet, SystemModel, TargetGate,
                    build_guess_field, build_state_sets, shape_function)
from .propagation import (BACKWARD, FORWARD, _Packed, evolve_packed,
                          full_propagator, pack, unpack)

log = logging.getLogger(__name__)

DEFAULT_FLAVOR = {"re": "canonical-basis", "sm": "canonical-basis", "ss": "ss-basis"}


@dataclass
class KrotovConfig:
    """Optimization settings.

    ``lambda0_initial`` together with ``initial_iterations`` gives the
    two-phase strategy: a bolder (smaller) step scale for the first
    iterations, then ``lambda0`` for the rest.
    """

    lambda0: float = 1e3
    functional: str = "sm"
    max_iterations: int = 50
    fidelity_target: float = -16.0
    basis_flavor: str | None = None
    epsilon0: float = EPSILON0
    omega: float = OMEGA_00
    total_time: float = TOTAL_TIME
    n_steps: int = N_STEPS
    shape_form: str = "gaussian"
    monotonicity_tolerance: float = 1e-9
    min_field_change: float = 1e-14
    lambda0_initial: float | None = None
    initial_iterations: int = 0

    def __post_init__(self):
        if self.functional not in KINDS:
            raise ConfigurationError(f"unknown functional {self.functional!r}", key="functional")
        if self.basis_flavor is None:
            self.basis_flavor = DEFAULT_FLAVOR[self.functional]
        try:
            check_flavor(self.functional, self.basis_flavor)
        except ValidationError as exc:
            raise ConfigurationError(str(exc), key="basis_flavor") from exc
        if not self.lambda0 > 0:
            raise ConfigurationError("lambda0 must be positive", key="lambda0")
        if self.lambda0_initial is not None and not self.lambda0_initial > 0:
            raise ConfigurationError("lambda0_initial must be positive", key="lambda0_initial")
        if self.n_steps < 2:
            raise ConfigurationError("n_steps must be at least 2", key="n_steps")
        if not self.total_time > 0:
            raise ConfigurationError("total_time must be positive", key="total_time")
        if self.max_iterations < 0:
            raise ConfigurationError("max_iterations must be non-negative", key="max_iterations")
        if self.shape_form not in SHAPE_FORMS:
            raise ConfigurationError(f"unknown shape form {self.shape_form!r}", key="shape_form")

    def lambda_at(self, iteration: int) -> float:
        if self.lambda0_initial is not None and iteration <= self.initial_iterations:
            return self.lambda0_initial
        return self.lambda0


@dataclass
class IterationRecord:
    iteration: int
    J: float
    J_norm: float
    tau: complex
    fidelity: float
    delta1: float
    delta2_integral: float
    field_energy: float
    intensity: float
    max_field_change: float
    objective: float = 0.0
    norm_error: float = 0.0


class OptimizationResult(NamedTuple):
    field: ControlField
    records: list
    stop_reason: str = ""


@dataclass
class SweepResult:
    field: ControlField
    endpoints: StateSet
    delta_eps: np.ndarray
    coupling: np.ndarray
    norm_error: float
    trajectory: np.ndarray | None = None


@dataclass
class KrotovProblem:
    """Everything a sweep needs that stays fixed across iterations."""

    model: SystemModel
    target: TargetGate
    functional: str
    initial: StateSet
    final: StateSet
    shape: np.ndarray
    register_targets: np.ndarray = dc_field(repr=False)
    packed: _Packed = dc_field(repr=False)

    @classmethod
    def build(cls, model: SystemModel, target: TargetGate, functional: str,
              flavor: str, total_time: float, n_steps: int,
              shape_form: str = "gaussian") -> "KrotovProblem":
        if target.n != model.subspace_dim:
            raise ConfigurationError(
                f"target acts on {target.n} levels but the model register has "
                f"{model.subspace_dim}", key="qubits")
        check_flavor(functional, flavor)
        initial, final = build_state_sets(model, target, flavor)
        _, reg_final = build_state_sets(model, target, "canonical-basis")
        t = (np.arange(n_steps) + 0.5) * (total_time / n_steps)
        shape = np.ascontiguousarray(shape_function(t, total_time, shape_form))
        return cls(model, target, functional, initial, final, shape,
                   reg_final.members, _Packed(model))

    @property
    def n(self) -> int:
        return self.target.n

    def forward(self, field: ControlField) -> tuple[StateSet, float]:
        end, _, drift = evolve_packed(pack(self.initial.members), self.packed,
                                      field, FORWARD, False)
        return self.initial.replace(unpack(end)), drift

    def backward(self, field: ControlField, record: bool = True):
        return evolve_packed(pack(self.final.members), self.packed, field,
                             BACKWARD, record)

    def tau(self, endpoints: StateSet) -> TauValue:
        reg = register_endpoints(endpoints, self.initial, self.n)
        return tau(reg, self.register_targets)


def _check_grid(problem: KrotovProblem, field: ControlField) -> None:
    if field.n_steps != problem.shape.size:
        raise ConfigurationError(
            f"field has {field.n_steps} samples, problem grid has {problem.shape.size}",
            key="n_steps")


def sweep_once(field_old: ControlField, endpoints_old: StateSet,
               problem: KrotovProblem, lambda0: float,
               record_trajectory: bool = False) -> SweepResult:
    """One backward pass plus one updating forward pass."""
    _check_grid(problem, field_old)
    a = coefficients_a(problem.functional, endpoints_old, problem.final)
    _, chi, drift_b = problem.backward(field_old, record=True)
    x = pack(problem.initial.members)
    n = field_old.n_steps
    eps_new = np.empty(n)
    coupling = np.empty(n)
    traj = np.empty((n + 1 if record_trajectory else 0,) + x.shape)
    bad, drift_f = _kernels.forward_sweep(
        x, chi, np.ascontiguousarray(a.real), np.ascontiguousarray(a.imag),
        np.ascontiguousarray(field_old.samples), problem.shape, float(lambda0),
        problem.packed.h0s, problem.packed.mu, problem.packed.mu_norm,
        field_old.dt, problem.packed.shift, True, eps_new, coupling, traj)
    if bad >= 0:
        raise NumericError(f"non-finite field correction at step {bad}")
    new_field = ControlField(eps_new, field_old.total_time)
    return SweepResult(new_field, problem.initial.replace(unpack(x)),
                       eps_new - field_old.samples, coupling,
                       max(drift_b, drift_f),
                       unpack(traj) if record_trajectory else None)


def delta1(kind: str, old_endpoints, new_endpoints, target_states) -> float:
    """First-order bookkeeping term of the monotonicity argument."""
    if kind == "re":
        return 0.0
    diff = overlaps(old_endpoints, target_states) - overlaps(new_endpoints, target_states)
    if kind == "sm":
        return float(abs(diff.sum()) ** 2)
    if kind == "ss":
        return float(np.sum(np.abs(diff) ** 2))
    raise ValidationError(f"unknown functional {kind!r}")


def delta2_integral(field_old: ControlField, field_new: ControlField,
                    lambda0: float, shape) -> float:
    """``sum_j lambda0 / s(t_j) * (eps_new - eps_old)^2 * dt``.

    ``shape`` is either the envelope sampled on the field grid or a
    callable of time.
    """
    if field_old.n_steps != field_new.n_steps:
        raise ConfigurationError("fields live on different grids")
    s = shape(field_old.times) if callable(shape) else np.asarray(shape, dtype=float)
    d = field_new.samples - field_old.samples
    return float(np.sum(lambda0 / s * d * d) * field_old.dt)


def stationarity_profile(field: ControlField, problem: KrotovProblem) -> np.ndarray:
    """``C(t_j; eps)`` with both propagations under the same field."""
    _check_grid(problem, field)
    endpoints, _ = problem.forward(field)
    a = coefficients_a(problem.functional, endpoints, problem.final)
    _, chi, _ = problem.backward(field, record=True)
    x = pack(problem.initial.members)
    n = field.n_steps
    eps_out = np.empty(n)
    coupling = np.empty(n)
    _kernels.forward_sweep(
        x, chi, np.ascontiguousarray(a.real), np.ascontiguousarray(a.imag),
        np.ascontiguousarray(field.samples), problem.shape, 1.0,
        problem.packed.h0s, problem.packed.mu, problem.packed.mu_norm,
        field.dt, problem.packed.shift, False, eps_out, coupling,
        np.empty((0,) + x.shape))
    return coupling


def stationarity_residual(field: ControlField, model: SystemModel,
                          target: TargetGate, functional: str,
                          basis_flavor: str | None = None) -> float:
    """``max_t |C(t; eps)|``; zero marks a fixed point of the iteration."""
    flavor = basis_flavor or DEFAULT_FLAVOR[functional]
    problem = KrotovProblem.build(model, target, functional, flavor,
                                  field.total_time, field.n_steps)
    return float(np.max(np.abs(stationarity_profile(field, problem))))


def variational_coefficients_b(l_states: StateSet, model: SystemModel,
                               field: ControlField, target: TargetGate) -> np.ndarray:
    """``b_l = <l| U^dagger(T, 0) O |l>`` from the dense evolution operator."""
    u = full_propagator(model, field)
    o = target.embed(model.dim)
    ls = l_states.members
    return np.einsum("lm,mn,ln->l", ls.conj(), u.conj().T @ o, ls)


class _Stepper:
    """Bookkeeping shared by the plain and continued runs."""

    def __init__(self, model, target, config: KrotovConfig):
        self.config = config
        self.model = model
        self.problem = KrotovProblem.build(model, target, config.functional,
                                           config.basis_flavor, config.total_time,
                                           config.n_steps, config.shape_form)

    def record(self, iteration, field, endpoints, old_endpoints=None,
               old_field=None, lam=None, norm_error=0.0) -> IterationRecord:
        p, kind = self.problem, self.config.functional
        t = p.tau(endpoints)
        obj = objective(kind, endpoints, p.final)
        if old_field is None:
            d1 = d2 = change = 0.0
        else:
            d1 = delta1(kind, old_endpoints, endpoints, p.final)
            d2 = delta2_integral(old_field, field, lam, p.shape)
            change = float(np.max(np.abs(field.samples - old_field.samples)))
        j = obj.value + d2
        scale = p.n ** 2 if kind == "sm" else p.n
        return IterationRecord(
            iteration=iteration, J=j, J_norm=j / scale, tau=t.value,
            fidelity=fidelity_log10(t), delta1=d1, delta2_integral=d2,
            field_energy=field_energy(field),
            intensity=integrated_intensity(field, self.model.mu0),
            max_field_change=change, objective=obj.value,
            norm_error=norm_error)


def run_optimization(model: SystemModel, target: TargetGate, config: KrotovConfig,
                     guess: ControlField | None = None,
                     callback: Callable[[IterationRecord], None] | None = None
                     ) -> OptimizationResult:
    """Iterate sweeps until a stopping rule fires.

    Stops at ``max_iterations``, when the fidelity reaches
    ``fidelity_target`` or when the largest field change drops below
    ``min_field_change``. Raises :class:`MonotonicityError` if ``J`` rises
    by more than ``monotonicity_tolerance`` between iterations.
    """
    stepper = _Stepper(model, target, config)
    problem = stepper.problem
    if guess is None:
        guess = build_guess_field(config.epsilon0, config.omega, config.total_time,
                                  config.n_steps, config.shape_form)
    _check_grid(problem, guess)
    field = guess
    endpoints, drift = problem.forward(field)
    records = [stepper.record(0, field, endpoints, norm_error=drift)]
    if callback:
        callback(records[-1])
    if records[-1].fidelity <= config.fidelity_target:
        return OptimizationResult(field, records, "fidelity_target")
    reason = "max_iterations"
    for i in range(1, config.max_iterations + 1):
        lam = config.lambda_at(i)
        res = sweep_once(field, endpoints, problem, lam)
        rec = stepper.record(i, res.field, res.endpoints, endpoints, field, lam,
                             res.norm_error)
        records.append(rec)
        if callback:
            callback(rec)
        prev = records[-2]
        if rec.J > prev.J + config.monotonicity_tolerance or \
                rec.delta1 < -config.monotonicity_tolerance:
            raise MonotonicityError(
                f"J rose from {prev.J!r} to {rec.J!r} at iteration {i}",
                records, res.field)
        field, endpoints = res.field, res.endpoints
        if rec.fidelity <= config.fidelity_target:
            reason = "fidelity_target"
            break
        if rec.max_field_change < config.min_field_change:
            reason = "field_converged"
            break
    log.info("stopped after %d iterations (%s)", records[-1].iteration, reason)
    return OptimizationResult(field, records, reason)
