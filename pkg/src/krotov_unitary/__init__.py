"""Krotov optimization of unitary gates on a register embedded in a
vibronic two-surface model."""
from .analysis import (ScalingFit, field_spectrum, fit_scaling_law,
                       integrated_intensity, late_stage_rate)
from .errors import (ConfigurationError, FitError, MonotonicityError,
                     NumericError, ValidationError)
from .functionals import (coefficients_a, f_re, f_sm, f_ss, fidelity_log10,
                          objective, tau)
from .model import (ControlField, StateSet, SystemModel, TargetGate,
                    build_guess_field, build_qft_target, build_state_sets,
                    build_two_surface_model, franck_condon_dipole,
                    global_phase_phi1, shape_function)
from .optimize import (IterationRecord, KrotovConfig, OptimizationResult,
                       delta1, delta2_integral, run_optimization,
                       stationarity_residual, variational_coefficients_b)
from .propagation import evolve_states, matrix_exponential, propagate_step

__version__ = "0.1.0"
