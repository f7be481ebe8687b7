import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from krotov_unitary.errors import ConfigurationError, MonotonicityError
from krotov_unitary.functionals import coefficients_a, overlaps
from krotov_unitary.model import (ControlField, StateSet, SystemModel, TargetGate,
                                  build_guess_field, build_qft_target, build_state_sets)
from krotov_unitary.optimize import (KrotovConfig, KrotovProblem, delta1,
                                     delta2_integral, run_optimization, stationarity_profile,
                                     stationarity_residual, sweep_once,
                                     variational_coefficients_b)
from krotov_unitary.propagation import evolve_states, unpack

from conftest import random_field, random_unit_vectors, small_model


def detuned_two_level(gap=0.5, mu0=1.0):
    dip = mu0 * np.array([[0.0, 1.0], [1.0, 0.0]])
    return SystemModel([0.0], [gap], dip, 1, mu0)


def full_rabi_cycle(gap=0.5, eps=0.3, n_steps=400):
    """Constant field returning the ground level to itself up to a phase."""
    rabi = math.sqrt(gap ** 2 + 4 * eps ** 2)
    return ControlField(np.full(n_steps, eps), 2 * math.pi / rabi)


def small_problem(kind="sm", flavor=None, q=1, n_steps=256, total_time=2000.0):
    m = small_model(6, 4, 2 ** q)
    flavor = flavor or ("ss-basis" if kind == "ss" else "canonical-basis")
    return KrotovProblem.build(m, build_qft_target(q), kind, flavor, total_time, n_steps)


class TestFieldUpdate:
    @pytest.mark.parametrize("kind", ["re", "sm", "ss"])
    def test_update_matches_formula_on_recorded_states(self, kind, rng):
        p = small_problem(kind)
        field = random_field(rng, 256, 2000.0, 0.02)
        old_end, _ = p.forward(field)
        lam = 50.0
        res = sweep_once(field, old_end, p, lam, record_trajectory=True)
        a = coefficients_a(kind, old_end, p.final)
        chi = unpack(p.backward(field, record=True)[1])
        mu = p.model.dipole
        for j in range(0, 256, 17):
            s = np.einsum("k,km,mn,kn->", a, chi[j].conj(), mu, res.trajectory[j])
            expected = -p.shape[j] / lam * s.imag
            assert res.delta_eps[j] == pytest.approx(expected, rel=1e-10, abs=1e-18)

    def test_new_states_follow_new_field(self, rng):
        p = small_problem("sm")
        field = random_field(rng, 256, 2000.0, 0.02)
        old_end, _ = p.forward(field)
        res = sweep_once(field, old_end, p, 30.0)
        direct = evolve_states(p.initial, p.model, res.field)
        assert np.max(np.abs(direct - res.endpoints.members)) <= 1e-12

    def test_exactly_implemented_target_gives_no_update(self):
        m = detuned_two_level()
        p = KrotovProblem.build(m, TargetGate(np.eye(1)), "sm", "canonical-basis",
                                full_rabi_cycle().total_time, 400)
        field = full_rabi_cycle()
        end, _ = p.forward(field)
        assert abs(abs(p.tau(end).value) - 1) <= 1e-12
        res = sweep_once(field, end, p, 1.0)
        assert np.max(np.abs(res.delta_eps)) <= 1e-12


class TestBookkeeping:
    def test_delta1_zero_cases(self, rng):
        a = random_unit_vectors(rng, 3, 5)
        t = random_unit_vectors(rng, 3, 5)
        for kind in ("re", "sm", "ss"):
            assert delta1(kind, a, a, t) == 0.0
        assert delta1("re", a, random_unit_vectors(rng, 3, 5), t) == 0.0

    def test_delta1_non_negative(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 5))
            a, b, t = (random_unit_vectors(rng, n, 6) for _ in range(3))
            assert delta1("sm", a, b, t) >= 0.0
            assert delta1("ss", a, b, t) >= 0.0

    def test_delta1_closed_form(self):
        t = np.eye(2)
        a = np.eye(2)
        b = np.array([[0.5, 0.0], [0.0, 1.0]])
        assert delta1("sm", a, b, t) == pytest.approx(0.25)
        assert delta1("ss", a, b, t) == pytest.approx(0.25)

    def test_delta2_cases(self, rng):
        f = random_field(rng, 64, 10.0)
        assert delta2_integral(f, f, 1e3, np.ones(64)) == 0.0
        g = ControlField(f.samples + 0.3, 10.0)
        assert delta2_integral(f, g, 7.0, np.ones(64)) == pytest.approx(7.0 * 0.09 * 10.0)
        g = random_field(rng, 64, 10.0)
        assert delta2_integral(f, g, 2.0, lambda t: np.exp(-t)) >= 0.0

    def test_delta2_grid_mismatch(self, rng):
        with pytest.raises(ConfigurationError):
            delta2_integral(random_field(rng, 4, 1.0), random_field(rng, 5, 1.0), 1.0,
                            np.ones(4))


class TestStationarity:
    def test_spurious_fixed_point(self):
        m = small_model(6, 4, 4)
        target = TargetGate(np.diag([1, 1j, -1, -1j]))
        zero = ControlField(np.zeros(512), 4.5e4)
        for kind in ("re", "sm", "ss"):
            assert stationarity_residual(zero, m, target, kind) <= 1e-14
        p = KrotovProblem.build(m, target, "sm", "canonical-basis", 4.5e4, 512)
        end, _ = p.forward(zero)
        assert p.tau(end).value.real < 2  # far from the target despite stationarity

    def test_perfect_field_phase_insensitive_functionals(self):
        m, field = detuned_two_level(), full_rabi_cycle()
        for kind in ("sm", "ss"):
            assert stationarity_residual(field, m, TargetGate(np.eye(1)), kind) <= 1e-10

    def test_perfect_field_is_not_stationary_for_re(self):
        # the implemented gate carries a global phase far from +-1
        m, field = detuned_two_level(), full_rabi_cycle()
        assert stationarity_residual(field, m, TargetGate(np.eye(1)), "re") > 1e-3

    def test_profile_length(self, rng):
        p = small_problem("ss")
        assert stationarity_profile(random_field(rng, 256, 2000.0), p).shape == (256,)


class TestVariationalCoefficients:
    def test_matches_update_coefficients(self, rng):
        m = small_model(6, 4, 4)
        target = build_qft_target(2)
        init, final = build_state_sets(m, target, "ss-basis")
        for _ in range(10):
            f = random_field(rng, 80, 300.0, 0.05)
            end = init.replace(evolve_states(init, m, f))
            b = variational_coefficients_b(init, m, f, target)
            a = coefficients_a("ss", end, final)
            assert np.max(np.abs(a - b)) <= 1e-12

    def test_perfect_implementation(self):
        m, field = detuned_two_level(), full_rabi_cycle()
        init, _ = build_state_sets(m, TargetGate(np.eye(1)), "ss-basis")
        b = variational_coefficients_b(init, m, field, TargetGate(np.eye(1)))
        gap = 0.5
        # U(T) = -exp(-i gap T / 2) on the ground level
        phase = cmath.exp(-1j * (math.pi + gap * field.total_time / 2))
        assert abs(b[0] - phase.conjugate()) <= 1e-10
        assert abs(abs(b[0]) - 1) <= 1e-12

    def test_single_state_is_conjugate_tau(self, rng):
        m = small_model(4, 3, 1)
        target = TargetGate(np.array([[1j]]))
        init, final = build_state_sets(m, target, "ss-basis")
        f = random_field(rng, 60, 200.0, 0.05)
        end = evolve_states(init, m, f)
        t = overlaps(end, final).sum()
        b = variational_coefficients_b(init, m, f, target)
        assert abs(b[0] - np.conj(t)) <= 1e-12


class TestRunOptimization:
    def test_trivial_identity(self):
        m = SystemModel([0.3, 0.3], [], np.zeros((2, 2)), 2)
        cfg = KrotovConfig(functional="sm", total_time=10.0, n_steps=16, max_iterations=5)
        res = run_optimization(m, TargetGate(np.eye(2)), cfg, ControlField(np.zeros(16), 10.0))
        assert res.records[0].fidelity == -16.0
        assert res.stop_reason == "fidelity_target" and len(res.records) == 1

    @pytest.mark.parametrize("kind", ["re", "sm", "ss"])
    def test_monotone_descent_small_model(self, kind):
        m = small_model(6, 4, 2)
        cfg = KrotovConfig(functional=kind, lambda0=20.0, n_steps=512, total_time=3000.0,
                           max_iterations=25, epsilon0=0.02)
        recs = run_optimization(m, build_qft_target(1), cfg).records
        assert len(recs) == 26
        for prev, cur in zip(recs, recs[1:]):
            assert cur.J <= prev.J + 1e-9
            assert cur.delta1 >= 0 and cur.delta2_integral >= 0
        assert recs[-1].fidelity < recs[0].fidelity

    def test_recorded_quantities(self):
        m = small_model(6, 4, 2)
        cfg = KrotovConfig(functional="sm", lambda0=20.0, n_steps=512, total_time=3000.0,
                           max_iterations=2, epsilon0=0.02)
        res = run_optimization(m, build_qft_target(1), cfg)
        r = res.records[-1]
        assert r.J == pytest.approx(r.objective + r.delta2_integral, rel=1e-15)
        assert r.J_norm == pytest.approx(r.J / 4, rel=1e-15)
        assert r.fidelity == pytest.approx(math.log10(1 - abs(r.tau) ** 2 / 4), rel=1e-12)
        assert r.norm_error < 1e-10

    def test_continuation_reproduces_uninterrupted_run(self):
        m = small_model(6, 4, 2)
        kw = dict(functional="ss", lambda0=20.0, n_steps=256, total_time=2000.0, epsilon0=0.02)
        full = run_optimization(m, build_qft_target(1), KrotovConfig(max_iterations=6, **kw))
        half = run_optimization(m, build_qft_target(1), KrotovConfig(max_iterations=3, **kw))
        rest = run_optimization(m, build_qft_target(1), KrotovConfig(max_iterations=3, **kw),
                                guess=half.field)
        np.testing.assert_array_equal(rest.field.samples, full.field.samples)

    def test_stationary_guess_stops_on_field_change(self):
        m = small_model(6, 4, 4)
        target = TargetGate(np.diag([1, 1j, -1, -1j]))
        cfg = KrotovConfig(functional="sm", n_steps=128, total_time=1000.0)
        res = run_optimization(m, target, cfg, ControlField(np.zeros(128), 1000.0))
        assert res.stop_reason == "field_converged"
        assert res.records[-1].iteration == 1

    def test_monotonicity_violation_aborts(self):
        m = small_model(6, 4, 2)
        cfg = KrotovConfig(functional="sm", lambda0=20.0, n_steps=256, total_time=2000.0,
                           max_iterations=5, epsilon0=0.02, monotonicity_tolerance=-1.0)
        with pytest.raises(MonotonicityError) as exc:
            run_optimization(m, build_qft_target(1), cfg)
        assert len(exc.value.records) == 2
        assert exc.value.field.n_steps == 256

    def test_two_phase_lambda(self):
        cfg = KrotovConfig(lambda0=1e3, lambda0_initial=10.0, initial_iterations=3)
        assert [cfg.lambda_at(i) for i in (1, 3, 4)] == [10.0, 10.0, 1e3]

    @pytest.mark.parametrize("key,kw", [
        ("functional", dict(functional="xx")),
        ("basis_flavor", dict(functional="sm", basis_flavor="ss-basis")),
        ("lambda0", dict(lambda0=0.0)),
        ("n_steps", dict(n_steps=1)),
        ("shape_form", dict(shape_form="box")),
    ])
    def test_config_validation(self, key, kw):
        with pytest.raises(ConfigurationError) as exc:
            KrotovConfig(**kw)
        assert exc.value.key == key

    def test_grid_mismatch(self):
        m = small_model(6, 4, 2)
        cfg = KrotovConfig(n_steps=64, total_time=100.0)
        with pytest.raises(ConfigurationError):
            run_optimization(m, build_qft_target(1), cfg, ControlField(np.zeros(32), 100.0))

    def test_default_flavors(self):
        assert KrotovConfig(functional="ss").basis_flavor == "ss-basis"
        assert KrotovConfig(functional="re").basis_flavor == "canonical-basis"

    def test_ss_tau_uses_register_images(self, rng):
        p = small_problem("ss", q=2)
        f = random_field(rng, 256, 2000.0, 0.02)
        end, _ = p.forward(f)
        canon = evolve_states(np.eye(p.model.dim)[:4], p.model, f)
        ref = np.einsum("km,km->", p.register_targets.conj(), canon)
        assert abs(p.tau(end).value - ref) <= 1e-12


@pytest.mark.slow
def test_converged_run_residual_bounded_by_last_change():
    m = small_model(6, 4, 2)
    target = build_qft_target(1)
    cfg = KrotovConfig(functional="sm", lambda0=1e3, n_steps=4096, max_iterations=1500,
                       fidelity_target=-4)
    res = run_optimization(m, target, cfg)
    last = res.records[-1]
    assert last.fidelity <= -4
    resid = stationarity_residual(res.field, m, target, "sm")
    assert resid <= 10 * cfg.lambda0 / 1.0 * last.max_field_change


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from(["re", "sm", "ss"]))
def test_single_sweep_never_raises_J(seed, kind):
    r = np.random.default_rng(seed)
    m = small_model(6, 4, 2)
    cfg = KrotovConfig(functional=kind, lambda0=float(r.uniform(5, 200)), n_steps=256,
                       total_time=2000.0, max_iterations=1)
    guess = build_guess_field(0.02, cfg.omega, 2000.0, 256)
    guess = ControlField(guess.samples + 0.005 * r.standard_normal(256), 2000.0)
    recs = run_optimization(m, build_qft_target(1), cfg, guess).records
    assert recs[1].J <= recs[0].J + 1e-9
