import numpy as np
import pytest

from krotov_unitary.model import ControlField, build_two_surface_model


def small_model(m_g=6, m_e=4, n=2, **kw):
    """Few-level surrogate that keeps propagation tests fast."""
    return build_two_surface_model(m_g=m_g, m_e=m_e, subspace_dim=n, **kw)


def random_field(rng, n_steps, total_time, scale=0.01):
    return ControlField(scale * rng.standard_normal(n_steps), total_time)


def random_unit_vectors(rng, n, dim):
    v = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
