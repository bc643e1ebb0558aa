import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from boussinesq_inverse import ModelParams, ScalarField, SpatialMesh, TimeGrid, WaveState

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@pytest.fixture
def small_mesh():
    return SpatialMesh(0.0, 10.0, 40)


@pytest.fixture
def pulse_state(small_mesh):
    x = small_mesh.nodes
    eta = ScalarField(small_mesh, np.exp(-(x - 3.0) ** 2)).with_zero_boundary()
    vel = ScalarField(small_mesh, 0.5 * np.exp(-(x - 4.0) ** 2)).with_zero_boundary()
    return WaveState(eta, vel)


def random_dirichlet_field(mesh, rng, scale=1.0):
    v = scale * rng.standard_normal(mesh.n_nodes)
    v[[0, -1]] = 0.0
    return ScalarField(mesh, v)


# one verdict line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
