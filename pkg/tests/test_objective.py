import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from boussinesq_inverse.core import ConfigurationError, ParameterError, ScalarField, SpatialMesh, WaveState
from boussinesq_inverse.objective import (
    Measurement,
    ObjectiveSpec,
    Variant,
    eval_objective,
    misfit_error,
    regularization_bias,
    regularizer,
)


@pytest.fixture
def unit_setup():
    mesh = SpatialMesh(0.0, 1.0, 20)
    x = mesh.nodes
    m = Measurement(ScalarField(mesh, np.sin(np.pi * x)), ScalarField(mesh, x * (1 - x)))
    return mesh, m


@pytest.mark.parametrize("variant", list(Variant))
def test_zero_at_perfect_fit_without_regularisation(unit_setup, variant):
    mesh, m = unit_setup
    spec = ObjectiveSpec(variant, 0.0, m, beta=0.1)
    assert eval_objective(spec, m.as_state(), mesh.constant(1.7)) == 0.0


def test_dev1_regulariser_vanishes_at_one(unit_setup):
    mesh, m = unit_setup
    for alpha in (0.0, 1e-3, 10.0):
        assert regularizer(ObjectiveSpec("L2_DEV1", alpha, m), mesh.constant(1.0)) == 0.0


def test_plain_regulariser_hand_value(unit_setup):
    mesh, m = unit_setup
    spec = ObjectiveSpec("L2_PLAIN", 0.5, m)
    assert eval_objective(spec, m.as_state(), mesh.constant(2.0)) == pytest.approx(1.0, rel=1e-14)


def test_h1_variant_uses_weighted_norm(unit_setup):
    mesh, m = unit_setup
    spec = ObjectiveSpec("H1_TIKHONOV", 0.0, m, beta=0.6)
    shifted = WaveState(m.m1 + np.sin(np.pi * mesh.nodes), m.m2)
    l2 = ObjectiveSpec("L2_DEV1", 0.0, m)
    assert eval_objective(spec, shifted, mesh.constant(1.0)) > eval_objective(l2, shifted, mesh.constant(1.0))
    with pytest.raises(ParameterError):
        ObjectiveSpec("H1_TIKHONOV", 0.0, m)


def test_l1_bias_and_limit(unit_setup):
    mesh, m = unit_setup
    alpha = 0.3
    spec = ObjectiveSpec("L1_DEV1", alpha, m, l1_smoothing_eps=1e-4)
    value = eval_objective(spec, m.as_state(), mesh.constant(1.0))
    assert value == pytest.approx(regularization_bias(spec), rel=1e-12)
    assert regularization_bias(spec) == pytest.approx(0.5 * alpha * 1e-4 * 1.0)
    c = ScalarField(mesh, 1 + np.cos(3 * mesh.nodes))
    a = regularizer(ObjectiveSpec("L1_DEV1", alpha, m, l1_smoothing_eps=1e-6), c)
    b = regularizer(ObjectiveSpec("L1_DEV1", alpha, m, l1_smoothing_eps=1e-10), c)
    assert abs(a - b) < 1e-5 * mesh.length * alpha


def test_misfit_is_quadratic_in_residual(unit_setup):
    mesh, m = unit_setup
    r = WaveState(ScalarField(mesh, np.sin(5 * mesh.nodes)).with_zero_boundary(), mesh.zeros())
    for variant in Variant:
        spec = ObjectiveSpec(variant, 0.0, m, beta=0.1)
        vals = [eval_objective(spec, WaveState(m.m1 + lam * r.eta, m.m2), mesh.constant(1.0))
                for lam in (0.0, 1.0, 2.0)]
        assert vals[0] == 0.0
        assert vals[2] == pytest.approx(4 * vals[1], rel=1e-13)


@given(st.sampled_from(list(Variant)), st.floats(0, 10), st.integers(0, 2 ** 31))
def test_objective_nonnegative(variant, alpha, seed):
    rng = np.random.default_rng(seed)
    mesh = SpatialMesh(0.0, 1.0, 10)
    m = Measurement(ScalarField(mesh, rng.standard_normal(11)), ScalarField(mesh, rng.standard_normal(11)))
    s = WaveState(ScalarField(mesh, rng.standard_normal(11)), ScalarField(mesh, rng.standard_normal(11)))
    c = ScalarField(mesh, rng.uniform(0.1, 3, 11))
    assert eval_objective(ObjectiveSpec(variant, alpha, m, beta=0.2), s, c) >= 0.0


def test_mesh_mismatch(unit_setup):
    mesh, m = unit_setup
    other = SpatialMesh(0.0, 2.0, 20)
    with pytest.raises(ConfigurationError):
        eval_objective(ObjectiveSpec("L2_DEV1", 0.0, m), m.as_state(), other.constant(1.0))


def test_misfit_error_examples():
    mesh = SpatialMesh(0.0, 1.0, 10)
    f = ScalarField(mesh, np.cos(mesh.nodes))
    assert misfit_error(f, f) == 0.0
    assert misfit_error(f + 0.1, f) == pytest.approx(0.1, rel=1e-14)
    big = SpatialMesh(-20.0, 40.0, 500)
    ind = ScalarField(big, 0.1 * ((big.nodes >= 5) & (big.nodes <= 15)))
    assert abs(misfit_error(big.zeros() + ind, big.zeros()) - 0.1 * math.sqrt(10)) <= big.dx
