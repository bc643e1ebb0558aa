import numpy as np
import pytest

from boussinesq_inverse.core import (
    ModelParams,
    ParameterError,
    ConfigurationError,
    ScalarField,
    SpatialMesh,
    TimeGrid,
    WaveState,
    discrete_l2_norm,
    energy,
)
from boussinesq_inverse.estimates import difference_bound, forward_bound
from boussinesq_inverse.forward import (
    ForwardProblem,
    NewtonConfig,
    StepFailure,
    change_of_variables,
    solve_forward,
    step_theta,
    to_flux_variables,
)
from boussinesq_inverse.harness import ExperimentConfig

from conftest import random_dirichlet_field


def test_zero_data_gives_zero_trajectory(small_mesh):
    M = ScalarField(small_mesh, 1 + 0.2 * np.sin(small_mesh.nodes))
    for at in (0.0, 0.05):
        p = ForwardProblem(ModelParams(0.1, at), small_mesh, TimeGrid(1.0, 10), M,
                           WaveState.zeros(small_mesh))
        traj = solve_forward(p)
        assert np.all(traj.eta == 0) and np.all(traj.vel == 0)
        assert np.all(step_theta(p, WaveState.zeros(small_mesh)).eta.values == 0)


def test_initial_level_is_returned_exactly(small_mesh, pulse_state):
    p = ForwardProblem(ModelParams(0.1, 0.05), small_mesh, TimeGrid(1.0, 5),
                       small_mesh.constant(1.3), pulse_state)
    traj = solve_forward(p)
    assert len(traj) == 6
    assert np.array_equal(traj[0].eta.values, pulse_state.eta.values)
    assert np.array_equal(traj[0].vel.values, pulse_state.vel.values)
    assert all(s.satisfies_dirichlet() for s in traj)


def test_newton_step_matches_linear_fast_path(small_mesh, pulse_state):
    p = ForwardProblem(ModelParams(0.1), small_mesh, TimeGrid(0.1, 1), small_mesh.constant(1.0),
                       pulse_state)
    fast = solve_forward(p).final
    newton = step_theta(p, pulse_state)
    assert np.allclose(fast.eta.values, newton.eta.values, rtol=0, atol=1e-14)
    assert np.allclose(fast.vel.values, newton.vel.values, rtol=0, atol=1e-14)


def test_step_conserves_energy_for_unit_speed(small_mesh):
    rng = np.random.default_rng(11)
    init = WaveState(random_dirichlet_field(small_mesh, rng), random_dirichlet_field(small_mesh, rng))
    p = ForwardProblem(ModelParams(0.1), small_mesh, TimeGrid(0.05, 1), small_mesh.constant(1.0),
                       init, "c")
    after = step_theta(p, init)
    assert energy(after, 0.1) == pytest.approx(energy(init, 0.1), rel=1e-10)


def test_conservation_over_horizon():
    mesh = SpatialMesh(-20.0, 40.0, 500)
    x = mesh.nodes
    pulse = ScalarField(mesh, np.exp(-(x - 3) ** 2)).with_zero_boundary()
    p = ForwardProblem(ModelParams(0.1), mesh, TimeGrid(15.0, 1500), mesh.constant(1.0),
                       WaveState(pulse, pulse), "c")
    traj = solve_forward(p)
    e = np.array([energy(s, 0.1) for s in traj])
    assert np.max(np.abs(e - e[0])) / e[0] <= 1e-9


def test_nonlinear_step_has_small_residual(small_mesh, pulse_state):
    # a half-step and two quarter-steps agree to second order
    M = ScalarField(small_mesh, 1 + 0.2 * np.exp(-(small_mesh.nodes - 5) ** 2))
    errs = []
    for n in (10, 20, 40):
        coarse = solve_forward(ForwardProblem(ModelParams(0.1, 0.05), small_mesh, TimeGrid(1.0, n), M,
                                              pulse_state)).final
        fine = solve_forward(ForwardProblem(ModelParams(0.1, 0.05), small_mesh, TimeGrid(1.0, 2 * n), M,
                                            pulse_state)).final
        errs.append(discrete_l2_norm(coarse.eta - fine.eta))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.8)


def test_grid_convergence_order():
    # simultaneous halving of dx and dt against a fine reference
    def run(n):
        mesh = SpatialMesh(0.0, 20.0, n)
        x = mesh.nodes
        M = ScalarField(mesh, 1 + 0.3 * np.exp(-(x - 10) ** 2))
        pulse = ScalarField(mesh, np.exp(-(x - 6) ** 2)).with_zero_boundary()
        p = ForwardProblem(ModelParams(0.1), mesh, TimeGrid(4.0, n // 4), M, WaveState(pulse, pulse))
        return solve_forward(p).final.eta.values

    ref = run(3200)
    errs = []
    for n in (200, 400, 800):
        v = run(n)
        stride = 3200 // n
        errs.append(np.sqrt(20.0 / n * np.sum((v - ref[::stride]) ** 2)))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 1.8), orders


def test_flux_variables_equivalent_to_depth_variables(small_mesh, pulse_state):
    M = ScalarField(small_mesh, 1 + 0.4 * np.exp(-(small_mesh.nodes - 6) ** 2))
    grid = TimeGrid(2.0, 20)
    depth = solve_forward(ForwardProblem(ModelParams(0.1), small_mesh, grid, M, pulse_state))
    flux_init = to_flux_variables(pulse_state.eta, pulse_state.vel, M)
    flux = solve_forward(ForwardProblem(ModelParams(0.1), small_mesh, grid, 1.0 / M, flux_init, "c"))
    back = change_of_variables(flux.final.eta, flux.final.vel, M)
    assert np.allclose(back.eta.values, depth.final.eta.values, atol=1e-12)
    assert np.allclose(back.vel.values, depth.final.vel.values, atol=1e-12)


def test_change_of_variables_examples(small_mesh):
    rng = np.random.default_rng(2)
    M = ScalarField(small_mesh, rng.uniform(0.5, 2.0, small_mesh.n_nodes))
    N, V = ScalarField(small_mesh, rng.standard_normal(41)), ScalarField(small_mesh, rng.standard_normal(41))
    one = small_mesh.constant(1.0)
    s = change_of_variables(N, V, one)
    assert np.array_equal(s.eta.values, N.values)
    assert np.allclose(change_of_variables(M, V, M).eta.values, 1.0, atol=1e-15)
    back = to_flux_variables(change_of_variables(N, V, M).eta, V, M)
    assert np.allclose(back.eta.values, N.values, rtol=1e-14, atol=1e-14)
    with pytest.raises(ParameterError):
        change_of_variables(N, V, small_mesh.constant(0.0))


def test_problem_validation(small_mesh, pulse_state):
    with pytest.raises(ParameterError):
        ForwardProblem(ModelParams(0.1), small_mesh, TimeGrid(1.0, 2), small_mesh.constant(1e-9), pulse_state)
    bad = WaveState(small_mesh.constant(1.0), small_mesh.zeros())
    with pytest.raises(ConfigurationError):
        ForwardProblem(ModelParams(0.1), small_mesh, TimeGrid(1.0, 2), small_mesh.constant(1.0), bad)
    with pytest.raises(ConfigurationError):
        ForwardProblem(ModelParams(0.1), small_mesh, TimeGrid(1.0, 2), small_mesh.constant(1.0), pulse_state, "x")


def test_step_failure_reports_step_index(small_mesh, pulse_state):
    big = WaveState(pulse_state.eta * 40.0, pulse_state.vel * 40.0)
    p = ForwardProblem(ModelParams(0.1, 0.5), small_mesh, TimeGrid(5.0, 5), small_mesh.constant(0.2), big)
    with pytest.raises(StepFailure) as info:
        solve_forward(p, NewtonConfig(max_iters=3))
    assert info.value.step is not None and info.value.step >= 1


def test_experiment_one_final_state_and_energy_bound():
    cfg = ExperimentConfig.preset("exp1")
    p = cfg.problem()
    flux = ForwardProblem(p.params, p.mesh, p.grid, 1.0 / p.coeff,
                          to_flux_variables(p.init.eta, p.init.vel, p.coeff), "c")
    traj = solve_forward(flux)
    assert np.all(np.isfinite(traj.eta)) and traj.final.satisfies_dirichlet()
    assert forward_bound(traj, flux.coeff, 0.1).holds


def test_difference_bound_for_two_speeds(small_mesh, pulse_state):
    x = small_mesh.nodes
    c = ScalarField(small_mesh, 1 + 0.2 * np.exp(-(x - 5) ** 2))
    ct = ScalarField(small_mesh, 1 - 0.1 * np.exp(-(x - 6) ** 2))
    grid = TimeGrid(2.0, 40)
    a = solve_forward(ForwardProblem(ModelParams(0.1), small_mesh, grid, ct, pulse_state, "c"))
    b = solve_forward(ForwardProblem(ModelParams(0.1), small_mesh, grid, c, pulse_state, "c"))
    chk = difference_bound(a, b, ct, c, 0.1)
    assert chk.holds and np.isfinite(chk.log_lhs)
