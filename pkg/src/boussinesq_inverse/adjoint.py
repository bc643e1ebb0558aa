"""Adjoint states and gradients of the misfit functionals.

Two routes are provided:

* the *continuous* adjoint of the linear flux-variable model, marched
  backward with the same theta-scheme, together with the gradient density
  ``int_0^T N gamma_x dt + alpha c``;
* the *discrete* adjoint, which differentiates the implemented time stepper
  exactly (Newton-converged implicit relation, transposed Jacobians) and is
  what the optimiser uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _kernels as K
from .core import (
    AdmissibleSet,
    ConfigurationError,
    ModelParams,
    ParameterError,
    ScalarField,
    SpatialMesh,
    TimeGrid,
    Trajectory,
    WaveState,
)
from .fem import p1_derivative
from .forward import (
    ForwardProblem,
    NewtonConfig,
    StepFailure,
    _external,
    h1_bands,
    march_internal,
)
from .objective import ObjectiveSpec, eval_objective, misfit_gradient, regularizer_gradient
from .optim import project_admissible


@dataclass(frozen=True, eq=False)
class AdjointState:
    """Adjoint pair ``(eta, gamma)`` at one time level."""

    eta_adj: ScalarField
    gamma_adj: ScalarField

    def __post_init__(self):
        if self.eta_adj.mesh != self.gamma_adj.mesh:
            raise ConfigurationError("adjoint components must share a mesh")

    @property
    def mesh(self):
        return self.eta_adj.mesh

    def as_wave_state(self) -> WaveState:
        return WaveState(self.eta_adj, self.gamma_adj)


@dataclass(frozen=True, eq=False)
class GradientField:
    """Partial derivatives of an objective with respect to nodal coefficient values."""

    values: ScalarField

    @property
    def mesh(self):
        return self.values.mesh

    def as_density(self) -> ScalarField:
        """Divide by the trapezoid weights: the L2 representative of the gradient."""
        return ScalarField(self.mesh, self.values.values / self.mesh.trapezoid_weights)


# -- continuous adjoint of the linear flux-variable model -------------------


def _interior_ops(mesh: SpatialMesh, beta: float):
    m = mesh.n_nodes - 2
    hd, ho = h1_bands(mesh, beta)
    H = sp.diags([np.full(m - 1, ho), np.full(m, hd), np.full(m - 1, ho)], [-1, 0, 1], format="csc")
    B = sp.diags([np.full(m - 1, 0.5), np.full(m - 1, -0.5)], [-1, 1], format="csc")
    return H, B


def solve_adjoint(c: ScalarField, final_data: AdjointState, params: ModelParams,
                  mesh: SpatialMesh, grid: TimeGrid) -> Trajectory:
    """March the adjoint system backward from ``t = T``.

    The returned trajectory is indexed by forward time (``[k]`` at
    ``t = k*dt``); its ``eta`` array holds the adjoint ``eta`` and its ``vel``
    array the adjoint ``gamma``. The scheme is the theta-scheme in reversed
    time ``tau = T - t``; with ``theta = 1/2`` it is the exact transpose of the
    forward stepper in the h1 pairing.
    """
    if not params.linear:
        raise ParameterError("the continuous adjoint is defined for the linear model only")
    if c.mesh != mesh or final_data.mesh != mesh:
        raise ConfigurationError("coefficient and final data must live on the given mesh")
    ends = np.r_[final_data.eta_adj.values[[0, -1]], final_data.gamma_adj.values[[0, -1]]]
    if np.any(np.abs(ends) > 1e-12):
        raise ConfigurationError("adjoint final data must vanish at the boundary")
    H, B = _interior_ops(mesh, params.beta)
    C = sp.diags(c.values[1:-1])
    Z = sp.csc_matrix(H.shape)
    # d/dtau (H eta, H gamma) = G (eta, gamma), G = [[0, -C B], [-B, 0]]
    G = sp.bmat([[Z, -C @ B], [-B, Z]], format="csc")
    P = sp.block_diag([H, H], format="csc")
    dt, th = grid.dt, grid.theta
    lhs = splu((P - dt * th * G).tocsc())
    rhs_op = (P + dt * (1.0 - th) * G).tocsr()
    m = mesh.n_nodes - 2
    lam = np.empty((grid.n_steps + 1, 2 * m))
    lam[-1] = np.r_[final_data.eta_adj.values[1:-1], final_data.gamma_adj.values[1:-1]]
    for k in range(grid.n_steps, 0, -1):
        lam[k - 1] = lhs.solve(rhs_op @ lam[k])
    if not np.all(np.isfinite(lam)):
        raise StepFailure("adjoint solve produced non-finite values")
    eta = np.zeros((grid.n_steps + 1, mesh.n_nodes))
    gam = np.zeros_like(eta)
    eta[:, 1:-1] = lam[:, :m]
    gam[:, 1:-1] = lam[:, m:]
    return Trajectory(grid, mesh, eta, gam)


def gradient_continuous(c: ScalarField, forward_traj: Trajectory, adjoint_traj: Trajectory,
                        alpha: float) -> GradientField:
    """Gradient density ``int_0^T N gamma_x dt + alpha c`` at the nodes.

    ``forward_traj`` holds ``(N, V)`` for speed ``c``; ``adjoint_traj`` must have
    been started from ``(N(T) - m1, V(T) - m2)``. The time integral is the
    trapezoid rule, ``gamma_x`` the nodal average of cell slopes.
    """
    if forward_traj.grid != adjoint_traj.grid or forward_traj.mesh != adjoint_traj.mesh:
        raise ConfigurationError("forward and adjoint trajectories must share grid and mesh")
    if c.mesh != forward_traj.mesh:
        raise ConfigurationError("coefficient lives on a different mesh")
    gx = p1_derivative(adjoint_traj.vel, forward_traj.mesh.dx)
    prod = forward_traj.eta * gx
    dt = forward_traj.grid.dt
    integral = dt * (prod.sum(axis=0) - 0.5 * (prod[0] + prod[-1]))
    return GradientField(ScalarField(c.mesh, integral + alpha * c.values))


# -- discrete adjoint ---------------------------------------------------------


def value_and_gradient(objective: ObjectiveSpec, problem: ForwardProblem,
                       newton: NewtonConfig = NewtonConfig()) -> Tuple[float, GradientField]:
    """Objective value and its exact discrete gradient in one forward/backward pass.

    The gradient is taken with respect to ``problem.coeff`` (depth ``M`` or
    speed ``c`` according to ``problem.coeff_kind``).
    """
    mesh = problem.mesh
    eta_int, u_int = march_internal(problem, newton)
    e, v = _external(problem, eta_int[-1], u_int[-1])
    final = WaveState(ScalarField(mesh, e), ScalarField(mesh, v))
    value = eval_objective(objective, final, problem.coeff)

    g1, g2 = misfit_gradient(objective, final)
    M = np.ascontiguousarray(problem.depth[1:-1])
    if problem.coeff_kind == "c":
        # N = M * eta on the final level
        g_eta = M * g1[1:-1]
        explicit_M = g1[1:-1] * eta_int[-1]
    else:
        g_eta = g1[1:-1].copy()
        explicit_M = np.zeros_like(M)
    g_u = np.ascontiguousarray(g2[1:-1])
    g_eta = np.ascontiguousarray(g_eta)

    hd, ho = h1_bands(mesh, problem.params.beta)
    grad_M = np.zeros_like(M)
    mu_eta = np.empty_like(M)
    mu_u = np.empty_like(M)
    status = K.adjoint_sweep(eta_int, u_int, M, hd, ho, problem.grid.dt, problem.grid.theta,
                             problem.params.alpha_tilde, problem.params.linear, g_eta, g_u,
                             grad_M, mu_eta, mu_u)
    if status != K.OK:
        raise StepFailure("singular transposed step matrix in the adjoint sweep")
    grad_M += explicit_M

    full = np.zeros(mesh.n_nodes)
    if problem.coeff_kind == "c":
        # initial depth-variable data eta0 = N0 / M also depends on M
        N0 = problem.init.eta.values[1:-1]
        grad_M += mu_eta * (-N0 / M ** 2)
        full[1:-1] = -M ** 2 * grad_M
    else:
        full[1:-1] = grad_M
    full += regularizer_gradient(objective, problem.coeff)
    if not np.all(np.isfinite(full)):
        raise StepFailure("non-finite gradient")
    return value, GradientField(ScalarField(mesh, full))


def gradient_discrete(objective: ObjectiveSpec, problem: ForwardProblem,
                      newton: NewtonConfig = NewtonConfig()) -> GradientField:
    """Exact gradient of the discrete objective with respect to nodal coefficients."""
    return value_and_gradient(objective, problem, newton)[1]


def objective_value(objective: ObjectiveSpec, problem: ForwardProblem,
                    newton: NewtonConfig = NewtonConfig()) -> float:
    """Discrete objective at ``problem.coeff`` (forward solve only)."""
    eta_int, u_int = march_internal(problem, newton)
    e, v = _external(problem, eta_int[-1], u_int[-1])
    final = WaveState(ScalarField(problem.mesh, e), ScalarField(problem.mesh, v))
    return eval_objective(objective, final, problem.coeff)


def optimality_residual(c: ScalarField, grad: GradientField, set: AdmissibleSet) -> float:
    """Projected-gradient inf-norm ``||c - P(c - grad)||_inf``.

    Zero exactly when the first-order variational inequality holds on the
    discrete admissible set.
    """
    stepped = ScalarField(c.mesh, c.values - grad.values.values)
    return float(np.max(np.abs(c.values - project_admissible(stepped, set).values)))


@dataclass(frozen=True)
class FDCheckResult:
    """Outcome of a componentwise finite-difference gradient check."""

    gradient: np.ndarray
    fd_gradient: np.ndarray
    rel_errors: np.ndarray

    @property
    def max_rel_error(self) -> float:
        return float(np.max(self.rel_errors))


def finite_difference_check(objective: ObjectiveSpec, problem: ForwardProblem,
                            newton: NewtonConfig = NewtonConfig(abs_tol=1e-13, max_iters=50),
                            eps_scale: float = 1e-5, floor: float = 1e-3) -> FDCheckResult:
    """Compare :func:`gradient_discrete` with central differences at every node.

    Node ``j`` is perturbed by ``eps_scale * (1 + |c_j|)``. The relative error
    is ``|g_j - fd_j| / max(|fd_j|, floor * max|fd|)``; the floor keeps nodes
    the wave never reaches, whose partials vanish, from dividing by zero.
    """
    g = gradient_discrete(objective, problem, newton).values.values
    c = problem.coeff.values
    fd = np.empty_like(c)
    for j in range(c.size):
        e = eps_scale * (1.0 + abs(c[j]))
        up = c.copy()
        dn = c.copy()
        up[j] += e
        dn[j] -= e
        fd[j] = (objective_value(objective, problem.with_coeff(up), newton)
                 - objective_value(objective, problem.with_coeff(dn), newton)) / (2.0 * e)
    scale = max(floor * float(np.max(np.abs(fd))), np.finfo(float).tiny)
    rel = np.abs(g - fd) / np.maximum(np.abs(fd), scale)
    return FDCheckResult(g, fd, rel)
