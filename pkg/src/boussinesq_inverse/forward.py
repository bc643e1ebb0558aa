"""Forward solver for the variable-depth Boussinesq system.

Space is discretised with P1 elements, time with the theta-scheme applied to
the mass-weighted unknowns. Products that appear inside derivatives
(``M*eta``, ``(1 + a*eta/M)*u``, ``(u/M)**2``) are formed nodewise and then
treated as P1 functions, so the substitution ``N = M*eta`` maps the scheme
onto itself exactly.

A problem can be posed with the depth coefficient ``M`` acting on ``(eta, u)``
(``coeff_kind="M"``) or, for the linear model, with the speed ``c = 1/M``
acting on ``(N, V)`` (``coeff_kind="c"``). Both share the same compiled
stepper.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import _kernels as K
from .core import (
    COEFF_FLOOR,
    BoussinesqError,
    ConfigurationError,
    ModelParams,
    ParameterError,
    ScalarField,
    SpatialMesh,
    TimeGrid,
    Trajectory,
    WaveState,
)

_STATUS_TEXT = {
    K.NO_CONVERGENCE: "Newton iteration did not converge",
    K.SINGULAR: "singular step matrix",
    K.NONFINITE: "non-finite residual",
}


class StepFailure(BoussinesqError, RuntimeError):
    """A time step could not be completed; refine dt/dx or lower the amplitude."""

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


@dataclass(frozen=True)
class NewtonConfig:
    abs_tol: float = 1e-10
    max_iters: int = 25

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ParameterError("abs_tol must be positive")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class ForwardProblem:
    """Everything needed for one forward solve.

    Parameters
    ----------
    params : ModelParams
    mesh : SpatialMesh
    grid : TimeGrid
    coeff : ScalarField
        Depth coefficient ``M`` or, with ``coeff_kind="c"``, the speed ``c``.
        Must stay above :data:`~boussinesq_inverse.core.COEFF_FLOOR`.
    init : WaveState
        Initial data; ``(eta0, u0)`` for ``"M"`` problems, ``(N0, V0)`` for ``"c"``.
    coeff_kind : {"M", "c"}
    """

    params: ModelParams
    mesh: SpatialMesh
    grid: TimeGrid
    coeff: ScalarField
    init: WaveState
    coeff_kind: str = "M"

    def __post_init__(self):
        if self.coeff_kind not in ("M", "c"):
            raise ConfigurationError(f"coeff_kind must be 'M' or 'c', got {self.coeff_kind!r}")
        if self.coeff.mesh != self.mesh or self.init.mesh != self.mesh:
            raise ConfigurationError("coefficient and initial data must live on the problem mesh")
        if np.min(self.coeff.values) < COEFF_FLOOR:
            raise ParameterError(
                f"coefficient must stay >= {COEFF_FLOOR}, min is {np.min(self.coeff.values)}"
            )
        if not self.init.satisfies_dirichlet(atol=1e-12):
            raise ConfigurationError("initial data must vanish at both boundary nodes")

    def with_coeff(self, coeff) -> "ForwardProblem":
        if not isinstance(coeff, ScalarField):
            coeff = ScalarField(self.mesh, coeff)
        return ForwardProblem(self.params, self.mesh, self.grid, coeff, self.init, self.coeff_kind)

    def with_init(self, init: WaveState) -> "ForwardProblem":
        return ForwardProblem(self.params, self.mesh, self.grid, self.coeff, init, self.coeff_kind)

    @property
    def depth(self) -> np.ndarray:
        """Nodal depth coefficient ``M`` regardless of ``coeff_kind``."""
        v = self.coeff.values
        return v if self.coeff_kind == "M" else 1.0 / v


def h1_bands(mesh: SpatialMesh, beta: float) -> Tuple[float, float]:
    """Diagonal and off-diagonal of the interior block of ``mass + (beta/6) stiff``."""
    h = mesh.dx
    b6 = beta / 6.0
    return 4.0 * h / 6.0 + 2.0 * b6 / h, h / 6.0 - b6 / h


def change_of_variables(N: ScalarField, V: ScalarField, M: ScalarField) -> WaveState:
    """Map flux variables ``(N, V)`` to ``(eta, u) = (N/M, V)``."""
    if np.min(M.values) < COEFF_FLOOR:
        raise ParameterError(f"coefficient must stay >= {COEFF_FLOOR}")
    return WaveState(ScalarField(N.mesh, N.values / M.values), V)


def to_flux_variables(eta: ScalarField, u: ScalarField, M: ScalarField) -> WaveState:
    """Inverse of :func:`change_of_variables`: ``(N, V) = (M*eta, u)``."""
    if np.min(M.values) < COEFF_FLOOR:
        raise ParameterError(f"coefficient must stay >= {COEFF_FLOOR}")
    return WaveState(ScalarField(eta.mesh, M.values * eta.values), u)


def _internal_init(problem: ForwardProblem, state: WaveState):
    """Interior ``(eta, u)`` arrays in depth variables."""
    eta = state.eta.values[1:-1]
    u = state.vel.values[1:-1]
    if problem.coeff_kind == "c":
        eta = eta * problem.coeff.values[1:-1]
    return np.ascontiguousarray(eta, dtype=float), np.ascontiguousarray(u, dtype=float)


def _external(problem: ForwardProblem, eta_int: np.ndarray, u_int: np.ndarray):
    """Pad interior arrays with boundary zeros and convert to the problem's variables."""
    shape = eta_int.shape[:-1] + (eta_int.shape[-1] + 2,)
    eta = np.zeros(shape)
    vel = np.zeros(shape)
    eta[..., 1:-1] = eta_int
    vel[..., 1:-1] = u_int
    if problem.coeff_kind == "c":
        eta = eta * problem.depth
    return eta, vel


def _check_status(status, step, res):
    # kernels report the 0-based level being advanced; steps are counted from 1
    step = int(step) + 1
    if status != K.OK:
        raise StepFailure(
            f"{_STATUS_TEXT.get(status, 'step failed')} at step {step} "
            f"(last residual {res:.3e}); refine dt/dx",
            step=step,
            residual=float(res),
        )


def step_theta(problem: ForwardProblem, state_n: WaveState,
               newton: NewtonConfig = NewtonConfig()) -> WaveState:
    """Advance ``state_n`` by one theta-step of ``problem.grid``."""
    if state_n.mesh != problem.mesh:
        raise ConfigurationError("state lives on a different mesh")
    eta0, u0 = _internal_init(problem, state_n)
    M = np.ascontiguousarray(problem.depth[1:-1])
    hd, ho = h1_bands(problem.mesh, problem.params.beta)
    eta = np.empty_like(eta0)
    u = np.empty_like(u0)
    status, _, res = K.theta_step(eta0, u0, M, hd, ho, problem.grid.dt, problem.grid.theta,
                                  problem.params.alpha_tilde, newton.abs_tol,
                                  newton.max_iters, eta, u)
    _check_status(status, 0, res)
    e, v = _external(problem, eta, u)
    return WaveState(ScalarField(problem.mesh, e), ScalarField(problem.mesh, v))


def march_internal(problem: ForwardProblem, newton: NewtonConfig = NewtonConfig()):
    """Run the compiled march; returns interior depth-variable arrays ``(eta, u)``.

    Shapes are ``(n_steps + 1, n_nodes - 2)``.
    """
    eta0, u0 = _internal_init(problem, problem.init)
    M = np.ascontiguousarray(problem.depth[1:-1])
    hd, ho = h1_bands(problem.mesh, problem.params.beta)
    n_steps = problem.grid.n_steps
    eta = np.empty((n_steps + 1, eta0.shape[0]))
    u = np.empty_like(eta)
    status, step, res, _ = K.march(eta0, u0, M, hd, ho, problem.grid.dt, problem.grid.theta,
                                   problem.params.alpha_tilde, n_steps, newton.abs_tol,
                                   newton.max_iters, problem.params.linear, eta, u)
    _check_status(status, step, res)
    return eta, u


def solve_forward(problem: ForwardProblem, newton: NewtonConfig = NewtonConfig()) -> Trajectory:
    """All ``n_steps + 1`` levels of the solution, ``states[0]`` being the initial data.

    The linear model (``alpha_tilde == 0``) factors the step matrix once and
    reuses it; otherwise each step runs Newton's method.

    Raises
    ------
    StepFailure
        When a step fails; ``.step`` holds the 1-based index of the failing
        step (the one that would have produced level ``step``).
    """
    eta, u = march_internal(problem, newton)
    e, v = _external(problem, eta, u)
    # the initial level is returned exactly as supplied
    e[0] = problem.init.eta.values
    v[0] = problem.init.vel.values
    return Trajectory(problem.grid, problem.mesh, e, v)


def final_state(problem: ForwardProblem, newton: NewtonConfig = NewtonConfig()) -> WaveState:
    return solve_forward(problem, newton).final
