"""Domain types, discrete fields and the two norms everything else is measured in.

All containers are frozen after construction. Arrays handed to a container are
copied and flagged read-only, so a field can be shared freely between solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional, Sequence

import numpy as np

COEFF_FLOOR = 1e-6


class BoussinesqError(Exception):
    """Base class for every error raised by this package."""


class InvalidFieldError(BoussinesqError, ValueError):
    pass


class ParameterError(BoussinesqError, ValueError):
    pass


class ConfigurationError(BoussinesqError, ValueError):
    pass


class DomainError(BoussinesqError, ValueError):
    pass


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Dispersion ``beta`` and nonlinearity ``alpha_tilde`` of the wave model."""

    beta: float
    alpha_tilde: float = 0.0

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ParameterError(f"beta must be positive and finite, got {self.beta}")
        if not (self.alpha_tilde >= 0 and math.isfinite(self.alpha_tilde)):
            raise ParameterError(f"alpha_tilde must be >= 0, got {self.alpha_tilde}")

    @property
    def linear(self) -> bool:
        return self.alpha_tilde == 0.0


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform partition of ``[x_left, x_right]`` into ``n_cells`` cells."""

    x_left: float
    x_right: float
    n_cells: int

    def __post_init__(self):
        if not self.x_left < self.x_right:
            raise ParameterError("x_left must be smaller than x_right")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ParameterError(f"n_cells must be an integer >= 2, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        return _frozen_array(np.linspace(self.x_left, self.x_right, self.n_cells + 1))

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights ``w_j * dx`` of the composite trapezoid rule."""
        w = np.full(self.n_nodes, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return _frozen_array(w)

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.n_nodes))

    def constant(self, value: float) -> "ScalarField":
        return ScalarField(self, np.full(self.n_nodes, float(value)))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time levels ``t_k = k * dt`` on ``[0, t_final]``."""

    t_final: float
    n_steps: int
    theta: float = 0.5

    def __post_init__(self):
        if not (self.t_final > 0 and math.isfinite(self.t_final)):
            raise ParameterError(f"t_final must be positive, got {self.t_final}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ParameterError(f"n_steps must be an integer >= 1, got {self.n_steps}")
        if not 0.0 <= self.theta <= 1.0:
            raise ParameterError(f"theta must lie in [0, 1], got {self.theta}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_steps + 1)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of a P1 function on ``mesh``."""

    mesh: SpatialMesh
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.shape != (self.mesh.n_nodes,):
            raise InvalidFieldError(
                f"expected {self.mesh.n_nodes} nodal values, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidFieldError("field contains non-finite entries")
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return len(self.values)

    def __neg__(self):
        return ScalarField(self.mesh, -self.values)

    def __add__(self, other):
        return ScalarField(self.mesh, self.values + _raw(other, self.mesh))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.mesh, self.values - _raw(other, self.mesh))

    def __rsub__(self, other):
        return ScalarField(self.mesh, _raw(other, self.mesh) - self.values)

    def __mul__(self, other):
        return ScalarField(self.mesh, self.values * _raw(other, self.mesh))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.mesh, self.values / _raw(other, self.mesh))

    def __rtruediv__(self, other):
        return ScalarField(self.mesh, _raw(other, self.mesh) / self.values)

    def with_zero_boundary(self) -> "ScalarField":
        v = self.values.copy()
        v[0] = v[-1] = 0.0
        return ScalarField(self.mesh, v)


def _raw(other, mesh: SpatialMesh):
    if isinstance(other, ScalarField):
        if other.mesh != mesh:
            raise ConfigurationError("fields live on different meshes")
        return other.values
    return other


@dataclass(frozen=True, eq=False)
class WaveState:
    """Surface displacement (``eta`` or N) and velocity (``vel``, u or V)."""

    eta: ScalarField
    vel: ScalarField

    def __post_init__(self):
        if self.eta.mesh != self.vel.mesh:
            raise ConfigurationError("eta and vel must share a mesh")

    @property
    def mesh(self) -> SpatialMesh:
        return self.eta.mesh

    @classmethod
    def zeros(cls, mesh: SpatialMesh) -> "WaveState":
        return cls(mesh.zeros(), mesh.zeros())

    def satisfies_dirichlet(self, atol: float = 0.0) -> bool:
        ends = np.r_[self.eta.values[[0, -1]], self.vel.values[[0, -1]]]
        return bool(np.all(np.abs(ends) <= atol))


class Trajectory:
    """All time levels of a solve, stored as two ``(n_steps + 1, n_nodes)`` arrays.

    Indexing returns a :class:`WaveState`; ``states[k]`` lives at ``t = k * dt``.
    """

    def __init__(self, grid: TimeGrid, mesh: SpatialMesh, eta, vel):
        eta = np.asarray(eta, dtype=float)
        vel = np.asarray(vel, dtype=float)
        shape = (grid.n_steps + 1, mesh.n_nodes)
        if eta.shape != shape or vel.shape != shape:
            raise ConfigurationError(f"trajectory arrays must have shape {shape}")
        self.grid = grid
        self.mesh = mesh
        self.eta = _frozen_array(eta)
        self.vel = _frozen_array(vel)

    def __len__(self):
        return self.grid.n_steps + 1

    def __getitem__(self, k: int) -> WaveState:
        return WaveState(ScalarField(self.mesh, self.eta[k]), ScalarField(self.mesh, self.vel[k]))

    def __iter__(self) -> Iterator[WaveState]:
        for k in range(len(self)):
            yield self[k]

    @property
    def states(self) -> Sequence[WaveState]:
        return [self[k] for k in range(len(self))]

    @property
    def final(self) -> WaveState:
        return self[len(self) - 1]

    @property
    def initial(self) -> WaveState:
        return self[0]


@dataclass(frozen=True, eq=False)
class AdmissibleSet:
    """L2 ball of radius ``gamma`` intersected with optional nodal box bounds.

    ``box_lo``/``box_hi`` may be scalars or per-node arrays; ``None`` means
    unbounded on that side.
    """

    gamma: float = math.inf
    box_lo: Optional[object] = None
    box_hi: Optional[object] = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if self.box_lo is not None and self.box_hi is not None:
            if np.any(np.asarray(self.box_lo) > np.asarray(self.box_hi)):
                raise ParameterError("box_lo must not exceed box_hi")

    def bounds(self, n: int):
        lo = np.full(n, -np.inf) if self.box_lo is None else np.broadcast_to(
            np.asarray(self.box_lo, dtype=float), (n,)).copy()
        hi = np.full(n, np.inf) if self.box_hi is None else np.broadcast_to(
            np.asarray(self.box_hi, dtype=float), (n,)).copy()
        return lo, hi


@dataclass(frozen=True)
class EnergyConstants:
    """Growth constants of the a-priori estimates.

    ``k1`` and ``k2`` are exponentials that overflow for realistic domains, so
    they are kept as logarithms; the plain values are available as properties.
    """

    k_c: float
    log_k1: float
    log_k2: float

    def __post_init__(self):
        for name in ("k_c", "log_k1", "log_k2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ParameterError(f"{name} must be finite and nonnegative, got {value}")

    @property
    def k1(self) -> float:
        return _safe_exp(self.log_k1)

    @property
    def k2(self) -> float:
        return _safe_exp(self.log_k2)


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


# -- norms -------------------------------------------------------------------


def _check_finite(f: ScalarField):
    if not np.all(np.isfinite(f.values)):
        raise InvalidFieldError("field contains non-finite entries")


def l2_inner(f: ScalarField, g: ScalarField) -> float:
    """Trapezoid-rule L2 inner product."""
    if f.mesh != g.mesh:
        raise ConfigurationError("fields live on different meshes")
    return float(np.dot(f.mesh.trapezoid_weights * f.values, g.values))


def discrete_l2_norm(f: ScalarField) -> float:
    """``sqrt(sum_j w_j f_j^2 dx)`` with trapezoid weights (1/2 at the ends)."""
    _check_finite(f)
    return math.sqrt(max(l2_inner(f, f), 0.0))


def h1_inner(f: ScalarField, g: ScalarField, beta: float) -> float:
    """Weighted H1 inner product ``int f g + (beta/6) int f' g'`` for P1 fields.

    Both integrals are exact for piecewise-linear functions.
    """
    if beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if f.mesh != g.mesh:
        raise ConfigurationError("fields live on different meshes")
    h = f.mesh.dx
    a, b = f.values, g.values
    # exact P1 mass: h/6 * (2 a_l b_l + a_l b_r + a_r b_l + 2 a_r b_r) per cell
    mass = h / 6.0 * np.sum(
        2 * a[:-1] * b[:-1] + a[:-1] * b[1:] + a[1:] * b[:-1] + 2 * a[1:] * b[1:]
    )
    stiff = np.dot(np.diff(a), np.diff(b)) / h
    return float(mass + beta / 6.0 * stiff)


def weighted_h1_norm(f: ScalarField, beta: float) -> float:
    """``(int f^2 + (beta/6) int (f')^2)^(1/2)`` with exact P1 quadrature."""
    _check_finite(f)
    return math.sqrt(max(h1_inner(f, f, beta), 0.0))


def state_h1_norm(state: WaveState, beta: float) -> float:
    """Product norm ``(||eta||^2 + ||vel||^2)^(1/2)`` in weighted H1."""
    return math.hypot(weighted_h1_norm(state.eta, beta), weighted_h1_norm(state.vel, beta))


def _h1_sq_rows(a: np.ndarray, h: float, beta: float) -> np.ndarray:
    mass = h / 6.0 * np.sum(2 * a[:, :-1] ** 2 + 2 * a[:, :-1] * a[:, 1:] + 2 * a[:, 1:] ** 2, axis=1)
    return mass + beta / 6.0 * np.sum(np.diff(a, axis=1) ** 2, axis=1) / h


def trajectory_h1_norm(traj: Trajectory, beta: float, which: str = "both") -> float:
    """Time-trapezoid approximation of the ``L^2(0,T; H^1_0)`` norm.

    ``which`` selects ``"eta"``, ``"vel"`` or the product norm ``"both"``.
    """
    if beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    h = traj.mesh.dx
    sq = np.zeros(len(traj))
    if which in ("eta", "both"):
        sq += _h1_sq_rows(traj.eta, h, beta)
    if which in ("vel", "both"):
        sq += _h1_sq_rows(traj.vel, h, beta)
    dt = traj.grid.dt
    return math.sqrt(max(dt * (sq.sum() - 0.5 * (sq[0] + sq[-1])), 0.0))


def energy(state: WaveState, beta: float) -> float:
    """``||eta||^2_{H1} + ||vel||^2_{H1}``, conserved by the linear constant-speed model."""
    return h1_inner(state.eta, state.eta, beta) + h1_inner(state.vel, state.vel, beta)


def speed_constant(c: ScalarField, beta: float) -> float:
    """Growth rate ``K_c = L^(1/2) ||c||_{L2} / (beta/6) + (beta/6)^(-1/2)``."""
    b6 = beta / 6.0
    return math.sqrt(c.mesh.length) / b6 * discrete_l2_norm(c) + 1.0 / math.sqrt(b6)


def energy_constants(c: ScalarField, beta: float, t_final: float,
                     c_other: Optional[ScalarField] = None) -> EnergyConstants:
    """Constants of the forward, difference and adjoint energy estimates.

    ``k1`` pairs ``c`` with ``c_other`` (defaults to ``c`` itself).
    """
    k_c = speed_constant(c, beta)
    k_other = k_c if c_other is None else speed_constant(c_other, beta)
    return EnergyConstants(k_c=k_c, log_k1=(k_c + k_other) * t_final, log_k2=k_c * t_final)


__all__ = [
    "COEFF_FLOOR", "BoussinesqError", "InvalidFieldError", "ParameterError",
    "ConfigurationError", "DomainError", "ModelParams", "SpatialMesh", "TimeGrid",
    "ScalarField", "WaveState", "Trajectory", "AdmissibleSet", "EnergyConstants",
    "l2_inner", "discrete_l2_norm", "h1_inner", "weighted_h1_norm", "state_h1_norm",
    "trajectory_h1_norm", "energy", "speed_constant", "energy_constants",
]
