"""A-priori energy bounds of the linear model, evaluated as checkable inequalities.

The right-hand sides carry factors ``exp(K_c T)`` that overflow double
precision for realistic ``T``, so every comparison is made between logarithms.
Norms in time are trapezoid approximations of ``L2(0, T; H1_beta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .core import (
    ConfigurationError,
    ScalarField,
    Trajectory,
    discrete_l2_norm,
    speed_constant,
    state_h1_norm,
    trajectory_h1_norm,
)


@dataclass(frozen=True)
class BoundCheck:
    """``lhs <= rhs`` stored as natural logarithms."""

    name: str
    log_lhs: float
    log_rhs: float

    @property
    def holds(self) -> bool:
        return self.log_lhs < self.log_rhs

    @property
    def log_margin(self) -> float:
        return self.log_rhs - self.log_lhs


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def forward_bound(traj: Trajectory, c: ScalarField, beta: float) -> BoundCheck:
    """``||(N,V)||^2 <= T^(1/2) ||(N0,V0)||^2_H1 exp(K_c T)`` (squared form)."""
    T = traj.grid.t_final
    lhs = trajectory_h1_norm(traj, beta, "both") ** 2
    n0 = state_h1_norm(traj.initial, beta) ** 2
    log_rhs = 0.5 * math.log(T) + _log(n0) + speed_constant(c, beta) * T
    return BoundCheck("forward", _log(lhs), log_rhs)


def difference_bound(traj_tilde: Trajectory, traj: Trajectory, c_tilde: ScalarField,
                     c: ScalarField, beta: float) -> BoundCheck:
    """Difference of two forward solutions with equal initial data and speeds ``c~``, ``c``."""
    if traj_tilde.grid != traj.grid or traj_tilde.mesh != traj.mesh:
        raise ConfigurationError("trajectories must share grid and mesh")
    T = traj.grid.t_final
    L = traj.mesh.length
    diff = Trajectory(traj.grid, traj.mesh, traj_tilde.eta - traj.eta, traj_tilde.vel - traj.vel)
    lhs = trajectory_h1_norm(diff, beta, "both")
    b6 = beta / 6.0
    log_rhs = (0.5 * math.log(L) + 1.5 * math.log(T) - math.log(b6)
               + _log(discrete_l2_norm(c_tilde - c)) + _log(state_h1_norm(traj.initial, beta))
               + (speed_constant(c_tilde, beta) + speed_constant(c, beta)) * T)
    return BoundCheck("difference", _log(lhs), log_rhs)


def adjoint_bound(adj: Trajectory, c: ScalarField, beta: float) -> BoundCheck:
    """``||(eta,gamma)|| <= T^(1/2) ||(eta_T,gamma_T)||_H1 exp(K_c T)``."""
    T = adj.grid.t_final
    lhs = trajectory_h1_norm(adj, beta, "both")
    log_rhs = 0.5 * math.log(T) + _log(state_h1_norm(adj.final, beta)) + speed_constant(c, beta) * T
    return BoundCheck("adjoint", _log(lhs), log_rhs)


def adjoint_difference_bound(adj_tilde: Trajectory, adj: Trajectory, c_tilde: ScalarField,
                             c: ScalarField, beta: float,
                             gamma_tilde_norm: Optional[float] = None) -> BoundCheck:
    """Difference of two adjoint solutions for speeds ``c~`` and ``c``.

    The bound is
    ``T^(1/2) [ ||(R_T,H_T)|| + L^(1/2)/(beta/6) T^(1/2) ||c~-c|| ||gamma~|| ] exp(K_c T)``.
    """
    if adj_tilde.grid != adj.grid or adj_tilde.mesh != adj.mesh:
        raise ConfigurationError("trajectories must share grid and mesh")
    T = adj.grid.t_final
    L = adj.mesh.length
    diff = Trajectory(adj.grid, adj.mesh, adj_tilde.eta - adj.eta, adj_tilde.vel - adj.vel)
    lhs = trajectory_h1_norm(diff, beta, "both")
    if gamma_tilde_norm is None:
        gamma_tilde_norm = trajectory_h1_norm(adj_tilde, beta, "vel")
    inner = (state_h1_norm(diff.final, beta)
             + math.sqrt(L) / (beta / 6.0) * math.sqrt(T) * discrete_l2_norm(c_tilde - c)
             * gamma_tilde_norm)
    log_rhs = 0.5 * math.log(T) + _log(inner) + speed_constant(c, beta) * T
    return BoundCheck("adjoint_difference", _log(lhs), log_rhs)


__all__ = ["BoundCheck", "forward_bound", "difference_bound", "adjoint_bound",
           "adjoint_difference_bound"]
