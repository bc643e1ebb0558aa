"""Green's function of ``I - (beta/6) d^2/dx^2`` with homogeneous Dirichlet data.

Used as an independent oracle for the linear flux-variable system: writing the
dispersive operator's inverse as an integral operator turns the PDE into the
ODE system ``N_t = Phi2 V``, ``V_t = Phi2 (c N)`` on nodal values, which is
integrated here with classical RK4.

All kernel evaluations work in shifted coordinates on ``[0, L]`` and are
written with decaying exponentials so that small ``beta`` (large ``L/a``)
does not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BoussinesqError,
    ConfigurationError,
    DomainError,
    ModelParams,
    ParameterError,
    ScalarField,
    TimeGrid,
    Trajectory,
    WaveState,
)


class InstabilityError(BoussinesqError, FloatingPointError):
    """The integral-equation solution blew up (inf-norm above the threshold)."""


class SingularPointError(DomainError):
    """``eval_k`` was asked for the diagonal, where the kernel jumps."""


BLOWUP = 1e12


@dataclass(frozen=True)
class GreenKernel:
    """Kernel data for ``I - (beta/6) d^2`` on ``[0, length]``."""

    beta: float
    length: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if not self.length > 0:
            raise ParameterError(f"length must be positive, got {self.length}")

    @property
    def a(self) -> float:
        """Screening length ``sqrt(beta/6)``."""
        return math.sqrt(self.beta / 6.0)

    @property
    def q(self) -> float:
        return self.length / self.a

    @property
    def sinh_q(self) -> float:
        return math.sinh(self.q) if self.q < 700 else math.inf


def _cosh_ratio(p, q):
    """``cosh(p) / sinh(q)`` for ``|p| <= q`` without overflow."""
    p = np.abs(p)
    return (np.exp(p - q) + np.exp(-p - q)) / (-np.expm1(-2.0 * q))


def _sinh_ratio(p, q):
    """``sinh(p) / sinh(q)`` for ``|p| <= q`` without overflow."""
    s = np.sign(p)
    p = np.abs(p)
    return s * (np.exp(p - q) - np.exp(-p - q)) / (-np.expm1(-2.0 * q))


def _check_domain(k: GreenKernel, *args):
    for v in args:
        v = np.asarray(v)
        if np.any(v < 0) or np.any(v > k.length) or not np.all(np.isfinite(v)):
            raise DomainError(f"arguments must lie in [0, {k.length}]")


def _g(k: GreenKernel, xi, s):
    a, q, L = k.a, k.q, k.length
    d = np.abs(s - xi)
    return (_cosh_ratio((L - d) / a, q) - _cosh_ratio((L - xi - s) / a, q)) / (2.0 * a)


def _k(k: GreenKernel, xi, s, side=None):
    """``dG/ds``; ``side`` = -1 / +1 picks the limit from below / above at ``s = xi``."""
    a, q, L = k.a, k.q, k.length
    sgn = np.sign(xi - s) if side is None else -float(side)
    d = np.abs(xi - s)
    return (3.0 / k.beta) * (_sinh_ratio((L - xi - s) / a, q) + sgn * _sinh_ratio((L - d) / a, q))


def eval_g(k: GreenKernel, xi, s):
    """``G(xi, s)``; vectorised over broadcastable arguments."""
    _check_domain(k, xi, s)
    out = _g(k, np.asarray(xi, float), np.asarray(s, float))
    return float(out) if np.ndim(out) == 0 else out


def eval_k(k: GreenKernel, xi, s):
    """``K(xi, s) = dG/ds`` off the diagonal."""
    _check_domain(k, xi, s)
    xi = np.asarray(xi, float)
    s = np.asarray(s, float)
    if np.any(xi == s):
        raise SingularPointError("K is discontinuous at xi == s; split the integral there")
    out = _k(k, xi, s)
    return float(out) if np.ndim(out) == 0 else out


def eval_k_limit(k: GreenKernel, xi: float, side: int) -> float:
    """One-sided limit of ``K(xi, s)`` as ``s -> xi`` from below (-1) or above (+1)."""
    _check_domain(k, xi)
    if side not in (-1, 1):
        raise ParameterError("side must be -1 or +1")
    return float(_k(k, np.float64(xi), np.float64(xi), side=side))


def kernel_jump(k: GreenKernel, xi: float) -> float:
    """``K(xi, xi-) - K(xi, xi+)``; equals ``6/beta`` for interior ``xi``."""
    return eval_k_limit(k, xi, -1) - eval_k_limit(k, xi, +1)


def _local_nodes(k: GreenKernel, mesh) -> np.ndarray:
    if not math.isclose(mesh.length, k.length, rel_tol=1e-12):
        raise ConfigurationError("mesh length does not match the kernel domain")
    x = mesh.nodes - mesh.x_left
    x[-1] = k.length
    return x


def operator_matrix(k: GreenKernel, which: str, mesh) -> np.ndarray:
    """Dense quadrature matrix ``A`` with ``(Phi phi)(x_i) ~ (A @ phi)_i``.

    Composite trapezoid on the mesh nodes. For ``phi2`` the integral is split
    at ``s = x_i`` and each half uses the one-sided kernel limit at the
    diagonal.
    """
    x = _local_nodes(k, mesh)
    h = mesh.dx
    w = np.full(x.size, h)
    w[[0, -1]] = 0.5 * h
    X, S = np.meshgrid(x, x, indexing="ij")
    if which == "phi1":
        return _g(k, X, S) * w[None, :]
    if which != "phi2":
        raise ConfigurationError(f"which must be 'phi1' or 'phi2', got {which!r}")
    with np.errstate(invalid="ignore"):
        A = _k(k, X, S) * w[None, :]
    lo = _k(k, x, x, side=-1)
    hi = _k(k, x, x, side=+1)
    diag = np.where(np.arange(x.size) > 0, 0.5 * h * lo, 0.0) + \
        np.where(np.arange(x.size) < x.size - 1, 0.5 * h * hi, 0.0)
    np.fill_diagonal(A, diag)
    return A


def apply_phi(k: GreenKernel, which: str, phi: ScalarField) -> ScalarField:
    """``Phi1 phi = int G phi ds`` or ``Phi2 phi = int K phi ds`` at every node."""
    A = operator_matrix(k, which, phi.mesh)
    return ScalarField(phi.mesh, A @ phi.values)


def solve_linear_integral(params: ModelParams, c: ScalarField, init: WaveState,
                          grid: TimeGrid) -> Trajectory:
    """RK4 solution of ``N_t = Phi2 V``, ``V_t = Phi2 (c N)`` with pinned ends.

    Parameters
    ----------
    params : ModelParams
        Must be linear (``alpha_tilde == 0``).
    c : ScalarField
        Speed coefficient; its mesh defines the quadrature nodes.
    init : WaveState
        ``(N0, V0)``.
    grid : TimeGrid
        Only ``dt`` and ``n_steps`` are used; ``theta`` is ignored.

    Raises
    ------
    InstabilityError
        If the inf-norm of the state exceeds ``1e12``.
    """
    if not params.linear:
        raise ParameterError("the integral formulation covers the linear model only")
    mesh = c.mesh
    if init.mesh != mesh:
        raise ConfigurationError("initial data and coefficient must share a mesh")
    k = GreenKernel(params.beta, mesh.length)
    A = operator_matrix(k, "phi2", mesh)
    cv = c.values

    def rhs(n, v):
        dn = A @ v
        dv = A @ (cv * n)
        dn[[0, -1]] = 0.0
        dv[[0, -1]] = 0.0
        return dn, dv

    dt = grid.dt
    N = np.empty((grid.n_steps + 1, mesh.n_nodes))
    V = np.empty_like(N)
    n = init.eta.values.astype(float).copy()
    v = init.vel.values.astype(float).copy()
    n[[0, -1]] = 0.0
    v[[0, -1]] = 0.0
    N[0] = init.eta.values
    V[0] = init.vel.values
    for i in range(1, grid.n_steps + 1):
        k1n, k1v = rhs(n, v)
        k2n, k2v = rhs(n + 0.5 * dt * k1n, v + 0.5 * dt * k1v)
        k3n, k3v = rhs(n + 0.5 * dt * k2n, v + 0.5 * dt * k2v)
        k4n, k4v = rhs(n + dt * k3n, v + dt * k3v)
        n = n + dt / 6.0 * (k1n + 2 * k2n + 2 * k3n + k4n)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        big = max(np.max(np.abs(n)), np.max(np.abs(v)))
        if not big <= BLOWUP:
            raise InstabilityError(f"integral solution blew up at step {i} (|x|_inf = {big:.3e})")
        N[i] = n
        V[i] = v
    return Trajectory(grid, mesh, N, V)
