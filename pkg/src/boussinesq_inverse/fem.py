"""P1 finite elements on a uniform 1D mesh.

Every operator here is tridiagonal. The h1 operator ``mass + (beta/6) stiff``
is the discrete version of ``I - (beta/6) d^2/dx^2`` and carries Dirichlet
rows (identity) at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import BoussinesqError, InvalidFieldError, ParameterError, ScalarField, SpatialMesh


class SingularMatrixError(BoussinesqError, ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class TriDiagMatrix:
    """Banded storage: ``sub[i] = A[i, i-1]``, ``diag[i] = A[i, i]``, ``sup[i] = A[i, i+1]``.

    ``sub[0]`` and ``sup[-1]`` are unused and kept at zero.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        bands = [np.array(b, dtype=float) for b in (self.sub, self.diag, self.sup)]
        n = bands[1].shape[0]
        if any(b.shape != (n,) for b in bands):
            raise ValueError("band lengths must all equal the matrix size")
        bands[0][0] = 0.0
        bands[2][-1] = 0.0
        for name, b in zip(("sub", "diag", "sup"), bands):
            b.setflags(write=False)
            object.__setattr__(self, name, b)

    @property
    def size(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[1:] += self.sub[1:] * x[:-1]
        y[:-1] += self.sup[:-1] * x[1:]
        return y

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diag) + np.diag(self.sub[1:], -1) + np.diag(self.sup[:-1], 1))

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.sub[1:], self.sup[:-1]))

    def __add__(self, other: "TriDiagMatrix") -> "TriDiagMatrix":
        return TriDiagMatrix(self.sub + other.sub, self.diag + other.diag, self.sup + other.sup)

    def scaled(self, s: float) -> "TriDiagMatrix":
        return TriDiagMatrix(s * self.sub, s * self.diag, s * self.sup)

    def interior(self) -> "TriDiagMatrix":
        """Block acting on nodes ``1 .. n-2`` (boundary rows and columns dropped)."""
        return TriDiagMatrix(self.sub[1:-1], self.diag[1:-1], self.sup[1:-1])


@dataclass(frozen=True, eq=False)
class AssembledOperators:
    mesh: SpatialMesh
    beta: float
    mass: TriDiagMatrix
    stiff: TriDiagMatrix
    h1op: TriDiagMatrix

    @property
    def h1_unconstrained(self) -> TriDiagMatrix:
        """``mass + (beta/6) stiff`` without the Dirichlet rows."""
        return self.mass + self.stiff.scaled(self.beta / 6.0)


def mass_matrix(mesh: SpatialMesh) -> TriDiagMatrix:
    h, n = mesh.dx, mesh.n_nodes
    diag = np.full(n, 4.0 * h / 6.0)
    diag[0] = diag[-1] = 2.0 * h / 6.0
    off = np.full(n, h / 6.0)
    return TriDiagMatrix(off, diag, off)


def stiffness_matrix(mesh: SpatialMesh) -> TriDiagMatrix:
    h, n = mesh.dx, mesh.n_nodes
    diag = np.full(n, 2.0 / h)
    diag[0] = diag[-1] = 1.0 / h
    off = np.full(n, -1.0 / h)
    return TriDiagMatrix(off, diag, off)


def advection_matrix(mesh: SpatialMesh) -> TriDiagMatrix:
    """``A[i, j] = int phi_j phi_i'``; the weak form of ``-d/dx``.

    Restricted to interior nodes it is skew-symmetric.
    """
    n = mesh.n_nodes
    diag = np.zeros(n)
    diag[0], diag[-1] = -0.5, 0.5
    return TriDiagMatrix(np.full(n, 0.5), diag, np.full(n, -0.5))


def assemble(mesh: SpatialMesh, beta: float) -> AssembledOperators:
    """Mass, stiffness and the Dirichlet-constrained h1 operator on ``mesh``."""
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    mass = mass_matrix(mesh)
    stiff = stiffness_matrix(mesh)
    h1 = mass + stiff.scaled(beta / 6.0)
    sub, diag, sup = h1.sub.copy(), h1.diag.copy(), h1.sup.copy()
    sub[-1] = sup[0] = 0.0
    diag[0] = diag[-1] = 1.0
    return AssembledOperators(mesh, float(beta), mass, stiff, TriDiagMatrix(sub, diag, sup))


def solve_tridiag(A: TriDiagMatrix, rhs) -> np.ndarray:
    """Thomas elimination without pivoting.

    Raises
    ------
    SingularMatrixError
        If a pivot vanishes (or is not finite) during elimination.
    """
    d = np.asarray(rhs, dtype=float)
    n = A.size
    if d.shape != (n,):
        raise ValueError(f"rhs must have shape ({n},)")
    a, b, c = A.sub, A.diag, A.sup
    cp = np.empty(n)
    dp = np.empty(n)
    scale = max(np.max(np.abs(b)), 1e-300)
    piv = b[0]
    if not np.isfinite(piv) or abs(piv) <= 1e-15 * scale:
        raise SingularMatrixError("zero pivot in row 0")
    cp[0] = c[0] / piv
    dp[0] = d[0] / piv
    for i in range(1, n):
        piv = b[i] - a[i] * cp[i - 1]
        if not np.isfinite(piv) or abs(piv) <= 1e-15 * scale:
            raise SingularMatrixError(f"zero pivot in row {i}")
        cp[i] = c[i] / piv
        dp[i] = (d[i] - a[i] * dp[i - 1]) / piv
    x = np.empty(n)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def interpolate(f: Callable, mesh: SpatialMesh) -> ScalarField:
    """Nodal interpolant ``values[j] = f(x_j)``; ``f`` is called on the node array."""
    x = mesh.nodes
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = np.asarray(f(x), dtype=float)
    if values.shape == ():
        values = np.full(mesh.n_nodes, float(values))
    if not np.all(np.isfinite(values)):
        raise InvalidFieldError("interpolated function is not finite at every node")
    return ScalarField(mesh, values)


def p1_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Cellwise slope of the P1 interpolant averaged onto nodes (one-sided at the ends)."""
    slopes = np.diff(values, axis=-1) / h
    out = np.empty_like(values)
    out[..., 0] = slopes[..., 0]
    out[..., -1] = slopes[..., -1]
    out[..., 1:-1] = 0.5 * (slopes[..., :-1] + slopes[..., 1:])
    return out
