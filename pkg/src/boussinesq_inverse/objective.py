"""Tikhonov-regularised misfit functionals on the final-time state.

Integrals use the composite trapezoid rule except the H1 misfit, which is the
exact P1 quadratic form. Each variant also exposes its partial derivatives with
respect to nodal values, which the adjoint solver consumes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import (
    ConfigurationError,
    ParameterError,
    ScalarField,
    WaveState,
    discrete_l2_norm,
    h1_inner,
)
from .fem import assemble


class Variant(str, enum.Enum):
    H1_TIKHONOV = "H1_TIKHONOV"
    L2_DEV1 = "L2_DEV1"
    L1_DEV1 = "L1_DEV1"
    L2_PLAIN = "L2_PLAIN"


@dataclass(frozen=True, eq=False)
class Measurement:
    """Final-time observations of the two wave components."""

    m1: ScalarField
    m2: ScalarField

    def __post_init__(self):
        if self.m1.mesh != self.m2.mesh:
            raise ConfigurationError("measurement components must share a mesh")

    @property
    def mesh(self):
        return self.m1.mesh

    @classmethod
    def from_state(cls, state: WaveState) -> "Measurement":
        return cls(state.eta, state.vel)

    def as_state(self) -> WaveState:
        return WaveState(self.m1, self.m2)


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """Which functional to evaluate and against which data.

    ``beta`` is only read by the H1 variant, whose misfit uses the weighted
    H1 norm.
    """

    variant: Variant
    alpha: float
    measurement: Measurement
    l1_smoothing_eps: float = 1e-8
    beta: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.alpha >= 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if not self.l1_smoothing_eps > 0:
            raise ParameterError("l1_smoothing_eps must be positive")
        if self.variant is Variant.H1_TIKHONOV and not (self.beta and self.beta > 0):
            raise ParameterError("the H1 misfit needs a positive beta")


def _check_meshes(spec: ObjectiveSpec, state: WaveState, coeff: ScalarField):
    mesh = spec.measurement.mesh
    if state.mesh != mesh or coeff.mesh != mesh:
        raise ConfigurationError("state, coefficient and measurement must share one mesh")


def misfit(spec: ObjectiveSpec, final_state: WaveState) -> float:
    r1 = final_state.eta - spec.measurement.m1
    r2 = final_state.vel - spec.measurement.m2
    if spec.variant is Variant.H1_TIKHONOV:
        return 0.5 * (h1_inner(r1, r1, spec.beta) + h1_inner(r2, r2, spec.beta))
    return 0.5 * (discrete_l2_norm(r1) ** 2 + discrete_l2_norm(r2) ** 2)


def regularizer(spec: ObjectiveSpec, coeff: ScalarField) -> float:
    w = coeff.mesh.trapezoid_weights
    v = coeff.values
    a = spec.alpha
    if spec.variant is Variant.L1_DEV1:
        return 0.5 * a * float(np.dot(w, np.sqrt((v - 1.0) ** 2 + spec.l1_smoothing_eps ** 2)))
    if spec.variant is Variant.L2_DEV1:
        return 0.5 * a * float(np.dot(w, (v - 1.0) ** 2))
    return 0.5 * a * float(np.dot(w, v ** 2))


def eval_objective(spec: ObjectiveSpec, final_state: WaveState, coeff: ScalarField) -> float:
    """Misfit of ``final_state`` against the measurement plus the regulariser of ``coeff``."""
    _check_meshes(spec, final_state, coeff)
    return misfit(spec, final_state) + regularizer(spec, coeff)


def misfit_gradient(spec: ObjectiveSpec, final_state: WaveState) -> Tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of the misfit with respect to nodal final-state values."""
    r1 = final_state.eta.values - spec.measurement.m1.values
    r2 = final_state.vel.values - spec.measurement.m2.values
    if spec.variant is Variant.H1_TIKHONOV:
        ops = assemble(final_state.mesh, spec.beta)
        A = ops.h1_unconstrained
        return A.matvec(r1), A.matvec(r2)
    w = final_state.mesh.trapezoid_weights
    return w * r1, w * r2


def regularizer_gradient(spec: ObjectiveSpec, coeff: ScalarField) -> np.ndarray:
    w = coeff.mesh.trapezoid_weights
    v = coeff.values
    a = spec.alpha
    if spec.variant is Variant.L1_DEV1:
        d = v - 1.0
        return 0.5 * a * w * d / np.sqrt(d ** 2 + spec.l1_smoothing_eps ** 2)
    if spec.variant is Variant.L2_DEV1:
        return a * w * (v - 1.0)
    return a * w * v


def misfit_error(coeff_computed: ScalarField, coeff_exact: ScalarField) -> float:
    """Trapezoid L2 distance between two coefficients."""
    return discrete_l2_norm(coeff_computed - coeff_exact)


def regularization_bias(spec: ObjectiveSpec) -> float:
    """Value of the regulariser at its minimiser (nonzero only for the smoothed L1 term)."""
    if spec.variant is Variant.L1_DEV1:
        return 0.5 * spec.alpha * spec.l1_smoothing_eps * spec.measurement.mesh.length
    return 0.0


__all__ = [
    "Variant", "Measurement", "ObjectiveSpec", "misfit", "regularizer", "eval_objective",
    "misfit_gradient", "regularizer_gradient", "misfit_error", "regularization_bias",
]
