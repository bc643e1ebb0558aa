"""Bound-constrained limited-memory BFGS.

Each outer iteration identifies the active bounds by gradient projection,
builds a quasi-Newton direction with the two-loop recursion restricted to the
free variables, and searches along the projected path ``P(x + t d)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .core import AdmissibleSet, BoussinesqError, ParameterError, ScalarField


class EvaluationError(BoussinesqError, FloatingPointError):
    """The objective or its gradient was not finite at ``point``."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class OptimConfig:
    memory: int = 10
    ftol: float = 1e-8
    gtol: float = 1e-10
    max_iters: int = 500
    ls_max: int = 30
    c1: float = 1e-4
    c2: float = 0.9

    def __post_init__(self):
        if self.memory < 1:
            raise ParameterError("memory must be >= 1")
        if not (self.ftol > 0 and self.gtol > 0):
            raise ParameterError("tolerances must be positive")
        if self.max_iters < 0 or self.ls_max < 1:
            raise ParameterError("max_iters must be >= 0 and ls_max >= 1")
        if not 0 < self.c1 < self.c2 < 1:
            raise ParameterError("need 0 < c1 < c2 < 1")


@dataclass(frozen=True)
class IterateRecord:
    iter: int
    objective: float
    pg_norm: float
    step_len: float
    n_evals: int = 0


class MinimizeResult(NamedTuple):
    x: ScalarField
    history: List[IterateRecord]
    reason: str


def stop_check(j_prev: float, j_next: float, ftol: float) -> bool:
    """Relative-decrease test ``|J+ - J| / max(1, |J+|, |J|) <= ftol``."""
    return abs(j_next - j_prev) / max(1.0, abs(j_next), abs(j_prev)) <= ftol


def _project_values(v: np.ndarray, set: AdmissibleSet, weights: np.ndarray) -> np.ndarray:
    lo, hi = set.bounds(v.shape[0])
    out = np.clip(v, lo, hi)
    if math.isfinite(set.gamma):
        nrm = math.sqrt(float(np.dot(weights, out * out)))
        if nrm > set.gamma:
            out = out * (set.gamma / nrm)
    return out


def project_admissible(c: ScalarField, set: AdmissibleSet) -> ScalarField:
    """Clip to the box, then scale radially onto the L2 ball if outside it.

    The composition is the exact projection when only one of the two
    constraints binds.
    """
    return ScalarField(c.mesh, _project_values(c.values, set, c.mesh.trapezoid_weights))


def _two_loop(g: np.ndarray, pairs, free: np.ndarray) -> np.ndarray:
    q = np.where(free, g, 0.0)
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q = q - a * y
    if pairs:
        s, y, _ = pairs[-1]
        q = q * (np.dot(s, y) / np.dot(y, y))
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q = q + (a - b) * s
    return -np.where(free, q, 0.0)


def minimize(objective_and_gradient: Callable, x0: ScalarField, set: AdmissibleSet = AdmissibleSet(),
             cfg: OptimConfig = OptimConfig(),
             callback: Optional[Callable[[IterateRecord, ScalarField], None]] = None
             ) -> MinimizeResult:
    """Minimise over the admissible set starting from ``P(x0)``.

    Parameters
    ----------
    objective_and_gradient : callable
        ``f(x: ScalarField) -> (value, gradient)``; the gradient may be a
        ``GradientField``, a ``ScalarField`` or an array of nodal partials.
    x0 : ScalarField
    set : AdmissibleSet
    cfg : OptimConfig
    callback : callable, optional
        Called with each accepted ``IterateRecord`` and iterate.

    Returns
    -------
    MinimizeResult
        ``(x, history, reason)`` with ``reason`` one of ``"ftol"``, ``"gtol"``,
        ``"max_iters"``, ``"line_search_failure"``.
    """
    mesh = x0.mesh
    weights = mesh.trapezoid_weights
    lo, hi = set.bounds(mesh.n_nodes)
    # relative slack for deciding that a variable sits on its bound
    tol_lo = np.where(np.isfinite(lo), 1e-12 * np.maximum(1.0, np.abs(lo)), 0.0)
    tol_hi = np.where(np.isfinite(hi), 1e-12 * np.maximum(1.0, np.abs(hi)), 0.0)
    n_evals = 0

    def evaluate(v):
        nonlocal n_evals
        n_evals += 1
        point = ScalarField(mesh, v)
        f, g = objective_and_gradient(point)
        g = _as_array(g)
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            raise EvaluationError("objective or gradient is not finite", point=point)
        return float(f), g

    def pg_norm(v, g):
        return float(np.max(np.abs(v - _project_values(v - g, set, weights))))

    x = _project_values(x0.values.astype(float), set, weights)
    f, g = evaluate(x)
    history = [IterateRecord(0, f, pg_norm(x, g), 0.0, n_evals)]
    if callback:
        callback(history[-1], ScalarField(mesh, x))
    pairs: deque = deque(maxlen=cfg.memory)
    reason = "max_iters"

    for k in range(1, cfg.max_iters + 1):
        if history[-1].pg_norm <= cfg.gtol:
            reason = "gtol"
            break
        at_lo = (x <= lo + tol_lo) & (g > 0)
        at_hi = (x >= hi - tol_hi) & (g < 0)
        free = ~(at_lo | at_hi)
        d = _two_loop(g, list(pairs), free)
        slope = float(np.dot(g, d))
        if not slope < 0:
            pairs.clear()
            d = -np.where(free, g, 0.0)
            slope = float(np.dot(g, d))
            if not slope < 0:
                reason = "gtol"
                break
        t = min(1.0, 1.0 / np.linalg.norm(d)) if not pairs else 1.0
        accepted = None
        expanding = True
        for _ in range(cfg.ls_max):
            xt = _project_values(x + t * d, set, weights)
            s = xt - x
            if not np.any(s):
                break
            ft, gt = evaluate(xt)
            gs = float(np.dot(g, s))
            armijo = ft <= f + cfg.c1 * min(gs, 0.0) and ft <= f
            if armijo:
                if accepted is not None and ft >= accepted[1]:
                    break
                accepted = (xt, ft, gt, t)
                clipped = not np.allclose(s, t * d, rtol=0, atol=1e-15)
                curvature = float(np.dot(gt, s)) >= cfg.c2 * gs
                if curvature or clipped or not expanding:
                    break
                t *= 2.0
            else:
                if accepted is not None:
                    break
                expanding = False
                denom = 2.0 * (ft - f - t * slope)
                t_new = -slope * t * t / denom if denom > 0 else 0.5 * t
                t = min(max(t_new, 0.1 * t), 0.5 * t)
        if accepted is None:
            reason = "line_search_failure"
            break
        x_new, f_new, g_new, t_acc = accepted
        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        f_prev = f
        x, f, g = x_new, f_new, g_new
        history.append(IterateRecord(k, f, pg_norm(x, g), float(np.linalg.norm(s)), n_evals))
        if callback:
            callback(history[-1], ScalarField(mesh, x))
        if stop_check(f_prev, f, cfg.ftol):
            reason = "ftol"
            break
    else:
        reason = "max_iters" if history[-1].pg_norm > cfg.gtol else "gtol"

    return MinimizeResult(ScalarField(mesh, x), history, reason)


def _as_array(g) -> np.ndarray:
    if hasattr(g, "values") and hasattr(g.values, "values"):
        g = g.values.values
    elif isinstance(g, ScalarField):
        g = g.values
    return np.asarray(g, dtype=float)
