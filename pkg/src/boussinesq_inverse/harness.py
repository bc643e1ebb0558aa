"""Experiment orchestration: presets, synthetic data, reconstruction runs, reports.

A run synthesises final-time measurements with the exact coefficient,
optionally perturbs them with seeded Gaussian noise, and minimises the
discrete objective from the homogeneous guess ``M = 1`` using the projected
L-BFGS optimiser and discrete-adjoint gradients.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .adjoint import value_and_gradient
from .core import (
    AdmissibleSet,
    BoussinesqError,
    ConfigurationError,
    ModelParams,
    ScalarField,
    SpatialMesh,
    TimeGrid,
    WaveState,
    discrete_l2_norm,
)
from .forward import ForwardProblem, NewtonConfig, final_state, solve_forward
from .green import solve_linear_integral
from .objective import Measurement, ObjectiveSpec, Variant, misfit_error
from .optim import IterateRecord, OptimConfig, minimize

EXPERIMENT_IDS = ("exp1", "exp2", "exp3", "exp4a", "exp4b", "exp5", "custom")


# -- coefficient and initial-data presets -------------------------------------


def _gauss(x):
    return (1.0 + 0.5 * np.exp(-(x - 5) ** 2) - 0.3 * np.exp(-(x - 7) ** 2)
            + 0.7 * np.exp(-(x - 9) ** 2) - 0.6 * np.exp(-(x - 10) ** 2)
            + 0.7 * np.exp(-(x - 12) ** 2))


def _irregular1(x):
    return np.where((x >= 5) & (x < 15), 1.3, 1.0)


def _piecewise_linear(x):
    out = np.ones_like(x)
    out = np.where((x >= 5) & (x <= 8), 1 + 0.1 * (x - 5), out)
    out = np.where((x > 8) & (x <= 14), 0.6 - (7.0 / 60.0) * (x - 14), out)
    out = np.where((x > 14) & (x <= 18), 1 + 0.1 * (x - 18), out)
    return out


def _multistep(x):
    out = np.ones_like(x)
    for lo, hi, v, closed_lo in ((3, 5, 1.3, True), (5, 10, 1.4, False),
                                 (10, 13, 1.2, False), (13, 16, 1.3, False)):
        left = x >= lo if closed_lo else x > lo
        out = np.where(left & (x <= hi), v, out)
    return out


COEFFICIENT_PRESETS: Dict[str, Callable] = {
    "gauss": _gauss,
    "irregular1": _irregular1,
    "piecewise_linear": _piecewise_linear,
    "multistep": _multistep,
}


def coefficient_preset(name: str, mesh: SpatialMesh, value: float = 1.0) -> ScalarField:
    """Nodal values of a named coefficient.

    ``"constant"`` uses ``value``; the others are the closed-form profiles in
    ``COEFFICIENT_PRESETS``.
    """
    if name == "constant":
        return mesh.constant(value)
    try:
        f = COEFFICIENT_PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(COEFFICIENT_PRESETS) + ["constant"])
        raise ConfigurationError(f"unknown coefficient preset {name!r} (known: {known})") from None
    return ScalarField(mesh, f(mesh.nodes.astype(float)))


def gaussian_pulse(mesh: SpatialMesh, center: float, amplitude: float = 1.0) -> ScalarField:
    """``amplitude * exp(-(x - center)^2)`` with the end nodes set to zero."""
    x = mesh.nodes
    return ScalarField(mesh, amplitude * np.exp(-(x - center) ** 2)).with_zero_boundary()


# -- configuration ------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Everything that defines one reconstruction run; serialisable to JSON.

    ``box_hi`` and ``gamma`` use ``None`` for "unbounded"; ``noise_interval``
    ``None`` means the whole domain.
    """

    experiment_id: str = "custom"
    beta: float = 0.1
    alpha_tilde: float = 0.0
    x_left: float = -20.0
    x_right: float = 40.0
    n_cells: int = 500
    t_final: float = 15.0
    n_steps: int = 1500
    theta: float = 0.5
    coefficient: str = "gauss"
    coefficient_value: float = 1.0
    initial_center: float = 3.0
    initial_amplitude: float = 1.0
    variant: str = "L2_DEV1"
    alpha: float = 0.0
    l1_smoothing_eps: float = 1e-3
    box_lo: Optional[float] = 0.1
    box_hi: Optional[float] = None
    gamma: Optional[float] = None
    noise_sigma: float = 0.0
    noise_interval: Optional[Tuple[float, float]] = None
    seed: int = 0
    newton_tol: float = 1e-10
    newton_max_iters: int = 25
    optim: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment_id not in EXPERIMENT_IDS:
            raise ConfigurationError(f"unknown experiment id {self.experiment_id!r}")
        if self.variant not in {v.value for v in Variant}:
            raise ConfigurationError(f"unknown objective variant {self.variant!r}")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")
        if self.noise_interval is not None:
            a, b = self.noise_interval
            if not (self.x_left <= a <= b <= self.x_right):
                raise ConfigurationError("noise interval must lie inside the domain")
            self.noise_interval = (float(a), float(b))
        bad = set(self.optim) - {f.name for f in dataclasses.fields(OptimConfig)}
        if bad:
            raise ConfigurationError(f"unknown optimiser settings: {sorted(bad)}")
        if self.coefficient != "constant" and self.coefficient not in COEFFICIENT_PRESETS:
            raise ConfigurationError(f"unknown coefficient preset {self.coefficient!r}")

    # building blocks
    def model(self) -> ModelParams:
        return ModelParams(self.beta, self.alpha_tilde)

    def mesh(self) -> SpatialMesh:
        return SpatialMesh(self.x_left, self.x_right, self.n_cells)

    def grid(self) -> TimeGrid:
        return TimeGrid(self.t_final, self.n_steps, self.theta)

    def newton(self) -> NewtonConfig:
        return NewtonConfig(self.newton_tol, self.newton_max_iters)

    def optim_config(self) -> OptimConfig:
        return OptimConfig(**self.optim)

    def admissible_set(self) -> AdmissibleSet:
        gamma = math.inf if self.gamma is None else self.gamma
        return AdmissibleSet(gamma=gamma, box_lo=self.box_lo, box_hi=self.box_hi)

    def exact_coefficient(self) -> ScalarField:
        return coefficient_preset(self.coefficient, self.mesh(), self.coefficient_value)

    def initial_state(self) -> WaveState:
        pulse = gaussian_pulse(self.mesh(), self.initial_center, self.initial_amplitude)
        return WaveState(pulse, pulse)

    def problem(self, coeff: Optional[ScalarField] = None) -> ForwardProblem:
        coeff = self.exact_coefficient() if coeff is None else coeff
        return ForwardProblem(self.model(), self.mesh(), self.grid(), coeff, self.initial_state())

    # serialisation
    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["noise_interval"] is not None:
            d["noise_interval"] = list(d["noise_interval"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if d.get("noise_interval") is not None:
            d["noise_interval"] = tuple(d["noise_interval"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def preset(cls, experiment_id: str, **overrides) -> "ExperimentConfig":
        """Configuration of a named experiment, with keyword overrides.

        ``exp3`` follows ``exp2`` except that ``alpha_tilde >= 0.07`` switches
        to the finer 700-cell / 1700-step grid unless the grid is overridden.
        """
        if experiment_id not in _PRESETS:
            raise ConfigurationError(
                f"unknown experiment {experiment_id!r}; choose from {', '.join(EXPERIMENT_IDS)}")
        base = copy.deepcopy(_PRESETS[experiment_id])
        if experiment_id == "exp3" and overrides.get("alpha_tilde", base["alpha_tilde"]) >= 0.07:
            base.update(n_cells=700, n_steps=1700)
        base.update(overrides)
        return cls(experiment_id=experiment_id, **base)


_EXP2 = dict(t_final=20.0, n_steps=1500, initial_center=0.0, coefficient="irregular1")

_PRESETS: Dict[str, dict] = {
    "exp1": dict(),
    "exp2": dict(_EXP2),
    "exp3": dict(_EXP2, alpha_tilde=0.01),
    "exp4a": dict(t_final=20.0, n_steps=1700, n_cells=700, coefficient="piecewise_linear"),
    "exp4b": dict(t_final=20.0, n_steps=1700, n_cells=700, coefficient="multistep",
                  variant="L1_DEV1", alpha=1e-3),
    "exp5": dict(beta=0.01, alpha_tilde=0.01, n_cells=800, noise_sigma=0.04,
                 noise_interval=(-15.0, 30.0), optim={"max_iters": 20}),
    "custom": dict(),
}


# -- measurements ---------------------------------------------------------------


def synthesize_measurements(cfg: ExperimentConfig) -> Measurement:
    """Final state of the forward solve with the exact coefficient."""
    return Measurement.from_state(final_state(cfg.problem(), cfg.newton()))


def add_noise(m: Measurement, sigma: float, interval: Optional[Tuple[float, float]] = None,
              seed: int = 0) -> Measurement:
    """Add i.i.d. N(0, sigma^2) samples to both components inside ``interval``.

    Nodes outside the interval and the two boundary nodes are left untouched.
    The draw covers every node so the result depends only on ``seed``.
    """
    if sigma < 0:
        raise ConfigurationError("sigma must be >= 0")
    if sigma == 0:
        return m
    mesh = m.mesh
    x = mesh.nodes
    a, b = (mesh.x_left, mesh.x_right) if interval is None else interval
    mask = (x >= a) & (x <= b)
    mask[[0, -1]] = False
    noise = np.random.default_rng(seed).normal(0.0, sigma, size=(2, mesh.n_nodes))
    noise[:, ~mask] = 0.0
    return Measurement(ScalarField(mesh, m.m1.values + noise[0]),
                       ScalarField(mesh, m.m2.values + noise[1]))


def objective_for(cfg: ExperimentConfig, measurement: Measurement) -> ObjectiveSpec:
    return ObjectiveSpec(cfg.variant, cfg.alpha, measurement,
                         l1_smoothing_eps=cfg.l1_smoothing_eps, beta=cfg.beta)


# -- reports --------------------------------------------------------------------


@dataclass
class ReconstructionReport:
    config: ExperimentConfig
    nodes: np.ndarray
    exact: np.ndarray
    initial: np.ndarray
    recovered: Optional[np.ndarray] = None
    l2_error: Optional[float] = None
    iterations_used: int = 0
    reason: str = ""
    history: List[IterateRecord] = field(default_factory=list)
    wall_time: float = 0.0
    status: str = "ok"
    stage: Optional[str] = None
    message: str = ""
    final_eta: Optional[np.ndarray] = None
    final_u: Optional[np.ndarray] = None
    m1: Optional[np.ndarray] = None
    m2: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def objective_history(self) -> List[float]:
        return [r.objective for r in self.history]

    def summary(self) -> dict:
        """Scalar metadata plus the config echo, as written to ``report.json``."""
        return {
            "experiment_id": self.config.experiment_id,
            "status": self.status,
            "stage": self.stage,
            "message": self.message,
            "l2_error": self.l2_error,
            "iterations_used": self.iterations_used,
            "termination_reason": self.reason,
            "final_objective": self.history[-1].objective if self.history else None,
            "n_evaluations": self.history[-1].n_evals if self.history else 0,
            "wall_time": self.wall_time,
            "config": self.config.to_dict(),
        }


def run_experiment(cfg: ExperimentConfig,
                   callback: Optional[Callable[[IterateRecord, ScalarField], None]] = None
                   ) -> ReconstructionReport:
    """Synthesise data, reconstruct the coefficient and measure the error.

    Failures are caught and reported with ``status="failed"`` and a ``stage``
    tag (``"synthesize"``, ``"optimize"`` or ``"postprocess"``); the best
    iterate reached before an optimiser failure is kept.
    """
    t0 = time.perf_counter()
    mesh = cfg.mesh()
    exact = cfg.exact_coefficient()
    guess = mesh.constant(1.0)
    report = ReconstructionReport(cfg, mesh.nodes.copy(), exact.values.copy(), guess.values.copy())

    def fail(stage, exc):
        report.status = "failed"
        report.stage = stage
        report.message = f"{type(exc).__name__}: {exc}"
        report.wall_time = time.perf_counter() - t0
        return report

    stage = "synthesize"
    try:
        meas = synthesize_measurements(cfg)
        meas = add_noise(meas, cfg.noise_sigma, cfg.noise_interval, cfg.seed)
        report.m1, report.m2 = meas.m1.values.copy(), meas.m2.values.copy()
        spec = objective_for(cfg, meas)
        base = cfg.problem(guess)
        newton = cfg.newton()
    except (BoussinesqError, FloatingPointError) as exc:
        return fail(stage, exc)

    best: List = [guess, []]

    def track(rec, x):
        best[0] = x
        best[1].append(rec)
        if callback:
            callback(rec, x)

    def fun(c):
        return value_and_gradient(spec, base.with_coeff(c), newton)

    stage = "optimize"
    try:
        res = minimize(fun, guess, cfg.admissible_set(), cfg.optim_config(), track)
        x, history, reason = res
    except (BoussinesqError, FloatingPointError) as exc:
        x, history, reason = best[0], best[1], "failed"
        report.recovered = x.values.copy()
        report.history = list(history)
        report.iterations_used = max(len(history) - 1, 0)
        report.reason = reason
        report.l2_error = misfit_error(x, exact)
        return fail(stage, exc)

    stage = "postprocess"
    try:
        report.recovered = x.values.copy()
        report.history = list(history)
        report.iterations_used = len(history) - 1
        report.reason = reason
        report.l2_error = misfit_error(x, exact)
        fs = final_state(base.with_coeff(x), newton)
        report.final_eta, report.final_u = fs.eta.values.copy(), fs.vel.values.copy()
    except (BoussinesqError, FloatingPointError) as exc:
        return fail(stage, exc)
    report.wall_time = time.perf_counter() - t0
    return report


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if not isinstance(v, (int, np.integer)) else str(v) for v in row])


def write_report(report: ReconstructionReport, out_dir) -> Dict[str, Path]:
    """Write ``report.json``, ``coefficient.csv``, ``history.csv`` and ``final_state.csv``.

    Raises
    ------
    OSError
        With the offending path when a file cannot be written.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {name: out / name for name in
                 ("report.json", "coefficient.csv", "history.csv", "final_state.csv")}
        with open(paths["report.json"], "w") as fh:
            json.dump(report.summary(), fh, indent=2, allow_nan=False, default=_json_default)
        rec = report.recovered if report.recovered is not None else np.full_like(report.exact, np.nan)
        _write_csv(paths["coefficient.csv"], ["xi", "exact", "recovered", "initial"],
                   zip(report.nodes, report.exact, rec, report.initial))
        hist = report.history or [IterateRecord(0, math.nan, math.nan, 0.0)]
        _write_csv(paths["history.csv"], ["iter", "objective", "pg_norm", "step_len"],
                   ((r.iter, r.objective, r.pg_norm, r.step_len) for r in hist))
        n = report.nodes.size
        cols = [report.final_eta, report.final_u, report.m1, report.m2]
        cols = [np.full(n, np.nan) if c is None else c for c in cols]
        _write_csv(paths["final_state.csv"], ["xi", "eta", "u", "m1", "m2"], zip(report.nodes, *cols))
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return paths


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def default_output_dir() -> Path:
    """``$BOUSSINESQ_OUT`` when set, otherwise ``./boussinesq_out``."""
    return Path(os.environ.get("BOUSSINESQ_OUT", "boussinesq_out"))


# -- verification helpers used by the CLI ---------------------------------------


def gradcheck_setup(alpha_tilde: float, beta: float = 0.1, variant: str = "L2_DEV1",
                    alpha: float = 1e-3, n_cells: int = 40, n_steps: int = 20):
    """Small problem for gradient checks: ``(objective, problem at a trial coefficient)``."""
    mesh = SpatialMesh(0.0, 10.0, n_cells)
    grid = TimeGrid(2.0, n_steps)
    x = mesh.nodes
    pulse = gaussian_pulse(mesh, 3.0)
    init = WaveState(pulse, pulse * 0.5)
    m_true = ScalarField(mesh, 1.0 + 0.3 * np.exp(-(x - 6.0) ** 2))
    params = ModelParams(beta, alpha_tilde)
    strict = NewtonConfig(abs_tol=1e-13, max_iters=50)
    truth = ForwardProblem(params, mesh, grid, m_true, init)
    meas = Measurement.from_state(final_state(truth, strict))
    spec = ObjectiveSpec(variant, alpha, meas, l1_smoothing_eps=1e-2, beta=beta)
    trial = truth.with_coeff(ScalarField(mesh, 1.0 + 0.1 * np.sin(x)))
    return spec, trial


def oracle_comparison(cfg: ExperimentConfig, levels: int = 3, t_final: float = 3.0,
                      base_cells: int = 400, base_steps: int = 60) -> dict:
    """FEM versus Green-integral solutions under simultaneous halving of dx and dt.

    Runs the linear model for ``c = 1`` and for ``c = 1/M`` with ``M`` the
    configured preset; returns the discrete L2 differences at ``t_final`` and
    the empirical orders between consecutive levels.
    """
    params = ModelParams(cfg.beta, 0.0)
    out = {}
    for label in ("unit", cfg.coefficient):
        errs, cells = [], []
        for lev in range(levels):
            n = base_cells * 2 ** lev
            mesh = SpatialMesh(cfg.x_left, cfg.x_right, n)
            grid = TimeGrid(t_final, base_steps * 2 ** lev)
            if label == "unit":
                c = mesh.constant(1.0)
            else:
                c = ScalarField(mesh, 1.0 / coefficient_preset(label, mesh, cfg.coefficient_value).values)
            pulse = gaussian_pulse(mesh, cfg.initial_center, cfg.initial_amplitude)
            init = WaveState(pulse, pulse)
            fem = solve_forward(ForwardProblem(params, mesh, grid, c, init, "c")).final
            ode = solve_linear_integral(params, c, init, grid).final
            d = WaveState(fem.eta - ode.eta, fem.vel - ode.vel)
            errs.append(math.hypot(discrete_l2_norm(d.eta), discrete_l2_norm(d.vel)))
            cells.append(n)
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(levels - 1)]
        out[label] = {"n_cells": cells, "l2_difference": errs, "orders": orders}
    return out


def stability_probe(deltas=(1e-4, 1e-3, 1e-2), alpha: float = 1e-2, beta: float = 0.1,
                    seed: int = 0, n_cells: int = 60, n_steps: int = 40) -> dict:
    """Sensitivity of the reconstruction to measurement perturbations.

    On a short-horizon linear problem, reconstructs the coefficient from exact
    data and from data shifted by ``delta * r`` with ``r`` a seeded random
    field of unit discrete L2 norm (both components together). Returns the
    coefficient differences and the slope of ``log diff`` against
    ``log delta``; Lipschitz stability corresponds to a slope near one.
    """
    mesh = SpatialMesh(0.0, 10.0, n_cells)
    grid = TimeGrid(2.0, n_steps)
    x = mesh.nodes
    pulse = gaussian_pulse(mesh, 4.0)
    truth = ForwardProblem(ModelParams(beta), mesh, grid,
                           ScalarField(mesh, 1.0 + 0.3 * np.exp(-(x - 5.0) ** 2)), WaveState(pulse, pulse))
    meas = Measurement.from_state(final_state(truth))
    rng = np.random.default_rng(seed)
    r = rng.standard_normal((2, mesh.n_nodes))
    r[:, [0, -1]] = 0.0
    r /= math.hypot(discrete_l2_norm(ScalarField(mesh, r[0])), discrete_l2_norm(ScalarField(mesh, r[1])))
    cfg = OptimConfig(ftol=1e-30, gtol=1e-13, max_iters=2000)
    box = AdmissibleSet(box_lo=0.1)

    def reconstruct(m):
        spec = ObjectiveSpec("L2_DEV1", alpha, m)
        return minimize(lambda c: value_and_gradient(spec, truth.with_coeff(c)), mesh.constant(1.0), box, cfg).x

    base = reconstruct(meas)
    diffs = []
    for d in deltas:
        shifted = Measurement(ScalarField(mesh, meas.m1.values + d * r[0]),
                              ScalarField(mesh, meas.m2.values + d * r[1]))
        diffs.append(discrete_l2_norm(reconstruct(shifted) - base))
    slope = float(np.polyfit(np.log(deltas), np.log(diffs), 1)[0])
    return {"deltas": list(deltas), "differences": diffs, "exponent": slope,
            "ratio": [d / s for d, s in zip(diffs, deltas)]}
