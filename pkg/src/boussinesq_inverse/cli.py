"""Command-line entry point: ``boussinesq-inverse <subcommand>``.

Subcommands
-----------
solve           forward solve with the configured (exact) coefficient
invert          reconstruct the coefficient from synthetic data
experiment ID   run a named experiment preset (exp1 ... exp5, custom)
gradcheck       adjoint gradient against central finite differences
oracle-compare  FEM against the Green-integral solver under refinement

Results go to ``--out``, else ``$BOUSSINESQ_OUT``, else ``./boussinesq_out``.
Exit status is 0 on success, 2 for bad configuration and 3 when a stage
fails; failures print ``error [stage=...]`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .adjoint import finite_difference_check
from .core import BoussinesqError, ConfigurationError, _h1_sq_rows
from .forward import solve_forward
from .harness import (
    EXPERIMENT_IDS,
    ExperimentConfig,
    default_output_dir,
    gradcheck_setup,
    oracle_comparison,
    run_experiment,
    write_report,
)

EXIT_CONFIG = 2
EXIT_STAGE = 3


class StageError(Exception):
    def __init__(self, stage, message, code=EXIT_STAGE):
        super().__init__(message)
        self.stage = stage
        self.code = code


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="noise seed")
    common.add_argument("--max-iters", type=int, help="optimiser iteration cap")
    common.add_argument("--alpha", type=float, help="regularisation weight")
    common.add_argument("--ftol", type=float, help="relative-decrease tolerance")
    common.add_argument("--alpha-tilde", type=float, help="nonlinearity coefficient")
    common.add_argument("--variant", help="objective variant")
    common.add_argument("-q", "--quiet", action="store_true", help="no per-iteration output")

    p = argparse.ArgumentParser(prog="boussinesq-inverse", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="forward solve")
    sub.add_parser("invert", parents=[common], help="coefficient reconstruction")
    e = sub.add_parser("experiment", parents=[common], help="run an experiment preset")
    e.add_argument("experiment_id", choices=EXPERIMENT_IDS)
    g = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    g.add_argument("--tol", type=float, default=1e-6)
    o = sub.add_parser("oracle-compare", parents=[common], help="FEM vs Green-integral solver")
    o.add_argument("--levels", type=int, default=3)
    o.add_argument("--t-final", type=float, default=3.0)
    return p


def _load_config(args, experiment_id=None) -> ExperimentConfig:
    try:
        if args.config is not None:
            cfg = ExperimentConfig.from_json(args.config)
            if experiment_id is not None and cfg.experiment_id != experiment_id:
                cfg = ExperimentConfig.preset(experiment_id, **{
                    k: v for k, v in cfg.to_dict().items() if k != "experiment_id"})
        elif experiment_id is not None:
            cfg = ExperimentConfig.preset(experiment_id)
        else:
            cfg = ExperimentConfig()
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.alpha is not None:
            changes["alpha"] = args.alpha
        if args.alpha_tilde is not None:
            changes["alpha_tilde"] = args.alpha_tilde
        if args.variant is not None:
            changes["variant"] = args.variant
        optim = dict(cfg.optim)
        if args.max_iters is not None:
            optim["max_iters"] = args.max_iters
        if args.ftol is not None:
            optim["ftol"] = args.ftol
        changes["optim"] = optim
        cfg = cfg.replace(**changes)
        cfg.validate()
        cfg.optim_config()
        return cfg
    except (BoussinesqError, ValueError, TypeError) as exc:
        raise StageError("config", str(exc), EXIT_CONFIG) from exc


def _out_dir(args, name) -> Path:
    base = args.out if args.out is not None else default_output_dir()
    return Path(base) / name if args.out is None else Path(base)


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    t0 = time.perf_counter()
    try:
        traj = solve_forward(cfg.problem(), cfg.newton())
    except (BoussinesqError, FloatingPointError) as exc:
        raise StageError("forward", str(exc)) from exc
    out = _out_dir(args, "solve")
    h = traj.mesh.dx
    energy = _h1_sq_rows(traj.eta, h, cfg.beta) + _h1_sq_rows(traj.vel, h, cfg.beta)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "final_state.csv", np.column_stack([traj.mesh.nodes, traj.final.eta.values,
                                                         traj.final.vel.values]),
               delimiter=",", header="xi,eta,u", comments="", fmt="%.17g")
    np.savetxt(out / "energy.csv", np.column_stack([traj.grid.times, energy]), delimiter=",",
               header="t,energy", comments="", fmt="%.17g")
    summary = {
        "config": cfg.to_dict(),
        "energy_initial": float(energy[0]),
        "energy_final": float(energy[-1]),
        "max_abs_eta": float(np.max(np.abs(traj.eta))),
        "wall_time": time.perf_counter() - t0,
    }
    _write_json(out / "solve.json", summary)
    print(f"forward solve done: energy {energy[0]:.6g} -> {energy[-1]:.6g}; wrote {out}")
    return 0


def _invert(args, cfg, name) -> int:
    def progress(rec, _x):
        if not args.quiet and (rec.iter % 10 == 0 or rec.iter < 3):
            print(f"  iter {rec.iter:4d}  J = {rec.objective:.6e}  |pg| = {rec.pg_norm:.3e}",
                  flush=True)

    report = run_experiment(cfg, progress)
    out = _out_dir(args, name)
    try:
        write_report(report, out)
    except OSError as exc:
        raise StageError("report", str(exc)) from exc
    if not report.ok:
        raise StageError(report.stage, report.message)
    print(f"{name}: l2_error = {report.l2_error:.6g} after {report.iterations_used} iterations "
          f"({report.reason}); wrote {out}")
    return 0


def cmd_invert(args) -> int:
    return _invert(args, _load_config(args), "invert")


def cmd_experiment(args) -> int:
    cfg = _load_config(args, args.experiment_id)
    return _invert(args, cfg, args.experiment_id)


def cmd_gradcheck(args) -> int:
    cfg = _load_config(args)
    alphas = [cfg.alpha_tilde] if args.alpha_tilde is not None else [0.0, 0.05]
    results = {}
    worst = 0.0
    for at in alphas:
        try:
            spec, problem = gradcheck_setup(at, cfg.beta, cfg.variant, cfg.alpha or 1e-3)
            res = finite_difference_check(spec, problem)
        except (BoussinesqError, FloatingPointError) as exc:
            raise StageError("gradcheck", str(exc)) from exc
        results[str(at)] = {"max_rel_error": res.max_rel_error,
                            "gradient": res.gradient.tolist(),
                            "fd_gradient": res.fd_gradient.tolist()}
        worst = max(worst, res.max_rel_error)
        print(f"alpha_tilde = {at}: max componentwise relative error {res.max_rel_error:.3e}")
    out = _out_dir(args, "gradcheck")
    _write_json(out / "gradcheck.json", {"tol": args.tol, "passed": worst <= args.tol,
                                         "results": results})
    if worst > args.tol:
        raise StageError("gradcheck", f"max relative error {worst:.3e} exceeds {args.tol:g}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    try:
        res = oracle_comparison(cfg, levels=args.levels, t_final=args.t_final)
    except (BoussinesqError, FloatingPointError) as exc:
        raise StageError("oracle", str(exc)) from exc
    for label, r in res.items():
        orders = ", ".join(f"{o:.2f}" for o in r["orders"])
        print(f"c = {label}: differences {r['l2_difference']}; orders {orders}")
    _write_json(_out_dir(args, "oracle") / "oracle.json", res)
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "invert": cmd_invert,
    "experiment": cmd_experiment,
    "gradcheck": cmd_gradcheck,
    "oracle-compare": cmd_oracle,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        print(f"error [stage={exc.stage}]: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
