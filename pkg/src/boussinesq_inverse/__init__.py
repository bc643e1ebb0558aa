"""Forward, adjoint and inverse solvers for a variable-depth Boussinesq system.

The depth coefficient ``M`` (or the speed ``c = 1/M`` of the linearised
flux-variable model) is recovered from final-time wave observations by
minimising a regularised misfit with a projected L-BFGS method and exact
discrete-adjoint gradients.
"""

from .adjoint import (
    AdjointState,
    FDCheckResult,
    GradientField,
    finite_difference_check,
    gradient_continuous,
    gradient_discrete,
    objective_value,
    optimality_residual,
    solve_adjoint,
    value_and_gradient,
)
from .core import (
    AdmissibleSet,
    BoussinesqError,
    ConfigurationError,
    DomainError,
    EnergyConstants,
    InvalidFieldError,
    ModelParams,
    ParameterError,
    ScalarField,
    SpatialMesh,
    TimeGrid,
    Trajectory,
    WaveState,
    discrete_l2_norm,
    energy,
    energy_constants,
    h1_inner,
    l2_inner,
    speed_constant,
    state_h1_norm,
    trajectory_h1_norm,
    weighted_h1_norm,
)
from .forward import (
    ForwardProblem,
    NewtonConfig,
    StepFailure,
    change_of_variables,
    final_state,
    solve_forward,
    step_theta,
    to_flux_variables,
)
from .green import GreenKernel, InstabilityError, apply_phi, eval_g, eval_k, solve_linear_integral
from .harness import (
    ExperimentConfig,
    ReconstructionReport,
    add_noise,
    coefficient_preset,
    run_experiment,
    stability_probe,
    synthesize_measurements,
    write_report,
)
from .objective import (
    Measurement,
    ObjectiveSpec,
    Variant,
    eval_objective,
    misfit_error,
)
from .optim import EvaluationError, IterateRecord, OptimConfig, minimize, project_admissible, stop_check

__version__ = "0.1.0"
