"""Instance generation, Matrix Market I/O, experiments, reports and the CLI."""
from .experiments import (
    ExperimentResult,
    ExperimentSpec,
    ScalingResult,
    fit_loglog,
    run_convergence_experiment,
    run_scaling_experiment,
    run_solver,
    trial_seed,
)
from .generate import GeneratorSpec, Problem, generate_matrix
from .mmio import load_matrix_market, load_vector, save_matrix_market, save_vector
from .report import REPORT_FIELDS, save_report

__all__ = [
    "REPORT_FIELDS",
    "ExperimentResult",
    "ExperimentSpec",
    "GeneratorSpec",
    "Problem",
    "ScalingResult",
    "fit_loglog",
    "generate_matrix",
    "load_matrix_market",
    "load_vector",
    "run_convergence_experiment",
    "run_scaling_experiment",
    "run_solver",
    "save_matrix_market",
    "save_report",
    "save_vector",
    "trial_seed",
]
