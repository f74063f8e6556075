"""Randomized Kaczmarz and coordinate-descent solvers."""
from .coordinate import (
    averaged_coord_descent_solve,
    coord_descent_solve,
    coord_descent_step,
    validate_spd,
)
from .dual import (
    averaged_kaczmarz_sampled_solve,
    dual_kaczmarz_sampled_solve,
    dual_kaczmarz_sampled_step,
    dual_kaczmarz_solve,
    dual_kaczmarz_step,
    sampled_inner_product,
)
from .kaczmarz import kaczmarz_solve, kaczmarz_step
from .schedules import (
    compute_d_averaged,
    compute_d_basic,
    compute_d_cd_averaged,
    compute_q_averaged,
    compute_q_cd_averaged,
    compute_T_averaged,
    compute_T_basic,
    compute_T_cd,
    compute_T_cd_averaged,
    compute_T_kaczmarz,
)
from .types import IterationTrace, SolverConfig, SparseDescription

SOLVERS = {
    "kaczmarz": kaczmarz_solve,
    "dual": dual_kaczmarz_solve,
    "dual-sampled": dual_kaczmarz_sampled_solve,
    "averaged": averaged_kaczmarz_sampled_solve,
    "cd": coord_descent_solve,
    "cd-averaged": averaged_coord_descent_solve,
}

__all__ = [
    "SOLVERS",
    "IterationTrace",
    "SolverConfig",
    "SparseDescription",
    "averaged_coord_descent_solve",
    "averaged_kaczmarz_sampled_solve",
    "compute_T_averaged",
    "compute_T_basic",
    "compute_T_cd",
    "compute_T_cd_averaged",
    "compute_T_kaczmarz",
    "compute_d_averaged",
    "compute_d_basic",
    "compute_d_cd_averaged",
    "compute_q_averaged",
    "compute_q_cd_averaged",
    "coord_descent_solve",
    "coord_descent_step",
    "dual_kaczmarz_sampled_solve",
    "dual_kaczmarz_sampled_step",
    "dual_kaczmarz_solve",
    "dual_kaczmarz_step",
    "kaczmarz_solve",
    "kaczmarz_step",
    "sampled_inner_product",
    "validate_spd",
]
