"""Solvers for the affine maximal surface equation and its subproblems."""

from .bvp2 import BVP2Problem, BVP2Solution, solve_second_bvp
from .cofactor import cofactor_operator_matrix, solve_cofactor_elliptic
from .ma_dirichlet import (
    boundary_envelope_values,
    op_lifting_solve,
    solve_ma_dirichlet,
)
from .maximize import MaximizeReport, PenaltyProblem, maximize_variational
from .pointwise import (
    affine_residual_pointwise,
    numeric_hessian,
    radial_power_example,
    tuned_pointwise_residual,
)
from .repair import singular_repair_step
from .residual import ResidualField, affine_maximal_residual, residual_sup

__all__ = [
    "BVP2Problem",
    "BVP2Solution",
    "MaximizeReport",
    "PenaltyProblem",
    "ResidualField",
    "affine_maximal_residual",
    "affine_residual_pointwise",
    "boundary_envelope_values",
    "cofactor_operator_matrix",
    "maximize_variational",
    "numeric_hessian",
    "op_lifting_solve",
    "radial_power_example",
    "residual_sup",
    "singular_repair_step",
    "solve_cofactor_elliptic",
    "solve_ma_dirichlet",
    "solve_second_bvp",
    "tuned_pointwise_residual",
]
