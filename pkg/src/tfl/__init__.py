"""Finite difference toolbox for the tempered fractional Laplacian.

Builds the scheme's coefficient tensors in 1D/2D/3D, applies the resulting
multilevel-Toeplitz operator in O(M log M) through FFT circulant embedding,
and solves tempered fractional Poisson and reaction-diffusion problems.
"""

from .harness import (
    ErrorTable,
    TestFunctionSpec,
    error_norms,
    least_squares_order,
    operator_convergence,
    poisson_convergence,
    read_csv,
    read_snapshot,
    write_csv,
    write_snapshot,
)
from .operator import GridFunction, TemperedOperator, build_operator
from .quadrature import (
    Box,
    ToleranceError,
    WeightSpec,
    box_weight_integral,
    element_integrals,
    exterior_integral,
    radial_weight_integral,
)
from .solver import (
    AllenCahnSpec,
    CGConfig,
    CGError,
    GrayScottSpec,
    TimeStepperState,
    cg_solve,
    cn_step,
    run_allen_cahn,
    run_gray_scott,
    solve_poisson,
)
from .special import normalization_constant, upper_incomplete_gamma
from .stencil import SchemeParams, StencilTensor, build_stencil

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CGConfig",
    "CGError",
    "ErrorTable",
    "GridFunction",
    "AllenCahnSpec",
    "GrayScottSpec",
    "SchemeParams",
    "StencilTensor",
    "TemperedOperator",
    "TestFunctionSpec",
    "TimeStepperState",
    "ToleranceError",
    "WeightSpec",
    "box_weight_integral",
    "build_operator",
    "build_stencil",
    "cg_solve",
    "cn_step",
    "element_integrals",
    "error_norms",
    "exterior_integral",
    "least_squares_order",
    "normalization_constant",
    "operator_convergence",
    "poisson_convergence",
    "radial_weight_integral",
    "read_csv",
    "read_snapshot",
    "run_allen_cahn",
    "run_gray_scott",
    "solve_poisson",
    "upper_incomplete_gamma",
    "write_csv",
    "write_snapshot",
]
