"""Large-time power expansions for forced Galerkin Navier-Stokes on the 3-torus."""

from .exponents import ExponentSequence, generate_semigroup, integer_sequence, pair_decompositions, shift_predecessor
from .expansion import (
    DivergentExpansionWarning,
    ForceExpansion,
    SolutionExpansion,
    check_summability,
    construct_admissible_force,
    evaluate_series,
    factorial_example,
    forward_recursion,
    inverse_recursion,
)
from .spectral import GevreyParams, SpectralField, bilinear_B, gevrey_norm, leray_project, random_solenoidal_field
from .solver import ForceModel, SolverConfig, Trajectory, energy_budget, evaluate_force, integrate, integrate_linear

__version__ = "0.1.0"
