"""Stochastic heat equation with piecewise-constant conductivity.

Closed-form fundamental solution, Monte Carlo mild solutions driven by
space-time white noise, and numerical checks that the mild solution satisfies
the weak formulation with its interface term.
"""

from .kernel import Coefficients, alpha, apply_semigroup, beta, f_transform, kernel_dGdx, kernel_G
from .quadrature import DEFAULT_QUAD, QuadratureError, QuadratureSpec, UnderResolvedError
from .stochastic import (
    FieldSample,
    NoiseField,
    SpaceTimeGrid,
    covariance_quadrature,
    mild_field,
    monte_carlo_variance,
    sample_noise,
    variance_quadrature,
)
from .weakform import (
    TestFunction,
    WeakResidualReport,
    equivalence_residual,
    eval_test_fn,
    refinement_study,
    weak_lhs,
    weak_rhs,
)

__version__ = "0.1.0"

__all__ = [
    "Coefficients",
    "alpha",
    "apply_semigroup",
    "beta",
    "f_transform",
    "kernel_dGdx",
    "kernel_G",
    "DEFAULT_QUAD",
    "QuadratureError",
    "QuadratureSpec",
    "UnderResolvedError",
    "FieldSample",
    "NoiseField",
    "SpaceTimeGrid",
    "covariance_quadrature",
    "mild_field",
    "monte_carlo_variance",
    "sample_noise",
    "variance_quadrature",
    "TestFunction",
    "WeakResidualReport",
    "equivalence_residual",
    "eval_test_fn",
    "refinement_study",
    "weak_lhs",
    "weak_rhs",
]
