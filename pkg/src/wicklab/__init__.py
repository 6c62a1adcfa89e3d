"""Bernoulli-noise Wick calculus: exact moments, Wick powers, diagrams and Hermite limits."""

from .diagrams import (
    DiagramTerm,
    WickMomentSpec,
    convergence_study,
    gaussian_wick_moment,
    wick_moment_closed,
    wick_moment_oracle,
    wick_moment_traversal,
)
from .errors import (
    ArityError,
    CapacityError,
    ExprSyntaxError,
    GridMismatchError,
    NonFiniteValueError,
    UnknownIdentifierError,
    WicklabError,
)
from .funcgrid import GridFunction, evaluate, load_csv, parse_expr, sample, to_source
from .hermite import (
    KForm,
    MultiIndexCoeffs,
    clt_ks_distance,
    hermite_functional_moment,
    hermite_polynomial,
    kform_eval,
    kform_limit_check,
    kform_orthogonality_check,
)
from .moments import McConfig, MomentSpec, moment_bruteforce, moment_montecarlo, moment_partition_formula, phi_eval
from .numbers import alternating_eulerian_sum, bernoulli_number, block_coefficient, eulerian_number
from .partitions import enumerate_diagrams, enumerate_even_partitions, enumerate_traversals
from .wick import (
    WickPolynomial,
    stochastic_exponent_closed,
    stochastic_exponent_partial,
    wick_polynomial,
    wick_power_of_noise,
)

__version__ = "0.1.0"
