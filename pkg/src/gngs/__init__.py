"""Ground states and best constants for Sobolev and Gagliardo-Nirenberg
inequalities built from anisotropic homogeneous operators on R^n."""

from .exponents import (
    DilationStructure,
    GNExponents,
    IndexSet,
    MultiGNExponents,
    RatioFactor,
    Verdict,
    check_admissible,
    critical_exponent,
    gn_exponents,
    homogeneous_dimension,
    interpolation_s,
    multi_gn_exponents,
    sobolev_gn_ratio_factor,
)
from .grid import (
    GridFunction,
    GridSpec,
    HomogeneousSymbol,
    apply_fractional_power,
    boundary_mass,
    dilate,
    fourier_frequencies,
    load_grid_function,
    lp_norm,
    random_test_function,
    save_grid_function,
    sobolev_seminorm,
)
from .functionals import (
    FunctionalReport,
    ProblemSpec,
    Term,
    brezis_lieb_check,
    energy_L,
    functional_report,
    gn_quotient_J,
    gradient_L,
    nehari_I,
    nehari_project,
    sobolev_quotient,
    two_term_problem,
)
from .solver import (
    GroundStateResult,
    SolverOptions,
    brute_force_d,
    lambda_derivative,
    minimizer_mass_check,
    pohozaev_check,
    solve_ground_state,
)

__version__ = "0.1.0"
