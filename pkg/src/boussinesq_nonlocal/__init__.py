"""Pseudo-spectral solver for Boussinesq-type equations with integral initial conditions."""

from .errors import (
    BoussinesqError,
    DomainTagError,
    GridError,
    InadmissibleProblemError,
    PropagatorOverflowError,
    SingularDeterminantError,
    SymbolSingularityError,
)
from .grid import Domain, SpectralField, SpectralGrid, make_grid, to_frequency, to_physical
from .linear import LinearProblem, LinearSolution, SeparableSource, apply_S1, apply_S2, solve_linear
from .nonlinear import (
    NonlinearControls,
    NonlinearProblem,
    NonlinearRun,
    blowup_monitor,
    max_window,
    register_nonlinearity,
    solve_nonlinear,
)
from .nonlocal_conditions import NonlocalKernel, admissibility_margin, check_admissibility
from .norms import NormSuite, linf_norm, lp_norm, ysp_norm
from .propagator import PropagatorTable
from .symbols import OperatorSymbol, check_symbol_bounds, preset_symbol

__version__ = "0.1.0"
