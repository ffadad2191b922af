"""Blow-up toward solitons for the radial semilinear wave equation."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DomainError,
    GridMismatchError,
    NumericalError,
    ParameterError,
    SchemeBlowupError,
)
from .spectral import Field, Grid, StatePair, build_grid, inner_phi, norm_H, norm_H0, weighted_norms
from .solitons import SolitonParams, kappa, kappa0, kappa_star, u_hat
from .projections import pi, projector_set
from .modulation import ModulationResult, modulate
from .selfsim import SelfSimConfig, Trace, evolve, shoot_initial_parameters
from .diagnostics import (
    ShrinkingSetSpec,
    fit_decay,
    h_functional,
    nonlinear_R,
    parameter_derivative_audit,
    shrinking_set_check,
    varphi,
)
from .physical import (
    PhysicalConfig,
    blowup_curve,
    build_initial_data,
    cone_average,
    cutoff_chi,
    estimate_blowup_time,
    evolve_physical,
    to_selfsim,
)
